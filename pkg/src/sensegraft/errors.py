"""Exception types shared across the package."""


class SensegraftError(Exception):
    """Base class for all package errors."""


class LoadError(SensegraftError):
    """An input file is missing or unreadable."""


class ParseError(LoadError):
    """An input file is malformed.  Carries path and line number when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")
        self.path = path
        self.line = line


class NotFoundError(SensegraftError):
    """A requested key (synset, relation, vector) does not exist."""


class DimensionError(SensegraftError):
    """Vector or matrix dimensions do not agree."""


class QueryError(SensegraftError):
    """A masked query is malformed (wrong mask count, empty candidates, ...)."""


class SingularFitError(SensegraftError):
    """The unregularized least-squares system is singular."""


class CalibrationError(SensegraftError):
    """Threshold calibration found no correct predictions."""
