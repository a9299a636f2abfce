"""Sense-vocabulary grafting, cloze probing, and grounded triple extraction."""

__version__ = "0.1.0"

from .ontology import Ontology, Synset, SynsetId, GroundedTriple
from .vectors import EmbeddingTable, Ranking

__all__ = [
    "Ontology",
    "Synset",
    "SynsetId",
    "GroundedTriple",
    "EmbeddingTable",
    "Ranking",
    "__version__",
]
