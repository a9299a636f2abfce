import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wnfixture import chain_synsets, mini_synsets, write_wordnet  # noqa: E402

from sensegraft.ontology import load_wordnet  # noqa: E402


@pytest.fixture(scope="session")
def mini_wn(tmp_path_factory):
    return write_wordnet(tmp_path_factory.mktemp("mini_wn"), mini_synsets())


@pytest.fixture(scope="session")
def mini_core_list(mini_wn, tmp_path_factory):
    path = tmp_path_factory.mktemp("core") / "core.txt"
    refs = ["animal", "dog", "wolf", "cat", "pack", "medicine", "drug", "good", "bad", "fur", "tail"]
    mini_wn.write_core_list(path, refs, bogus=["notaword%1:03:0::"])
    return path


@pytest.fixture(scope="session")
def mini_onto(mini_wn, mini_core_list):
    return load_wordnet(mini_wn.root, mini_core_list)


@pytest.fixture(scope="session")
def chain_wn(tmp_path_factory):
    return write_wordnet(tmp_path_factory.mktemp("chain_wn"), chain_synsets(8))
