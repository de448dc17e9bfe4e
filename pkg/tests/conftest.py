import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pqcis import fixtures
from pqcis.index import build_index


@pytest.fixture(scope="session")
def toy_passages():
    return fixtures.load_toy_passages()


@pytest.fixture(scope="session")
def toy_index(toy_passages):
    return build_index(iter(toy_passages))


@pytest.fixture(scope="session")
def toy_texts(toy_passages):
    return {p.id: p.text for p in toy_passages}


@pytest.fixture(scope="session")
def toy_topics():
    return fixtures.load_toy_topics()
