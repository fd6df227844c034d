import pytest

from stagebound import build_stage_graph
from stagebound.corpus import default_corpus


@pytest.fixture(scope="session")
def corpus():
    return default_corpus()


@pytest.fixture(scope="session")
def corpus_graphs(corpus):
    """Stage trees for the whole bundled corpus, built once per session."""
    return {e.name: build_stage_graph(e.protocol()) for e in corpus}
