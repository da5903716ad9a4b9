import pytest
from hypothesis import settings

from constraingen import mockdata
from constraingen.lm import build_ngram

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def lexicon():
    return mockdata.lexicon()


@pytest.fixture(scope="session")
def mock_lm():
    return build_ngram(mockdata.corpus(4000, 0), 3, 0.01)


@pytest.fixture(scope="session")
def mock_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("mock")
    mockdata.write_all(d)
    return d
