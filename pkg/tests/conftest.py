import pytest

from gazeloop.config import RunConfig
from gazeloop.fixtures import default_corpus, demo_records
from gazeloop.mock.tools import MockChatClient, MockToolSuite


@pytest.fixture
def corpus():
    return default_corpus()


@pytest.fixture
def suite(corpus):
    return MockToolSuite(corpus, seed=0)


@pytest.fixture
def chat(corpus):
    return MockChatClient(corpus)


@pytest.fixture
def config():
    return RunConfig()


@pytest.fixture
def records():
    return demo_records()
