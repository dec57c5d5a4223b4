import pytest

from dao.model.config import TrainConfig
from service.corpus import CorpusService
from service.neural import RelationModel
from tests.factories import born_in, tiny_config, visited, walkthrough


@pytest.fixture
def walk():
    return walkthrough()


@pytest.fixture
def born():
    return born_in()


@pytest.fixture
def tiny_corpus():
    train = [walkthrough(), born_in(), visited(), walkthrough('walk-2'), born_in('born-2')]
    dev = [walkthrough('dev-walk'), visited('dev-visit')]
    return CorpusService.build(train, dev, [born_in('test-born'), visited('test-visit')])


@pytest.fixture
def tiny_model(tiny_corpus):
    return RelationModel.create(tiny_config(), tiny_corpus.token_vocab, tiny_corpus.relation_vocab)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(burn_in_epochs=1, total_epochs=2, candidate_cap=16, model=tiny_config())
