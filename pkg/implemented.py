from dao.annotation import HumanAnnotationDAO
from dao.checkpoint import CheckpointDAO
from dao.config import ConfigDAO
from dao.corpus import CorpusDAO
from dao.report import RecordDAO
from dao.rule import RuleDAO
from service.attribution import AttributionService
from service.corpus import CorpusService
from service.neural import NeuralService
from service.rule_engine import RuleEngineService
from service.rule_gen import RuleGenService
from service.synthetic import SyntheticService
from service.trainer import TrainerService

annotation_dao = HumanAnnotationDAO()
checkpoint_dao = CheckpointDAO()
config_dao = ConfigDAO()
corpus_dao = CorpusDAO()
record_dao = RecordDAO()
rule_dao = RuleDAO()

corpus_service = CorpusService(dao=corpus_dao)
synthetic_service = SyntheticService(corpus_service)
rule_service = RuleEngineService(dao=rule_dao)
neural_service = NeuralService(dao=checkpoint_dao)
trainer_service = TrainerService()
rule_gen_service = RuleGenService(trainer_service)
attribution_service = AttributionService()
