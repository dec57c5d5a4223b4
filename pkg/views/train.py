from pathlib import Path

import click

from config import Config
from dao.model.config import ABLATE_EC, ABLATE_NRC, TrainConfig
from dao.model.prediction import PredictionSchema
from dao.model.report import TrainLogRecordSchema
from helpers import corpus_options, handles_errors, split_option, writes_manifest
from implemented import config_dao, corpus_service, neural_service, record_dao, rule_service, trainer_service
from service.rule_engine import annotate_explanations

train_ns = click.Group('train', help='Model training and inference.')


@train_ns.command('train')
@corpus_options
@click.option('--rules', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True,
              help='Rule file used to annotate training instances.')
@click.option('--config', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Training configuration (YAML); defaults are used when omitted.')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option('--ablate', type=click.Choice([ABLATE_NRC, ABLATE_EC]), default=None)
@handles_errors
@writes_manifest
def train(corpus: Path, fmt: str, rules: Path, config: Path, out: Path, ablate: str) -> dict:
    """
    Обучает модель: burn-in на экземплярах, размеченных правилами, затем поиск латентных объяснений.
    """
    train_config = config_dao.load_train_config(config) if config else TrainConfig()
    data = corpus_service.load_corpus(corpus, fmt)
    annotations = annotate_explanations(rule_service.parse_rules(rules), data.train)
    model, records = trainer_service.train(data, annotations, train_config, ablate)
    neural_service.save(out, model)
    log_path = Path(str(out) + Config.TRAIN_LOG_SUFFIX)
    record_dao.write_lines(log_path, records, TrainLogRecordSchema())
    return {'model': out, 'train_log': log_path}


@train_ns.command('predict')
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@corpus_options
@split_option()
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@handles_errors
@writes_manifest
def predict(model_path: Path, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    """
    Записывает для каждого экземпляра предсказанную метку и обоснование.
    """
    model = neural_service.load(model_path)
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    record_dao.write_lines(out, model.predict(instances), PredictionSchema())
    return {'predictions': out}
