from pathlib import Path

import click

from config import Config
from helpers import handles_errors, writes_manifest
from implemented import config_dao, corpus_service, rule_service, synthetic_service

data_ns = click.Group('data', help='Synthetic corpora.')


@data_ns.command('gen-data')
@click.option('--spec', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True,
              help='Generator description (YAML).')
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--out', type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option('--format', 'fmt', type=click.Choice(sorted(Config.CORPUS_SUFFIX)), default=Config.CORPUS_FORMAT,
              show_default=True)
@handles_errors
@writes_manifest
def gen_data(spec: Path, seed: int, out: Path, fmt: str) -> dict:
    """
    Генерирует синтетический корпус (train/dev/test) и набор ручных правил к нему.
    """
    generator_spec = config_dao.load_generator_spec(spec)
    corpus = synthetic_service.gen_synthetic(generator_spec, seed)
    paths = corpus_service.save_corpus(out, corpus, fmt)
    rules_path = out / Config.MANUAL_RULES_FILE
    rule_service.save_rules(rules_path, synthetic_service.manual_rules(generator_spec))
    outputs = {'corpus': out, 'manual_rules': rules_path}
    outputs.update((path.stem, path) for path in paths)
    return outputs
