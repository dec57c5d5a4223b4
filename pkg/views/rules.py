from dataclasses import replace
from pathlib import Path

import click

from dao.model.config import TEST_PREDICTED, TRAIN_GOLD, GenConfig, TrainConfig
from dao.model.prediction import RULES, Prediction, PredictionSchema
from dao.model.report import CoverageReportSchema, EvalReportSchema
from helpers import corpus_options, handles_errors, path_list, split_option, table_path, writes_manifest
from implemented import config_dao, corpus_service, neural_service, record_dao, rule_gen_service, rule_service
from service.evaluation import compare_rulesets, format_table
from service.rule_engine import rule_coverage
from service.rule_gen import merge_rulesets

rules_ns = click.Group('rules', help='Rule sets: generation, application and comparison.')

MODES = {'gold': TRAIN_GOLD, 'predicted': TEST_PREDICTED}


@rules_ns.command('gen-rules')
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@corpus_options
@split_option('train')
@click.option('--manual', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option('--mode', type=click.Choice(sorted(MODES)), default='gold', show_default=True,
              help='gold: gold labels with rule or latent rationales; predicted: model predictions.')
@click.option('--config', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Rule generation settings (YAML).')
@click.option('--train-config', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Thresholds for the latent rationale search in gold mode.')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@handles_errors
@writes_manifest
def gen_rules(model_path: Path, corpus: Path, fmt: str, split: str, manual: Path, mode: str, config: Path,
              train_config: Path, out: Path) -> dict:
    """
    Строит глобальные синтаксические правила из локальных объяснений модели.
    """
    gen_config = config_dao.load_gen_config(config) if config else GenConfig()
    gen_config = replace(gen_config, source=MODES[mode])
    search_config = config_dao.load_train_config(train_config) if train_config else TrainConfig()
    model = neural_service.load(model_path)
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    rules = rule_gen_service.generate_ruleset(model, instances, rule_service.parse_rules(manual), gen_config,
                                              search_config)
    rule_service.save_rules(out, rules)
    return {'rules': out}


@rules_ns.command('run-rules')
@click.option('--rules', callback=path_list, required=True, help='Comma-separated rule files; order is priority.')
@corpus_options
@split_option()
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@handles_errors
@writes_manifest
def run_rules(rules: list, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    """
    Применяет объединение наборов правил как модель извлечения отношений.
    """
    merged = merge_rulesets(rule_service.parse_many(rules))
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    labels = rule_service.predict(merged, instances)
    predictions = [Prediction(instance.id, labels[instance.id], method=RULES) for instance in instances]
    record_dao.write_lines(out, predictions, PredictionSchema())
    return {'predictions': out}


@rules_ns.command('rule-coverage')
@click.option('--rules', callback=path_list, required=True, help='Comma-separated rule files.')
@corpus_options
@split_option('train')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@handles_errors
@writes_manifest
def coverage(rules: list, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    merged = merge_rulesets(rule_service.parse_many(rules))
    report = rule_coverage(merged, corpus_service.load_corpus(corpus, fmt).split(split))
    record_dao.write_json(out, report, CoverageReportSchema())
    click.echo(f'positives covered: {report.covered_positives}/{report.positives} '
               f'({report.positive_coverage * 100:.2f}%), instances matched: '
               f'{report.matched_instances}/{report.instances}')
    return {'report': out}


def _named(ctx, param, values) -> dict:
    named = {}
    for value in values:
        name, _, path = value.partition('=')
        if not name or not path:
            raise click.BadParameter(f'expected NAME=FILE, got {value!r}')
        if not Path(path).exists():
            raise click.BadParameter(f'missing file {path}')
        named[name] = Path(path)
    return named


@rules_ns.command('compare-rules')
@click.option('--rules', multiple=True, required=True, callback=_named, help='NAME=FILE, repeatable.')
@click.option('--combine', multiple=True, help='NAME+NAME[+...], repeatable.')
@corpus_options
@split_option()
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@handles_errors
@writes_manifest
def compare_rules(rules: dict, combine: tuple, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    """
    Сравнивает наборы правил и их объединения по precision, recall и F1.
    """
    named = {name: rule_service.parse_rules(path) for name, path in rules.items()}
    combinations = [value.split('+') for value in combine]
    reports = compare_rulesets(named, combinations, corpus_service.load_corpus(corpus, fmt).split(split))
    record_dao.write_lines(out, reports, EvalReportSchema())
    table = format_table(reports)
    text_path = table_path(out)
    record_dao.write_text(text_path, table)
    click.echo(table, nl=False)
    return {'reports': out, 'table': text_path}
