from pathlib import Path

import click

from dao.model.prediction import PredictionSchema
from dao.model.report import EvalReport, EvalReportSchema
from helpers import corpus_options, handles_errors, path_list, split_option, table_path, writes_manifest
from implemented import annotation_dao, corpus_service, record_dao, rule_service
from service.evaluation import ec_overlap, format_table, plausibility, rc_micro
from service.rule_engine import annotate_explanations
from service.rule_gen import merge_rulesets

evaluate_ns = click.Group('evaluate', help='Evaluation reports.')

pred_option = click.option('--pred', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True,
                           help='Prediction records (JSON lines).')
out_option = click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)


def write_report(out: Path, report: EvalReport) -> dict:
    """
    Функция записывает отчет в JSON и выровненной таблицей рядом с ним.

    :param out: Путь к JSON-отчету.
    :param report: Отчет.
    :return: Словарь записанных путей.
    """
    record_dao.write_json(out, report, EvalReportSchema())
    table = format_table([report])
    text_path = table_path(out)
    record_dao.write_text(text_path, table)
    click.echo(table, nl=False)
    return {'report': out, 'table': text_path}


@evaluate_ns.command('eval-rc')
@pred_option
@corpus_options
@split_option()
@out_option
@handles_errors
@writes_manifest
def eval_rc(pred: Path, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    """
    Микро-усредненные precision, recall и F1 предсказанных меток отношений.
    """
    predictions = record_dao.read_lines(pred, PredictionSchema())
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    report = rc_micro({p.id: p.label for p in predictions},
                      {instance.id: instance.gold_relation for instance in instances}, name=pred.stem)
    return write_report(out, report)


@evaluate_ns.command('eval-ec')
@pred_option
@click.option('--rules', callback=path_list, required=True,
              help='Comma-separated rule files whose matches are the gold rationales.')
@corpus_options
@split_option()
@out_option
@handles_errors
@writes_manifest
def eval_ec(pred: Path, rules: list, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    """
    Пересечение предсказанных обоснований с токенами-триггерами правил на экземплярах, где правила сработали.
    """
    predictions = record_dao.read_lines(pred, PredictionSchema())
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    annotations = annotate_explanations(merge_rulesets(rule_service.parse_many(rules)), instances)
    report = ec_overlap({p.id: p.rationale for p in predictions},
                        {instance_id: labels.indices for instance_id, labels in annotations.items()},
                        {instance.id: instance.entity_indices for instance in instances}, name=pred.stem)
    return write_report(out, report)


@evaluate_ns.command('eval-plausibility')
@pred_option
@click.option('--annotations', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True,
              help='Human rationales of two annotators (JSON lines).')
@corpus_options
@split_option()
@out_option
@handles_errors
@writes_manifest
def eval_plausibility(pred: Path, annotations: Path, corpus: Path, fmt: str, split: str, out: Path) -> dict:
    """
    Сравнение обоснований с ручной разметкой: для каждого экземпляра берется лучший из двух аннотаторов.
    """
    predictions = record_dao.read_lines(pred, PredictionSchema())
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    humans = annotation_dao.load(annotations, {instance.id: instance for instance in instances})
    report = plausibility({p.id: p.rationale for p in predictions}, humans,
                          {instance.id: instance.entity_indices for instance in instances}, name=pred.stem)
    return write_report(out, report)
