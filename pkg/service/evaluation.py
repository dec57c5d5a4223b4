import logging
from typing import Iterable, Mapping, Optional, Sequence

from constants import NO_RELATION
from dao.model.prediction import HumanAnnotation
from dao.model.report import EvalReport, LabelCounts, f1_score
from dao.model.rule import RuleSet
from exceptions import ConfigError, EvaluationError
from service.rule_engine import predict_with_rules
from service.rule_gen import merge_rulesets

logger = logging.getLogger(__name__)


def _ratio(numerator: float, denominator: float) -> float:
    """
    Деление с нулем при пустом знаменателе.
    """
    return numerator / denominator if denominator else 0.0


def rc_micro(preds: Mapping[str, str], golds: Mapping[str, str], name: str = '') -> EvalReport:
    """
    Функция считает микро-усредненные precision, recall и F1 по меткам отношений.
    NO_RELATION считается отрицательным классом.

    :param preds: Словарь id -> предсказанная метка.
    :param golds: Словарь id -> золотая метка.
    :param name: Имя отчета.
    :return: EvalReport с разбивкой по меткам.
    """
    if set(preds) != set(golds):
        missing = sorted(set(golds) ^ set(preds))[:5]
        raise EvaluationError(f'prediction and gold ids differ, e.g. {missing}')
    counts = {}

    def bump(label: str, key: str) -> None:
        counts.setdefault(label, {'tp': 0, 'fp': 0, 'fn': 0})[key] += 1

    tp = fp = fn = 0
    for instance_id in sorted(golds):
        pred, gold = preds[instance_id], golds[instance_id]
        if pred != NO_RELATION and pred == gold:
            tp += 1
            bump(gold, 'tp')
            continue
        if pred != NO_RELATION:
            fp += 1
            bump(pred, 'fp')
        if gold != NO_RELATION:
            fn += 1
            bump(gold, 'fn')
    precision, recall = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
    per_label = tuple(LabelCounts(label, **counts[label]) for label in sorted(counts))
    return EvalReport(precision, recall, f1_score(precision, recall), tp, fp, fn, len(golds), per_label, name)


def _overlap(pred: frozenset, gold: frozenset) -> tuple:
    """
    Функция считает precision, recall и F1 двух множеств токенов одного экземпляра.
    """
    common = len(pred & gold)
    precision, recall = _ratio(common, len(pred)), _ratio(common, len(gold))
    return precision, recall, f1_score(precision, recall)


def _macro(scores: Sequence[tuple], tp: int, fp: int, fn: int, name: str) -> EvalReport:
    """
    Функция усредняет оценки по экземплярам и собирает отчет.

    :param scores: Тройки (precision, recall, F1) по экземплярам.
    :param tp: Общее число совпавших токенов.
    :param fp: Общее число лишних токенов.
    :param fn: Общее число пропущенных токенов.
    :param name: Имя отчета.
    :return: EvalReport
    """
    if not scores:
        return EvalReport(0.0, 0.0, 0.0, tp, fp, fn, 0, (), name)
    count = len(scores)
    return EvalReport(
        precision=sum(s[0] for s in scores) / count,
        recall=sum(s[1] for s in scores) / count,
        f1=sum(s[2] for s in scores) / count,
        tp=tp, fp=fp, fn=fn, instances=count, name=name,
    )


def ec_overlap(preds: Mapping[str, Iterable[int]], golds: Mapping[str, Iterable[int]],
               excluded: Optional[Mapping[str, frozenset]] = None, name: str = '') -> EvalReport:
    """
    Функция считает пересечение предсказанных и золотых важных токенов:
    precision, recall и F1 для каждого экземпляра, усредненные по экземплярам.
    Экземпляры с пустым золотым множеством пропускаются, отсутствующее предсказание считается пустым.

    :param preds: Словарь id -> индексы токенов.
    :param golds: Словарь id -> индексы токенов.
    :param excluded: Словарь id -> индексы токенов сущностей, удаляемые с обеих сторон.
    :param name: Имя отчета.
    :return: EvalReport
    """
    excluded = excluded or {}
    scores, tp, fp, fn = [], 0, 0, 0
    for instance_id in sorted(golds):
        drop = excluded.get(instance_id, frozenset())
        gold = frozenset(golds[instance_id]) - drop
        if not gold:
            continue
        pred = frozenset(preds.get(instance_id, ())) - drop
        tp, fp, fn = tp + len(pred & gold), fp + len(pred - gold), fn + len(gold - pred)
        scores.append(_overlap(pred, gold))
    return _macro(scores, tp, fp, fn, name)


def plausibility(preds: Mapping[str, Iterable[int]], humans: Mapping[str, HumanAnnotation],
                 excluded: Optional[Mapping[str, frozenset]] = None, name: str = '') -> EvalReport:
    """
    Функция сравнивает обоснования с ручной разметкой двух аннотаторов и для каждого экземпляра
    берет лучший по F1 результат (при равенстве первого аннотатора).

    :param preds: Словарь id -> индексы токенов.
    :param humans: Словарь id -> HumanAnnotation.
    :param excluded: Словарь id -> индексы токенов сущностей.
    :param name: Имя отчета.
    :return: EvalReport
    """
    excluded = excluded or {}
    scores, tp, fp, fn = [], 0, 0, 0
    for instance_id in sorted(humans):
        annotation = humans[instance_id]
        if annotation.annotator_a is None or annotation.annotator_b is None:
            raise EvaluationError(f'instance {instance_id}: missing annotator')
        drop = excluded.get(instance_id, frozenset())
        pred = frozenset(preds.get(instance_id, ())) - drop
        golds = [annotation.annotator_a - drop, annotation.annotator_b - drop]
        if not any(golds):
            continue
        results = [_overlap(pred, gold) for gold in golds]
        best = 0 if results[0][2] >= results[1][2] else 1
        gold = golds[best]
        tp, fp, fn = tp + len(pred & gold), fp + len(pred - gold), fn + len(gold - pred)
        scores.append(results[best])
    return _macro(scores, tp, fp, fn, name)


def format_table(reports: Sequence[EvalReport]) -> str:
    """
    Функция выводит отчеты выровненными колонками.
    """
    header = ('name', 'P', 'R', 'F1', 'TP', 'FP', 'FN', 'N')
    rows = [header] + [
        (r.name or '-', f'{r.precision * 100:.2f}', f'{r.recall * 100:.2f}', f'{r.f1 * 100:.2f}',
         str(r.tp), str(r.fp), str(r.fn), str(r.instances))
        for r in reports
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ['  '.join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             for row in rows]
    return '\n'.join(line.rstrip() for line in lines) + '\n'


def compare_rulesets(named: Mapping[str, RuleSet], combinations: Sequence[Sequence[str]], instances) -> list:
    """
    Функция оценивает отдельные наборы правил и их объединения как модели извлечения.

    :param named: Словарь имя -> RuleSet.
    :param combinations: Списки имен для объединения (порядок задает приоритет правил).
    :param instances: Экземпляры для оценки.
    :return: Список EvalReport: сначала каждый набор, затем объединения.
    """
    instances = list(instances)
    golds = {instance.id: instance.gold_relation for instance in instances}
    reports = []
    for names in [[n] for n in named] + [list(c) for c in combinations]:
        unknown = [n for n in names if n not in named]
        if unknown:
            raise ConfigError(f'unknown rule set names {unknown}')
        rules = merge_rulesets(named[n] for n in names)
        preds = {instance.id: predict_with_rules(rules, instance) for instance in instances}
        reports.append(rc_micro(preds, golds, name='+'.join(names)))
        logger.info('%s: %d rules, F1=%.4f', '+'.join(names), len(rules), reports[-1].f1)
    return reports
