import logging
from dataclasses import replace
from typing import Iterable, Optional

from constants import NO_RELATION
from dao.model.config import TEST_PREDICTED, TRAIN_GOLD, GenConfig, TrainConfig
from dao.model.instance import ExplanationLabels, RelationInstance
from dao.model.rule import GEN_TEST, GEN_TRAIN, WORD, Argument, RuleSet, SyntacticRule, TriggerConstraint
from exceptions import RuleValidationError
from service.corpus import shallowest, shortest_dep_path
from service.rule_engine import annotate_explanations, match_rule

logger = logging.getLogger(__name__)

RULE_ID_PREFIX = {GEN_TRAIN: 'gen-train', GEN_TEST: 'gen-test'}


def contiguous_runs(indices: Iterable[int]) -> list:
    runs = []
    for i in sorted(set(indices)):
        if runs and runs[-1][-1] == i - 1:
            runs[-1].append(i)
        else:
            runs.append([i])
    return runs


def _distance(run: list, span: tuple) -> int:
    """
    Функция возвращает расстояние в токенах от отрезка триггера до сущности слева или справа от него.
    """
    if run[-1] < span[0]:
        return span[0] - run[-1]
    return run[0] - span[1]


def trigger_run(instance: RelationInstance, indices: Iterable[int]) -> Optional[list]:
    """
    Функция выбирает самый длинный непрерывный отрезок индексов.
    При равной длине берется ближайший к субъекту, затем самый левый.
    """
    runs = contiguous_runs(indices)
    if not runs:
        return None
    return min(runs, key=lambda run: (-len(run), _distance(run, instance.subj_span), run[0]))


def generate_rule(instance: RelationInstance, label: str, rationale: ExplanationLabels, manual_rules: RuleSet,
                  skip_if_manual_match: bool = True, rule_id: str = 'gen',
                  provenance: str = GEN_TRAIN) -> Optional[SyntacticRule]:
    """
    Функция строит синтаксическое правило по экземпляру, метке и токенам-обоснованиям.

    :param instance: Экземпляр отношения.
    :param label: Метка отношения (не NO_RELATION).
    :param rationale: Метки важности токенов.
    :param manual_rules: Ручные правила; экземпляр, на котором срабатывает одно из них, пропускается.
    :param skip_if_manual_match: Пропускать ли экземпляры, покрытые ручными правилами.
    :param rule_id: Идентификатор нового правила.
    :param provenance: Происхождение нового правила.
    :return: SyntacticRule или None.
    """
    if label == NO_RELATION:
        return None
    indices = rationale.indices - instance.entity_indices
    run = trigger_run(instance, indices)
    if run is None:
        return None
    if skip_if_manual_match and any(match_rule(rule, instance) for rule in manual_rules):
        return None
    forms = tuple(instance.tokens[i].form for i in run)
    if any(not form or '|' in form or any(c.isspace() for c in form) for form in forms):
        logger.debug('instance %s: trigger %r cannot be written as a rule', instance.id, forms)
        return None
    anchor = shallowest(instance, run)
    subj_path, _ = shortest_dep_path(instance, [anchor], instance.subj_indices)
    obj_path, _ = shortest_dep_path(instance, [anchor], instance.obj_indices)
    return SyntacticRule(
        id=rule_id,
        label=label,
        trigger=TriggerConstraint(WORD, (forms,)),
        subject=Argument(instance.subj_type, subj_path),
        object=Argument(instance.obj_type, obj_path),
        provenance=provenance,
    )


def dedupe(rules: Iterable) -> list:
    seen, kept = set(), []
    for rule in rules:
        if rule.signature not in seen:
            seen.add(rule.signature)
            kept.append(rule)
    return kept


def merge_rulesets(sets: Iterable[RuleSet]) -> RuleSet:
    """
    Функция объединяет наборы правил в порядке аргументов и убирает дубликаты.

    :param sets: Наборы правил (ручные первыми).
    :return: Объединенный RuleSet.
    """
    merged = dedupe(rule for rules in sets for rule in rules)
    ids = [rule.id for rule in merged]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise RuleValidationError(f'different rules share ids {duplicates}')
    return RuleSet(tuple(merged))


def build_ruleset(triples: Iterable, manual_rules: RuleSet, config: GenConfig) -> RuleSet:
    """
    Функция строит набор правил по тройкам (экземпляр, метка, обоснование).
    """
    provenance = GEN_TRAIN if config.source == TRAIN_GOLD else GEN_TEST
    rules = []
    for instance, label, rationale in triples:
        rule = generate_rule(instance, label, rationale, manual_rules, config.skip_if_manual_match,
                             provenance=provenance)
        if rule is not None:
            rules.append(rule)
    if config.dedupe:
        rules = dedupe(rules)
    prefix = RULE_ID_PREFIX[provenance]
    rules = [replace(rule, id=f'{prefix}-{n:05d}') for n, rule in enumerate(rules, start=1)]
    return RuleSet(tuple(rules))


class RuleGenService:
    """
    Класс описывает сервисы для построения глобальных правил из локальных объяснений модели.
    """

    def __init__(self, trainer_service):
        """
        Метод инициализирует сервис обучения, который дает предсказания и латентные объяснения.
        :param trainer_service: TrainerService
        """
        self.trainer_service = trainer_service

    def triples(self, model, instances, manual_rules: RuleSet, config: GenConfig,
                train_config: Optional[TrainConfig] = None) -> list:
        """
        Метод собирает тройки (экземпляр, метка, обоснование) для выбранного режима.

        :param model: Обученная модель.
        :param instances: Экземпляры выбранной части корпуса.
        :param manual_rules: Ручные правила для разметки обучающих экземпляров.
        :param config: Настройки генерации.
        :param train_config: Пороги поиска латентных объяснений.
        :return: Список троек.
        """
        instances = list(instances)
        if config.source == TEST_PREDICTED:
            triples = []
            for instance, prediction in zip(instances, model.predict(instances)):
                if prediction.label != NO_RELATION:
                    rationale = ExplanationLabels.from_indices(prediction.rationale, len(instance))
                    triples.append((instance, prediction.label, rationale))
            return triples
        annotations = annotate_explanations(manual_rules, instances)
        triples = []
        for instance in instances:
            if not instance.is_positive:
                continue
            rationale = annotations.get(instance.id)
            if rationale is None:
                rationale = self.trainer_service.latent_rationale(model, instance, instance.gold_relation,
                                                                   train_config)
            triples.append((instance, instance.gold_relation, rationale))
        return triples

    def generate_ruleset(self, model, instances, manual_rules: RuleSet, config: GenConfig,
                         train_config: Optional[TrainConfig] = None) -> RuleSet:
        """
        Метод строит набор правил по части корпуса.
        :return: RuleSet с происхождением GEN_TRAIN или GEN_TEST.
        """
        rules = build_ruleset(self.triples(model, instances, manual_rules, config, train_config), manual_rules, config)
        logger.info('generated %d rules (%s)', len(rules), config.source)
        return rules
