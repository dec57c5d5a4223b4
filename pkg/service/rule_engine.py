import logging
from pathlib import Path
from typing import Iterable, Optional

from constants import NO_RELATION
from dao.model.instance import RULE, Corpus, ExplanationLabels, RelationInstance
from dao.model.report import CoverageReport
from dao.model.rule import (
    GAP, LEMMA, LITERAL, OBJ, SUBJ, Rule, RuleMatch, RuleSet, SurfaceRule, SyntacticRule,
)
from dao.rule import RuleDAO
from exceptions import RuleValidationError
from service.corpus import shallowest, shortest_dep_path

logger = logging.getLogger(__name__)


def types_equal(a: str, b: str) -> bool:
    return a.casefold() == b.casefold()


def validate_rule(rule: Rule) -> None:
    """
    Функция проверяет инварианты правила.

    :param rule: Поверхностное или синтаксическое правило.
    :return: None, либо исключение RuleValidationError.
    """
    if not rule.id or not rule.label:
        raise RuleValidationError(f'rule {rule.id!r} needs an id and a label')
    if isinstance(rule, SurfaceRule):
        kinds = [element.kind for element in rule.pattern]
        if kinds.count(SUBJ) != 1 or kinds.count(OBJ) != 1:
            raise RuleValidationError(f'rule {rule.id}: needs exactly one SUBJ and one OBJ placeholder')
        if LITERAL not in kinds:
            raise RuleValidationError(f'rule {rule.id}: needs at least one literal token')
        if any(a == GAP and b == GAP for a, b in zip(kinds, kinds[1:])):
            raise RuleValidationError(f'rule {rule.id}: adjacent gaps')
        return
    if not rule.trigger.alternatives or not all(rule.trigger.alternatives):
        raise RuleValidationError(f'rule {rule.id}: empty trigger alternation')
    for argument in (rule.subject, rule.object):
        if not argument.entity_type or not argument.path:
            raise RuleValidationError(f'rule {rule.id}: argument without type or path')
        if any(not step.deprel for step in argument.path):
            raise RuleValidationError(f'rule {rule.id}: path step without a dependency label')


def validate_ruleset(rules: RuleSet) -> None:
    seen = set()
    for rule in rules:
        validate_rule(rule)
        if rule.id in seen:
            raise RuleValidationError(f'duplicate rule id {rule.id}')
        seen.add(rule.id)


def _match_elements(pattern: tuple, k: int, pos: int, instance: RelationInstance) -> Optional[list]:
    """
    Функция сопоставляет хвост шаблона, начиная с элемента k и позиции pos.
    Пропуск перебирает длины по возрастанию, поэтому первым находится самое короткое совпадение.

    :param pattern: Элементы поверхностного шаблона.
    :param k: Номер текущего элемента.
    :param pos: Текущая позиция в предложении.
    :param instance: Экземпляр отношения.
    :return: Позиции литералов, либо None, если совпадения нет.
    """
    if k == len(pattern):
        return []
    element = pattern[k]
    n = len(instance)
    if element.kind == GAP:
        for stop in range(pos, n + 1):
            rest = _match_elements(pattern, k + 1, stop, instance)
            if rest is not None:
                return rest
        return None
    if element.kind in (SUBJ, OBJ):
        span, entity_type = ((instance.subj_span, instance.subj_type) if element.kind == SUBJ
                             else (instance.obj_span, instance.obj_type))
        if pos != span[0] or not types_equal(element.value, entity_type):
            return None
        return _match_elements(pattern, k + 1, span[1] + 1, instance)
    if pos >= n or pos in instance.entity_indices or instance.tokens[pos].form != element.value:
        return None
    rest = _match_elements(pattern, k + 1, pos + 1, instance)
    return None if rest is None else [pos] + rest


def match_surface(rule: SurfaceRule, instance: RelationInstance) -> Optional[RuleMatch]:
    for start in range(len(instance) + 1):
        literals = _match_elements(rule.pattern, 0, start, instance)
        if literals is not None:
            return RuleMatch(rule.id, instance.id, frozenset(literals), rule.label)
    return None


def path_matches(pattern: tuple, steps: tuple, p: int = 0, s: int = 0) -> bool:
    """
    Функция сравнивает путь из дерева с шаблоном пути. Необязательный шаг можно пропустить или взять.
    """
    if p == len(pattern):
        return s == len(steps)
    step = pattern[p]
    if step.optional and path_matches(pattern, steps, p + 1, s):
        return True
    return (s < len(steps) and steps[s].direction == step.direction and steps[s].deprel == step.deprel
            and path_matches(pattern, steps, p + 1, s + 1))


def _trigger_token_matches(field: str, expected: str, instance: RelationInstance, index: int) -> bool:
    """
    Лемма сравнивается без учета регистра, словоформа точно.
    """
    token = instance.tokens[index]
    if field == LEMMA:
        return token.lemma.lower() == expected.lower()
    return token.form == expected


def match_syntactic(rule: SyntacticRule, instance: RelationInstance) -> Optional[RuleMatch]:
    if not (types_equal(rule.subject.entity_type, instance.subj_type)
            and types_equal(rule.object.entity_type, instance.obj_type)):
        return None
    n = len(instance)
    for start in range(n):
        for alternative in rule.trigger.alternatives:
            run = range(start, start + len(alternative))
            if run.stop > n or any(i in instance.entity_indices for i in run):
                continue
            if not all(_trigger_token_matches(rule.trigger.field, word, instance, i)
                       for word, i in zip(alternative, run)):
                continue
            anchor = shallowest(instance, run)
            subj_path, _ = shortest_dep_path(instance, [anchor], instance.subj_indices)
            if not path_matches(rule.subject.path, subj_path):
                continue
            obj_path, _ = shortest_dep_path(instance, [anchor], instance.obj_indices)
            if path_matches(rule.object.path, obj_path):
                return RuleMatch(rule.id, instance.id, frozenset(run), rule.label)
    return None


def match_rule(rule: Rule, instance: RelationInstance) -> Optional[RuleMatch]:
    """
    Функция применяет одно правило к экземпляру.

    :param rule: Правило.
    :param instance: Экземпляр отношения.
    :return: RuleMatch с наименьшим индексом триггера, либо None.
    """
    if isinstance(rule, SurfaceRule):
        return match_surface(rule, instance)
    return match_syntactic(rule, instance)


def _instances(corpus) -> Iterable[RelationInstance]:
    """
    Все экземпляры корпуса, либо сама последовательность экземпляров.
    """
    return corpus.instances() if isinstance(corpus, Corpus) else corpus


def annotate_explanations(rules: RuleSet, corpus) -> dict:
    """
    Функция размечает важные токены по совпадениям правил, метка которых равна золотой.

    :param rules: Набор правил.
    :param corpus: Корпус или последовательность экземпляров.
    :return: Словарь id -> ExplanationLabels (source=RULE).
    """
    annotations = {}
    for instance in _instances(corpus):
        if not instance.is_positive:
            continue
        tokens = set()
        matched = False
        for rule in rules:
            if rule.label != instance.gold_relation:
                continue
            match = match_rule(rule, instance)
            if match is not None:
                matched = True
                tokens |= match.trigger_tokens
        if matched:
            annotations[instance.id] = ExplanationLabels.from_indices(
                tokens, len(instance), RULE, instance.entity_indices)
    return annotations


def predict_with_rules(rules: RuleSet, instance: RelationInstance) -> str:
    """
    Функция возвращает метку первого сработавшего правила в порядке набора, либо NO_RELATION.
    """
    for rule in rules:
        if match_rule(rule, instance) is not None:
            return rule.label
    return NO_RELATION


def rule_coverage(rules: RuleSet, corpus) -> CoverageReport:
    instances = list(_instances(corpus))
    matched = sum(1 for instance in instances if any(match_rule(rule, instance) for rule in rules))
    annotated = annotate_explanations(rules, instances)
    return CoverageReport(
        positives=sum(1 for instance in instances if instance.is_positive),
        covered_positives=len(annotated),
        instances=len(instances),
        matched_instances=matched,
    )


class RuleEngineService:
    """
    Класс описывает сервисы для чтения, проверки и применения наборов правил.
    """

    def __init__(self, dao: RuleDAO):
        """
        Метод инициализирует DAO
        :param dao: DAO объект
        """
        self.dao = dao

    def parse_rules(self, path: Path) -> RuleSet:
        """
        Метод читает и проверяет набор правил из файла.

        :param path: Путь к файлу правил.
        :return: RuleSet, проверенный целиком.
        """
        rules = self.dao.load(path)
        validate_ruleset(rules)
        logger.info('loaded %d rules from %s', len(rules), path)
        return rules

    def parse_many(self, paths: Iterable[Path]) -> list:
        return [self.parse_rules(path) for path in paths]

    def save_rules(self, path: Path, rules: RuleSet) -> None:
        validate_ruleset(rules)
        self.dao.save(path, rules)

    def predict(self, rules: RuleSet, instances) -> dict:
        """
        Метод применяет набор правил как самостоятельную модель извлечения.

        :param rules: Набор правил.
        :param instances: Экземпляры.
        :return: Словарь id -> метка.
        """
        return {instance.id: predict_with_rules(rules, instance) for instance in instances}
