import logging
from pathlib import Path

import yaml
from marshmallow import ValidationError

from config import Config
from constants import RULE_OBJ_PREFIX, RULE_SUBJ_PREFIX, SUBJ_PREFIX, OBJ_PREFIX, GAP as GAP_SYMBOL, UP, DOWN
from dao.model.instance import PathStep
from dao.model.rule import (
    GAP, LEMMA, LITERAL, OBJ, SUBJ, SURFACE, SYNTACTIC, WORD,
    Argument, PatternElement, Rule, RuleRecordSchema, RuleSet, SurfaceRule, SyntacticRule, TriggerConstraint,
)
from exceptions import RuleSyntaxError, RuleValidationError

logger = logging.getLogger(__name__)

LINE_KEY = '__line__'


class LineLoader(yaml.SafeLoader):
    """
    Загрузчик YAML, который запоминает номер строки начала каждого словаря.
    """

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping[LINE_KEY] = node.start_mark.line + 1
        return mapping


def block_line(text: str, position: int) -> int:
    """
    Функция возвращает номер строки, с которой начинается блок с заданным номером в списке правил.
    """
    node = yaml.compose(text, Loader=LineLoader)
    return node.value[position].start_mark.line + 1


def parse_pattern(text: str, line: int) -> tuple:
    elements = []
    for chunk in text.split():
        if chunk.startswith('[') and chunk.endswith(']'):
            chunk = chunk[1:-1]
        if chunk == GAP_SYMBOL:
            elements.append(PatternElement(GAP))
        elif chunk.startswith(SUBJ_PREFIX) and len(chunk) > len(SUBJ_PREFIX):
            elements.append(PatternElement(SUBJ, chunk[len(SUBJ_PREFIX):]))
        elif chunk.startswith(OBJ_PREFIX) and len(chunk) > len(OBJ_PREFIX):
            elements.append(PatternElement(OBJ, chunk[len(OBJ_PREFIX):]))
        elif chunk:
            elements.append(PatternElement(LITERAL, chunk))
    if not elements:
        raise RuleSyntaxError(line, 'empty surface pattern')
    return tuple(elements)


def parse_trigger(text: str, line: int) -> TriggerConstraint:
    text = text.strip()
    if text.startswith('[') and text.endswith(']'):
        text = text[1:-1].strip()
    selector, sep, value = text.partition('=')
    selector, value = selector.strip(), value.strip()
    if not sep or selector not in (WORD, LEMMA):
        raise RuleSyntaxError(line, f'trigger must look like word=... or lemma=..., got {text!r}')
    if len(value) >= 2 and value.startswith('/') and value.endswith('/'):
        value = value[1:-1]
    alternatives = tuple(tuple(alt.split()) for alt in value.split('|'))
    if not alternatives or any(not alt for alt in alternatives):
        raise RuleSyntaxError(line, f'empty trigger alternative in {text!r}')
    return TriggerConstraint(selector, alternatives)


def parse_path(text: str, line: int) -> tuple:
    steps = []
    direction = DOWN
    for chunk in text.split():
        if chunk[0] in '<>':
            direction = UP if chunk[0] == '<' else DOWN
            chunk = chunk[1:]
        optional = chunk.endswith('?')
        deprel = chunk.rstrip('?')
        if not deprel or any(c in deprel for c in '<>?'):
            raise RuleSyntaxError(line, f'bad path step {chunk!r}')
        steps.append(PathStep(direction, deprel, optional))
    return tuple(steps)


def parse_argument(text: str, prefix: str, line: int) -> Argument:
    name, sep, path = text.partition('=')
    name = name.strip()
    if not sep:
        raise RuleSyntaxError(line, f'argument must look like {prefix}Type = path, got {text!r}')
    if not name.startswith(prefix) or len(name) == len(prefix):
        raise RuleValidationError(f'line {line}: argument {name!r} must be named {prefix}<Type>')
    steps = parse_path(path, line)
    if not steps:
        raise RuleValidationError(f'line {line}: argument {name} has an empty path')
    return Argument(name[len(prefix):], steps)


def format_pattern(pattern: tuple) -> str:
    symbols = {GAP: lambda e: GAP_SYMBOL, SUBJ: lambda e: SUBJ_PREFIX + e.value,
               OBJ: lambda e: OBJ_PREFIX + e.value, LITERAL: lambda e: e.value}
    return ' '.join(symbols[element.kind](element) for element in pattern)


def format_trigger(trigger: TriggerConstraint) -> str:
    return f'{trigger.field}=' + '|'.join(' '.join(alt) for alt in trigger.alternatives)


def format_path(path: tuple) -> str:
    return ' '.join(('<' if step.direction == UP else '>') + step.deprel + ('?' if step.optional else '')
                    for step in path)


def format_argument(argument: Argument, prefix: str) -> str:
    return f'{prefix}{argument.entity_type} = {format_path(argument.path)}'


def rule_to_record(rule: Rule) -> dict:
    if isinstance(rule, SurfaceRule):
        return {'id': rule.id, 'kind': SURFACE, 'label': rule.label,
                'pattern': format_pattern(rule.pattern), 'source': rule.provenance}
    return {
        'id': rule.id,
        'kind': SYNTACTIC,
        'label': rule.label,
        'trigger': format_trigger(rule.trigger),
        'subject': format_argument(rule.subject, RULE_SUBJ_PREFIX),
        'object': format_argument(rule.object, RULE_OBJ_PREFIX),
        'source': rule.provenance,
    }


def record_to_rule(data: dict, line: int) -> Rule:
    if data['kind'] == SURFACE:
        return SurfaceRule(data['id'], data['label'], parse_pattern(data['pattern'], line), data['source'])
    return SyntacticRule(
        id=data['id'],
        label=data['label'],
        trigger=parse_trigger(data['trigger'], line),
        subject=parse_argument(data['subject'], RULE_SUBJ_PREFIX, line),
        object=parse_argument(data['object'], RULE_OBJ_PREFIX, line),
        provenance=data['source'],
    )


class RuleDAO:
    """
    Класс описывает Data Access Object (DAO) для работы с YAML-файлами правил.
    """

    def __init__(self, encoding: str = Config.ENCODING):
        """
        Метод инициализирует DAO.
        :param encoding: Кодировка файлов правил.
        """
        self.encoding = encoding
        self.schema = RuleRecordSchema()

    def load(self, path: Path) -> RuleSet:
        """
        Метод читает файл правил целиком. Частично разобранный набор правил не возвращается никогда.
        :param path: Путь к файлу правил.
        :return: Набор правил в порядке файла.
        """
        text = Path(path).read_text(encoding=self.encoding)
        try:
            blocks = yaml.load(text, Loader=LineLoader)
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            raise RuleSyntaxError(mark.line + 1 if mark else 0, str(e)) from e
        if blocks is None:
            return RuleSet()
        if not isinstance(blocks, list):
            raise RuleSyntaxError(1, 'rule file must be a list of rule blocks')
        rules = []
        for position, block in enumerate(blocks):
            if not isinstance(block, dict):
                raise RuleSyntaxError(block_line(text, position), f'rule block must be a mapping, got {block!r}')
            line = block.pop(LINE_KEY)
            try:
                data = self.schema.load(block)
            except ValidationError as e:
                raise RuleValidationError(f'line {line}: {e.messages}') from e
            rules.append(record_to_rule(data, line))
        logger.debug('parsed %d rules from %s', len(rules), path)
        return RuleSet(tuple(rules))

    def save(self, path: Path, rules: RuleSet) -> None:
        """
        Метод записывает набор правил в YAML-файл в исходном порядке.
        :param path: Путь к файлу правил.
        :param rules: Набор правил.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = yaml.safe_dump([rule_to_record(rule) for rule in rules], sort_keys=False,
                              allow_unicode=True, default_flow_style=False)
        path.write_text(text if rules else '', encoding=self.encoding)
