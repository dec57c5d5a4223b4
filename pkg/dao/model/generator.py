from dataclasses import dataclass, field
from typing import Optional

from marshmallow import RAISE, Schema, fields, post_load, validate

from exceptions import ConfigError

SUBJ_SLOT = 'SUBJ'
OBJ_SLOT = 'OBJ'
TRIG_SLOT = 'TRIG'
OTHER_SLOT = 'OTHER'
MENTION_SLOTS = (SUBJ_SLOT, OBJ_SLOT, OTHER_SLOT)


@dataclass(frozen=True)
class TemplateItem:
    form: str
    head: int
    deprel: str
    pos: str = 'X'
    slot: Optional[str] = None


@dataclass(frozen=True)
class Trigger:
    form: str
    lemma: str


@dataclass(frozen=True)
class RelationSpec:
    label: str
    subj_type: str
    obj_type: str
    rule_triggers: tuple
    triggers: tuple
    templates: tuple
    hard_negatives: tuple = ()


@dataclass(frozen=True)
class GeneratorSpec:
    relations: tuple
    mentions: dict
    distractors: tuple = ()
    fillers: dict = field(default_factory=dict)
    train: int = 2000
    dev: int = 400
    test: int = 500
    negative_fraction: float = 0.3
    hard_negative_fraction: float = 0.3
    rule_coverage: float = 0.25
    num_relations: Optional[int] = None

    def __post_init__(self):
        if self.num_relations is not None:
            if not 2 <= self.num_relations <= len(self.relations):
                raise ConfigError(f'num_relations={self.num_relations} must lie in [2, {len(self.relations)}]')
            object.__setattr__(self, 'relations', self.relations[:self.num_relations])
        if len(self.relations) < 2:
            raise ConfigError('generator spec needs at least two relation types')
        for fraction in (self.negative_fraction, self.hard_negative_fraction, self.rule_coverage):
            if not 0 <= fraction <= 1:
                raise ConfigError(f'fraction {fraction} outside [0, 1]')
        if min(self.train, self.dev, self.test) < 0:
            raise ConfigError('partition sizes must be non-negative')
        labels = [relation.label for relation in self.relations]
        if len(set(labels)) != len(labels):
            raise ConfigError('relation labels must be unique')
        for relation in self.relations:
            self._check_relation(relation)
        for template in self.distractors:
            self._check_template(template, 'distractor')

    def _check_relation(self, relation: RelationSpec) -> None:
        if not relation.templates:
            raise ConfigError(f'relation {relation.label} declares zero templates')
        if not relation.rule_triggers or not relation.triggers:
            raise ConfigError(f'relation {relation.label} needs rule_triggers and triggers')
        shared = ({t.form for t in relation.rule_triggers} & {t.form for t in relation.triggers}) | (
            {t.lemma for t in relation.rule_triggers} & {t.lemma for t in relation.triggers})
        if shared:
            raise ConfigError(f'relation {relation.label}: {sorted(shared)} are both rule and hidden triggers')
        for entity_type in (relation.subj_type, relation.obj_type):
            if not self.mentions.get(entity_type):
                raise ConfigError(f'no mentions for entity type {entity_type}')
        for template in relation.templates + relation.hard_negatives:
            self._check_template(template, relation.label)
            if TRIG_SLOT not in {item.slot for item in template}:
                raise ConfigError(f'relation {relation.label}: template without {{TRIG}}')

    def _check_template(self, template: tuple, owner: str) -> None:
        slots = [item.slot for item in template if item.slot]
        for slot in (SUBJ_SLOT, OBJ_SLOT):
            if slots.count(slot) != 1:
                raise ConfigError(f'{owner}: template needs exactly one {{{slot}}}')
        for slot in slots:
            if slot not in MENTION_SLOTS and slot != TRIG_SLOT and slot not in self.fillers:
                raise ConfigError(f'{owner}: unknown slot {{{slot}}}')
        check_tree(template, owner)


def check_tree(items: tuple, owner: str) -> None:
    roots = [i for i, item in enumerate(items) if item.head == 0]
    if len(roots) != 1:
        raise ConfigError(f'{owner}: template needs exactly one root, found {len(roots)}')
    for i, item in enumerate(items):
        if not 0 <= item.head <= len(items) or item.head == i + 1:
            raise ConfigError(f'{owner}: bad head {item.head} at position {i + 1}')
    for start in range(len(items)):
        seen, node = set(), start
        while items[node].head != 0:
            if node in seen:
                raise ConfigError(f'{owner}: template heads form a cycle')
            seen.add(node)
            node = items[node].head - 1


def parse_template(text: str, owner: str = 'template') -> tuple:
    """
    Функция разбирает шаблон предложения вида ``FORM/HEAD/DEPREL[/POS]``.
    Слоты записываются в фигурных скобках: ``{SUBJ}/3/nsubj``.

    :param text: Строка шаблона.
    :param owner: Имя владельца шаблона для сообщений об ошибках.
    :return: Кортеж элементов шаблона.
    """
    items = []
    for chunk in text.split():
        parts = chunk.rsplit('/', 3)
        if len(parts) == 4 and not parts[1].isdigit():
            parts = chunk.rsplit('/', 2)
        if len(parts) < 3 or not parts[1].isdigit():
            raise ConfigError(f'{owner}: cannot parse template token {chunk!r}')
        form, head, deprel = parts[0], int(parts[1]), parts[2]
        pos = parts[3] if len(parts) == 4 else 'X'
        slot = form[1:-1] if form.startswith('{') and form.endswith('}') and len(form) > 2 else None
        items.append(TemplateItem(form, head, deprel, pos, slot))
    return tuple(items)


def parse_trigger(text: str) -> Trigger:
    form, _, lemma = text.partition(':')
    return Trigger(form, lemma or form.lower())


class RelationSpecSchema(Schema):
    class Meta:
        unknown = RAISE

    label = fields.Str(required=True, validate=validate.Length(min=1))
    subj_type = fields.Str(required=True)
    obj_type = fields.Str(required=True)
    rule_triggers = fields.List(fields.Str(), load_default=list)
    triggers = fields.List(fields.Str(), load_default=list)
    templates = fields.List(fields.Str(), load_default=list)
    hard_negatives = fields.List(fields.Str(), load_default=list)

    @post_load
    def make_relation(self, data: dict, **kwargs) -> RelationSpec:
        label = data['label']
        return RelationSpec(
            label=label,
            subj_type=data['subj_type'],
            obj_type=data['obj_type'],
            rule_triggers=tuple(parse_trigger(t) for t in data['rule_triggers']),
            triggers=tuple(parse_trigger(t) for t in data['triggers']),
            templates=tuple(parse_template(t, label) for t in data['templates']),
            hard_negatives=tuple(parse_template(t, label) for t in data['hard_negatives']),
        )


class GeneratorSpecSchema(Schema):
    class Meta:
        unknown = RAISE

    relations = fields.List(fields.Nested(RelationSpecSchema), required=True)
    mentions = fields.Dict(keys=fields.Str(), values=fields.List(fields.Str()), required=True)
    distractors = fields.List(fields.Str(), load_default=list)
    fillers = fields.Dict(keys=fields.Str(), values=fields.List(fields.Str()), load_default=dict)
    train = fields.Int()
    dev = fields.Int()
    test = fields.Int()
    negative_fraction = fields.Float()
    hard_negative_fraction = fields.Float()
    rule_coverage = fields.Float()
    num_relations = fields.Int(allow_none=True)

    @post_load
    def make_spec(self, data: dict, **kwargs) -> GeneratorSpec:
        fillers = {}
        for name, phrases in data.get('fillers', {}).items():
            parsed = tuple(parse_template(p, f'filler {name}') for p in phrases)
            if not parsed:
                raise ConfigError(f'filler {name} has no phrases')
            for phrase in parsed:
                if any(item.slot for item in phrase):
                    raise ConfigError(f'filler {name} may not contain slots')
                check_tree(phrase, f'filler {name}')
            fillers[name] = parsed
        data['fillers'] = fillers
        data['relations'] = tuple(data['relations'])
        data['distractors'] = tuple(parse_template(t, 'distractor') for t in data.get('distractors', []))
        data['mentions'] = {key: tuple(value) for key, value in data['mentions'].items()}
        return GeneratorSpec(**data)
