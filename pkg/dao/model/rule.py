from dataclasses import dataclass
from typing import Iterator, Optional, Union

from marshmallow import RAISE, Schema, ValidationError, fields, validate, validates_schema

SURFACE = 'surface'
SYNTACTIC = 'syntactic'

MANUAL = 'manual'
GEN_TRAIN = 'gen_train'
GEN_TEST = 'gen_test'
PROVENANCES = (MANUAL, GEN_TRAIN, GEN_TEST)

LITERAL = 'literal'
SUBJ = 'subj'
OBJ = 'obj'
GAP = 'gap'

WORD = 'word'
LEMMA = 'lemma'


@dataclass(frozen=True)
class PatternElement:
    kind: str
    value: str = ''


@dataclass(frozen=True)
class SurfaceRule:
    id: str
    label: str
    pattern: tuple
    provenance: str = MANUAL

    @property
    def signature(self) -> tuple:
        return SURFACE, self.label, self.pattern


@dataclass(frozen=True)
class TriggerConstraint:
    field: str
    alternatives: tuple


@dataclass(frozen=True)
class Argument:
    entity_type: str
    path: tuple


@dataclass(frozen=True)
class SyntacticRule:
    id: str
    label: str
    trigger: TriggerConstraint
    subject: Argument
    object: Argument
    provenance: str = MANUAL

    @property
    def signature(self) -> tuple:
        return SYNTACTIC, self.label, self.trigger, self.subject, self.object


Rule = Union[SurfaceRule, SyntacticRule]


@dataclass(frozen=True)
class RuleSet:
    rules: tuple = ()

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def get(self, rule_id: str) -> Optional[Rule]:
        return next((rule for rule in self.rules if rule.id == rule_id), None)


@dataclass(frozen=True)
class RuleMatch:
    rule_id: str
    instance_id: str
    trigger_tokens: frozenset
    label: str


class RuleRecordSchema(Schema):
    class Meta:
        unknown = RAISE

    id = fields.Str(required=True)
    kind = fields.Str(required=True, validate=validate.OneOf([SURFACE, SYNTACTIC]))
    label = fields.Str(required=True, validate=validate.Length(min=1))
    pattern = fields.Str()
    trigger = fields.Str()
    subject = fields.Str()
    object = fields.Str()
    source = fields.Str(load_default=MANUAL, validate=validate.OneOf(PROVENANCES))

    @validates_schema
    def validate_kind_fields(self, data: dict, **kwargs) -> None:
        if data['kind'] == SURFACE:
            if not data.get('pattern'):
                raise ValidationError('surface rule needs a pattern', 'pattern')
            return
        if not data.get('trigger'):
            raise ValidationError('syntactic rule needs a trigger', 'trigger')
        missing = [key for key in ('subject', 'object') if not data.get(key)]
        if missing:
            raise ValidationError('syntactic rule needs both arguments', missing[0])
