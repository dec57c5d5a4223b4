from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from marshmallow import EXCLUDE, Schema, ValidationError, fields, post_load, validates_schema

from constants import NO_RELATION, RESERVED_TOKENS, ROOT, UNK_ID

RULE = 'rule'
LATENT = 'latent'
PREDICTED = 'predicted'


@dataclass(frozen=True)
class Token:
    form: str
    lemma: str
    pos: str
    ner: str
    head: int
    deprel: str


@dataclass(frozen=True)
class RelationInstance:
    id: str
    tokens: tuple
    subj_span: tuple
    obj_span: tuple
    subj_type: str
    obj_type: str
    gold_relation: str = NO_RELATION

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def subj_indices(self) -> range:
        return range(self.subj_span[0], self.subj_span[1] + 1)

    @property
    def obj_indices(self) -> range:
        return range(self.obj_span[0], self.obj_span[1] + 1)

    @cached_property
    def entity_indices(self) -> frozenset:
        return frozenset(self.subj_indices) | frozenset(self.obj_indices)

    @property
    def forms(self) -> tuple:
        return tuple(token.form for token in self.tokens)

    @property
    def is_positive(self) -> bool:
        return self.gold_relation != NO_RELATION

    def context_indices(self) -> list:
        return [i for i in range(len(self.tokens)) if i not in self.entity_indices]


@dataclass(frozen=True)
class Vocabulary:
    symbols: tuple = ()

    @cached_property
    def _index(self) -> dict:
        index = {symbol: i for i, symbol in enumerate(RESERVED_TOKENS)}
        index.update({symbol: i + len(RESERVED_TOKENS) for i, symbol in enumerate(self.symbols)})
        return index

    def __len__(self) -> int:
        return len(RESERVED_TOKENS) + len(self.symbols)

    def index(self, symbol: str) -> int:
        return self._index.get(symbol, UNK_ID)

    def symbol(self, idx: int) -> str:
        if idx < len(RESERVED_TOKENS):
            return RESERVED_TOKENS[idx]
        return self.symbols[idx - len(RESERVED_TOKENS)]


@dataclass(frozen=True)
class MaskedSequence:
    ids: tuple
    token_map: tuple

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Corpus:
    train: tuple = ()
    dev: tuple = ()
    test: tuple = ()
    relation_vocab: tuple = ()
    token_vocab: Vocabulary = Vocabulary()

    def split(self, name: str) -> tuple:
        return getattr(self, name)

    def instances(self) -> Iterable[RelationInstance]:
        yield from self.train
        yield from self.dev
        yield from self.test


@dataclass(frozen=True)
class PathStep:
    direction: str
    deprel: str
    optional: bool = False


@dataclass(frozen=True)
class ExplanationLabels:
    bits: tuple
    source: str = PREDICTED

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def indices(self) -> frozenset:
        # позиция 0 зарезервирована под [CLS]
        return frozenset(i - 1 for i, bit in enumerate(self.bits) if bit and i > 0)

    @classmethod
    def from_indices(cls, indices: Iterable[int], length: int, source: str = PREDICTED,
                     excluded: Optional[frozenset] = None) -> 'ExplanationLabels':
        excluded = excluded or frozenset()
        bits = [0] * (length + 1)
        for i in indices:
            if i not in excluded:
                bits[i + 1] = 1
        return cls(tuple(bits), source)


class RelationRecordSchema(Schema):
    class Meta:
        unknown = EXCLUDE

    id = fields.Str(required=True)
    token = fields.List(fields.Str(), required=True)
    subj_start = fields.Int(required=True)
    subj_end = fields.Int(required=True)
    obj_start = fields.Int(required=True)
    obj_end = fields.Int(required=True)
    subj_type = fields.Str(required=True)
    obj_type = fields.Str(required=True)
    stanford_pos = fields.List(fields.Str(), required=True)
    stanford_ner = fields.List(fields.Str(), required=True)
    stanford_head = fields.List(fields.Int(), required=True)
    stanford_deprel = fields.List(fields.Str(), required=True)
    stanford_lemma = fields.List(fields.Str(), load_default=None)
    relation = fields.Str(required=True)

    @validates_schema
    def validate_lengths(self, data: dict, **kwargs) -> None:
        expected = len(data['token'])
        for key in ('stanford_pos', 'stanford_ner', 'stanford_head', 'stanford_deprel', 'stanford_lemma'):
            values = data.get(key)
            if values is not None and len(values) != expected:
                raise ValidationError(f'expected {expected} values, got {len(values)}', key)

    @post_load
    def make_instance(self, data: dict, **kwargs) -> RelationInstance:
        lemmas = data.get('stanford_lemma') or [form.lower() for form in data['token']]
        tokens = tuple(
            Token(form=form, lemma=lemma, pos=pos, ner=ner, head=ROOT if head == 0 else head - 1, deprel=deprel)
            for form, lemma, pos, ner, head, deprel in zip(
                data['token'], lemmas, data['stanford_pos'], data['stanford_ner'],
                data['stanford_head'], data['stanford_deprel'])
        )
        return RelationInstance(
            id=data['id'],
            tokens=tokens,
            subj_span=(data['subj_start'], data['subj_end']),
            obj_span=(data['obj_start'], data['obj_end']),
            subj_type=data['subj_type'],
            obj_type=data['obj_type'],
            gold_relation=data['relation'],
        )


def instance_to_record(instance: RelationInstance) -> dict:
    return {
        'id': instance.id,
        'token': [t.form for t in instance.tokens],
        'subj_start': instance.subj_span[0],
        'subj_end': instance.subj_span[1],
        'obj_start': instance.obj_span[0],
        'obj_end': instance.obj_span[1],
        'subj_type': instance.subj_type,
        'obj_type': instance.obj_type,
        'stanford_pos': [t.pos for t in instance.tokens],
        'stanford_ner': [t.ner for t in instance.tokens],
        'stanford_head': [0 if t.head == ROOT else t.head + 1 for t in instance.tokens],
        'stanford_deprel': [t.deprel for t in instance.tokens],
        'stanford_lemma': [t.lemma for t in instance.tokens],
        'relation': instance.gold_relation,
    }
