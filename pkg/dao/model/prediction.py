from dataclasses import dataclass
from typing import Optional

from marshmallow import Schema, fields, post_load

OURS = 'ours'
RULES = 'rules'


@dataclass(frozen=True)
class Prediction:
    id: str
    label: str
    rationale: tuple = ()
    nrc_score: Optional[float] = None
    method: str = OURS


@dataclass(frozen=True)
class HumanAnnotation:
    id: str
    annotator_a: frozenset
    annotator_b: frozenset


class PredictionSchema(Schema):
    id = fields.Str(required=True)
    label = fields.Str(required=True)
    rationale = fields.List(fields.Int(), load_default=list)
    nrc_score = fields.Float(allow_none=True, load_default=None)
    method = fields.Str(load_default=OURS)

    @post_load
    def make_prediction(self, data: dict, **kwargs) -> Prediction:
        data['rationale'] = tuple(data['rationale'])
        return Prediction(**data)


class HumanAnnotationSchema(Schema):
    id = fields.Str(required=True)
    annotator_a = fields.List(fields.Int(), required=True)
    annotator_b = fields.List(fields.Int(), required=True)

    @post_load
    def make_annotation(self, data: dict, **kwargs) -> HumanAnnotation:
        return HumanAnnotation(data['id'], frozenset(data['annotator_a']), frozenset(data['annotator_b']))
