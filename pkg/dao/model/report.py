from dataclasses import dataclass, field
from typing import Optional

from marshmallow import Schema, fields, post_load

BURN_IN = 'burn_in'
SSL = 'ssl'


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class LabelCounts:
    label: str
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    instances: int = 0
    per_label: tuple = ()
    name: str = ''


@dataclass(frozen=True)
class CoverageReport:
    positives: int
    covered_positives: int
    instances: int
    matched_instances: int

    @property
    def positive_coverage(self) -> float:
        return self.covered_positives / self.positives if self.positives else 0.0

    @property
    def match_rate(self) -> float:
        return self.matched_instances / self.instances if self.instances else 0.0


@dataclass(frozen=True)
class TrainLogRecord:
    epoch: int
    phase: str
    loss: float
    loss_nrc: float
    loss_ec: float
    loss_rc: float
    dev_f1: float
    mean_candidates: Optional[float] = None


@dataclass(frozen=True)
class RunManifest:
    command: str
    version: str
    wall_clock: float
    config_paths: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


class LabelCountsSchema(Schema):
    label = fields.Str(required=True)
    tp = fields.Int()
    fp = fields.Int()
    fn = fields.Int()

    @post_load
    def make_counts(self, data: dict, **kwargs) -> LabelCounts:
        return LabelCounts(**data)


class EvalReportSchema(Schema):
    name = fields.Str()
    precision = fields.Float(required=True)
    recall = fields.Float(required=True)
    f1 = fields.Float(required=True)
    tp = fields.Int()
    fp = fields.Int()
    fn = fields.Int()
    instances = fields.Int()
    per_label = fields.List(fields.Nested(LabelCountsSchema))

    @post_load
    def make_report(self, data: dict, **kwargs) -> EvalReport:
        data['per_label'] = tuple(data.get('per_label', ()))
        return EvalReport(**data)


class CoverageReportSchema(Schema):
    positives = fields.Int(required=True)
    covered_positives = fields.Int(required=True)
    instances = fields.Int(required=True)
    matched_instances = fields.Int(required=True)
    positive_coverage = fields.Float(dump_only=True)
    match_rate = fields.Float(dump_only=True)

    @post_load
    def make_report(self, data: dict, **kwargs) -> CoverageReport:
        return CoverageReport(**data)


class TrainLogRecordSchema(Schema):
    epoch = fields.Int(required=True)
    phase = fields.Str(required=True)
    loss = fields.Float(required=True)
    loss_nrc = fields.Float(required=True)
    loss_ec = fields.Float(required=True)
    loss_rc = fields.Float(required=True)
    dev_f1 = fields.Float(required=True)
    mean_candidates = fields.Float(allow_none=True, load_default=None)

    @post_load
    def make_record(self, data: dict, **kwargs) -> TrainLogRecord:
        return TrainLogRecord(**data)


class RunManifestSchema(Schema):
    command = fields.Str(required=True)
    version = fields.Str(required=True)
    wall_clock = fields.Float(required=True)
    config_paths = fields.Dict(keys=fields.Str(), values=fields.Str())
    seeds = fields.Dict(keys=fields.Str(), values=fields.Int())
    inputs = fields.Dict(keys=fields.Str(), values=fields.Raw())
    outputs = fields.Dict(keys=fields.Str(), values=fields.Str())

    @post_load
    def make_manifest(self, data: dict, **kwargs) -> RunManifest:
        return RunManifest(**data)
