from dataclasses import asdict, dataclass, field

from marshmallow import RAISE, Schema, fields, post_load, validate

from exceptions import ConfigError

TRAIN_GOLD = 'train_gold'
TEST_PREDICTED = 'test_predicted'

ABLATE_NRC = 'nrc'
ABLATE_EC = 'ec'


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    dropout: float = 0.1
    seed: int = 13
    lr: float = 3e-4
    weight_decay: float = 0.01
    batch_size: int = 32
    max_seq_len: int = 64
    warmup_fraction: float = 0.1
    max_grad_norm: float = 1.0

    def __post_init__(self):
        if self.d <= 0 or self.heads <= 0 or self.d % self.heads:
            raise ConfigError(f'd={self.d} must be a positive multiple of heads={self.heads}')
        if not 0 <= self.dropout < 1:
            raise ConfigError(f'dropout must lie in [0, 1), got {self.dropout}')
        if self.layers < 0 or self.ff_mult < 1 or self.batch_size < 1 or self.max_seq_len < 2:
            raise ConfigError('layers, ff_mult, batch_size and max_seq_len must be positive')
        if self.lr < 0 or self.weight_decay < 0 or not 0 <= self.warmup_fraction <= 1:
            raise ConfigError('lr, weight_decay and warmup_fraction are out of range')

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    t_up: float = 0.8
    t_low: float = 0.2
    burn_in_epochs: int = 5
    total_epochs: int = 20
    candidate_cap: int = 256
    nrc_threshold: float = 0.5
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not 0 < self.t_low < self.t_up < 1:
            raise ConfigError(f'thresholds must satisfy 0 < t_low < t_up < 1, got {self.t_low}/{self.t_up}')
        if self.candidate_cap < 1:
            raise ConfigError('candidate_cap must be at least 1')
        # равенство означает обучение только в период burn-in
        if not 0 <= self.burn_in_epochs <= self.total_epochs or self.total_epochs < 1:
            raise ConfigError('burn_in_epochs must not exceed total_epochs')
        if not 0 < self.nrc_threshold < 1:
            raise ConfigError('nrc_threshold must lie in (0, 1)')

    @property
    def burn_in_only(self) -> bool:
        return self.burn_in_epochs == self.total_epochs


@dataclass(frozen=True)
class GenConfig:
    source: str = TRAIN_GOLD
    skip_if_manual_match: bool = True
    dedupe: bool = True

    def __post_init__(self):
        if self.source not in (TRAIN_GOLD, TEST_PREDICTED):
            raise ConfigError(f'unknown rule generation source {self.source!r}')


class ModelConfigSchema(Schema):
    class Meta:
        unknown = RAISE

    d = fields.Int()
    layers = fields.Int()
    heads = fields.Int()
    ff_mult = fields.Int()
    dropout = fields.Float()
    seed = fields.Int()
    lr = fields.Float()
    weight_decay = fields.Float()
    batch_size = fields.Int()
    max_seq_len = fields.Int()
    warmup_fraction = fields.Float()
    max_grad_norm = fields.Float()

    @post_load
    def make_config(self, data: dict, **kwargs) -> ModelConfig:
        return ModelConfig(**data)


class TrainConfigSchema(Schema):
    class Meta:
        unknown = RAISE

    t_up = fields.Float()
    t_low = fields.Float()
    burn_in_epochs = fields.Int()
    total_epochs = fields.Int()
    candidate_cap = fields.Int()
    nrc_threshold = fields.Float()
    model = fields.Nested(ModelConfigSchema)

    @post_load
    def make_config(self, data: dict, **kwargs) -> TrainConfig:
        return TrainConfig(**data)


class GenConfigSchema(Schema):
    class Meta:
        unknown = RAISE

    source = fields.Str(validate=validate.OneOf([TRAIN_GOLD, TEST_PREDICTED]))
    skip_if_manual_match = fields.Bool()
    dedupe = fields.Bool()

    @post_load
    def make_config(self, data: dict, **kwargs) -> GenConfig:
        return GenConfig(**data)
