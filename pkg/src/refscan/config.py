"""Run configuration: model dims, hierarchy/branch toggles, optimizer knobs."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass
class TrainConfig:
    # model dims (desk-scale defaults; production-scale dims are 768 -> 256)
    d: int = 32
    d_s: int = 16
    d_a: int = 16
    n: int = 16
    n_prompts: int = 6
    frames: int = 8
    num_classes: int = 10
    # scene-attribute intake
    conf_threshold: float = 0.7
    max_detections: int = 10
    # hierarchy toggles (holistic / keyword / scene-attribute query branches)
    use_holistic: bool = True
    use_keyword: bool = True
    use_attribute: bool = True
    # branch toggles
    use_temporal: bool = True
    use_spatial: bool = True
    # fusion variants
    use_mhs_ca: bool = True
    lambda_box: float = 1.0
    aux_branch_loss: bool = False
    # optimization
    learning_rate: float = 1e-4
    lr_decay: float = 0.9
    warmup_ratio: float = 0.1
    batch: int = 8
    steps: int = 2000
    seed: int = 0

    def validate(self) -> "TrainConfig":
        for name in ("d", "d_s", "d_a", "n", "frames", "num_classes", "batch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_prompts < 0:
            raise ConfigError(f"n_prompts must be >= 0, got {self.n_prompts}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if not (self.use_holistic or self.use_keyword or self.use_attribute):
            raise ConfigError("at least one hierarchy must stay enabled")
        if not (self.use_temporal or self.use_spatial):
            raise ConfigError("at least one branch must stay enabled")
        if not self.use_mhs_ca and self.d_s != self.d_a:
            raise ConfigError("disabling cross-attention fusion requires d_s == d_a")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if not (0.0 <= self.warmup_ratio < 1.0):
            raise ConfigError(f"warmup_ratio must be in [0, 1), got {self.warmup_ratio}")
        if not (0.0 <= self.conf_threshold <= 1.0):
            raise ConfigError(f"conf_threshold must be in [0, 1], got {self.conf_threshold}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()
