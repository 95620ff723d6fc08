"""Model and training configuration.

Config files are flat key=value text (one pair per line, '#' comments,
values parsed as bool/int/float/string). Keys are field names of
HiTConfig or TrainSchedule; unknown keys are rejected so typos surface
early.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .syntax.paths import HIERARCHY_MODES


@dataclass
class HiTConfig:
    """Architecture hyperparameters.

    hier_dim is deliberately narrow (32): the hierarchy pathway should
    add only a few percent over a plain sequence encoder. The fusion
    projection maps token_dim + hier_dim down to seq_model_dim, and
    feed-forward widths are ff_factor x the block width.
    """

    token_dim: int = 256
    hier_dim: int = 32
    seq_model_dim: int = 256
    heads: int = 8
    hier_layers: int = 2
    seq_layers: int = 6
    dec_layers: int = 2
    ff_factor: int = 2
    max_len: int = 512
    max_path_depth: int = 32
    hierarchy_mode: str = "full"
    dropout: float = 0.1
    num_categories: int = 2
    vocab_size: int = 8000
    target_vocab_size: int = 8000
    node_vocab_size: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in (
            "token_dim", "hier_dim", "seq_model_dim", "heads", "hier_layers",
            "seq_layers", "dec_layers", "ff_factor", "max_len",
            "num_categories", "vocab_size", "target_vocab_size",
            "node_vocab_size",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.seq_model_dim % self.heads:
            raise ValueError(
                f"seq_model_dim {self.seq_model_dim} not divisible by heads {self.heads}"
            )
        if self.hier_dim % self.heads:
            raise ValueError(
                f"hier_dim {self.hier_dim} not divisible by heads {self.heads}"
            )
        if self.hierarchy_mode not in HIERARCHY_MODES:
            raise ValueError(
                f"hierarchy_mode must be one of {HIERARCHY_MODES}, got {self.hierarchy_mode!r}"
            )
        if self.max_path_depth < 3:
            raise ValueError(f"max_path_depth must be >= 3, got {self.max_path_depth}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def hier_ff_dim(self) -> int:
        return self.ff_factor * self.hier_dim

    @property
    def seq_ff_dim(self) -> int:
        return self.ff_factor * self.seq_model_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "HiTConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown HiTConfig keys: {sorted(unknown)}")
        return cls(**values)

    def updated(self, **changes) -> "HiTConfig":
        return replace(self, **changes)


@dataclass
class TrainSchedule:
    """Optimization settings for fit()."""

    lr: float = 1e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    batch_size: int = 32
    epochs: int = 10
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainSchedule":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown TrainSchedule keys: {sorted(unknown)}")
        return cls(**values)


def _parse_value(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text.strip("\"'")


def parse_config_text(text: str) -> dict:
    """Parse flat key=value lines into a dict of typed values."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key in {raw!r}")
        out[key] = _parse_value(value.strip())
    return out


def load_config_file(path: str | Path) -> tuple[HiTConfig, TrainSchedule]:
    """Split a flat config file into model and schedule settings."""
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    model_keys = {f.name for f in fields(HiTConfig)}
    sched_keys = {f.name for f in fields(TrainSchedule)}
    unknown = set(values) - model_keys - sched_keys
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    config = HiTConfig.from_dict({k: v for k, v in values.items() if k in model_keys})
    schedule = TrainSchedule.from_dict({k: v for k, v in values.items() if k in sched_keys})
    return config, schedule
