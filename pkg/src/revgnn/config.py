"""Training configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import InputError


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 512
    seed: int = 0
    # dimensions; d_b + d_k is the fused width (164 + 768 = 932 by default)
    d_b: int = 164
    d_k: int = 768
    n_layers: int = 3
    n_clusters: int = 5
    mask_rate: float = 0.1
    n_negatives: int = 64
    target_every: int = 5
    history_len: int = 32
    eta: int = 36
    hidden1: int = 200
    hidden2: int = 80
    temperature: float = 1.0
    lr_stage1: float = 1e-3
    lr_stage2: float = 1e-4
    lr_decoder: float = 1e-3
    init_std: float = 0.1
    # ablation switches
    use_behavior: bool = True
    use_knowledge: bool = True
    use_stage2: bool = True
    loss_beh: bool = True
    loss_clus: bool = True
    loss_cl: bool = True
    loss_sup: bool = True
    negative_sampling: str = "pseudo"
    kmeans_init: bool = False
    warmup_epochs: int = 1
    early_stop: bool = True
    early_stop_window: int = 10
    early_stop_tol: float = 1e-5
    # wall-clock seconds in the training log; off gives byte-stable logs
    timing: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("lr_stage1", "lr_stage2", "lr_decoder"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")
        positive = ("batch_size", "n_layers", "n_clusters", "n_negatives", "target_every",
                    "eta", "hidden1", "hidden2", "d_b", "d_k")
        for name in positive:
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.epochs < 0 or self.history_len < 0 or self.warmup_epochs < 0:
            raise InputError("epochs, history_len and warmup_epochs must be >= 0")
        if not 0.0 <= self.mask_rate <= 1.0:
            raise InputError("mask_rate must lie in [0, 1]")
        if self.temperature <= 0:
            raise InputError("temperature must be > 0")
        if self.negative_sampling not in ("pseudo", "uniform"):
            raise InputError("negative_sampling must be 'pseudo' or 'uniform'")
        if not (self.use_behavior or self.use_knowledge):
            raise InputError("at least one of use_behavior / use_knowledge is required")

    @property
    def fused_dim(self) -> int:
        return self.d_b * self.use_behavior + self.d_k * self.use_knowledge

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> TrainConfig:
        return cls(**parse_assignments(text.splitlines(), source))

    @classmethod
    def load(cls, path) -> TrainConfig:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_text(text, str(path))

    def with_overrides(self, assignments) -> TrainConfig:
        current = dataclasses.asdict(self)
        current.update(parse_assignments(assignments, "<override>"))
        return TrainConfig(**current)


def _convert(name: str, kind, raw: str, where: str):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return lowered in ("true", "1", "yes")
        return kind(raw)
    except ValueError:
        raise InputError(f"{where}: bad value {raw!r} for {name}") from None


def parse_assignments(lines, source: str) -> dict:
    types = {f.name: type(f.default) for f in fields(TrainConfig)}
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        where = f"{source}:{lineno}"
        if not sep:
            raise InputError(f"{where}: expected 'key = value'")
        if key not in types:
            raise InputError(f"{where}: unknown config key {key!r}")
        out[key] = _convert(key, types[key], raw, where)
    return out
