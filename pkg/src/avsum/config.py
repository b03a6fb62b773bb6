"""Run configuration: one JSON document with ``data``, ``cer``,
``summarizer`` and ``eval`` sections plus a global ``seed`` and ``out``.

Unknown keys are rejected at every level. Commands write the fully
resolved document (defaults filled in, CLI overrides applied, paths made
absolute) as ``<command>.config.json`` next to their outputs; passing that file back
with ``--config`` reproduces the run.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from avsum.errors import ValidationError

SEED_ENV = "AVSUM_SEED"


@dataclass
class SynthSection:
    n_videos: int = 20
    n_frames: int = 320
    dim: int = 64
    smoothness: float = 8.0
    key_density: float = 0.15
    sep: float = 2.0
    affect_sep: float | None = None
    face_corr: float = 0.5
    face_fraction: float = 0.5
    key_affect_boost: float = 0.0
    n_groups: int = 5
    shot_min: int = 8
    shot_max: int = 24
    n_raters: int = 3
    basis_seed: int = 0


@dataclass
class DataSection:
    manifest: str | None = None
    affect_dir: str | None = None
    n_frames: int = 320             # summarizer input length after uniform sampling
    sampling: str = "endpoint"
    folds: str = "logo"
    ratios: list[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    test_size: int | None = None
    synth: SynthSection = field(default_factory=SynthSection)


@dataclass
class CerSection:
    attribute: str = "activation"
    lr: float = 1e-4
    batch_size: int = 256
    epochs: int = 30
    ratios: list[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    split_seed: int = 0
    delta: int = 10
    filters: int = 10
    kernel: int = 3
    hidden: int = 10


@dataclass
class SummarizerSection:
    variant: str = "avsum-gru"
    criterion: str = "MaxF1"
    epochs: int = 50
    batch_size: int = 5
    lr: float = 1e-3
    jobs: int = 1
    enc_channels: list[int] = field(default_factory=lambda: [128, 256, 512, 512])
    bottleneck: int = 512
    dec_channels: int = 64
    heads: int = 4
    attn_scale: str | float = "temporal"
    residual: bool = True
    sa_dim: int = 16
    encoder_skip: bool = False


@dataclass
class EvalSection:
    runs: list[str] = field(default_factory=list)
    baseline: str | None = None
    top_l: int = 15
    criteria: list[str] = field(default_factory=lambda: ["MaxF1", "MaxR"])
    plots: bool = True
    kld_bins: int = 32


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "out"
    data: DataSection = field(default_factory=DataSection)
    cer: CerSection = field(default_factory=CerSection)
    summarizer: SummarizerSection = field(default_factory=SummarizerSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _build(cls, obj: Any, where: str):
    if not isinstance(obj, dict):
        raise ValidationError(f"config section {where or '<root>'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(obj) - set(known))
    if unknown:
        raise ValidationError(f"unknown config key(s) in {where or '<root>'}: {', '.join(unknown)}")
    kw = {}
    for name, value in obj.items():
        default = known[name].default_factory() if known[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kw[name] = _build(type(default), value, f"{where}.{name}".lstrip("."))
        else:
            kw[name] = value
    return cls(**kw)


def config_from_dict(obj: dict[str, Any]) -> RunConfig:
    return _build(RunConfig, obj, "")


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None
    return config_from_dict(obj)


def apply_seed_env(cfg: RunConfig) -> RunConfig:
    """``AVSUM_SEED`` overrides the configured seed."""
    raw = os.environ.get(SEED_ENV)
    if raw is not None and raw.strip():
        try:
            cfg.seed = int(raw)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
    return cfg


def absolutize(cfg: RunConfig) -> RunConfig:
    """Make every path in the config absolute (relative to the working directory)."""
    def ab(p):
        return None if p is None else str(Path(p).resolve())
    cfg.out = ab(cfg.out)
    cfg.data.manifest = ab(cfg.data.manifest)
    cfg.data.affect_dir = ab(cfg.data.affect_dir)
    cfg.eval.runs = [ab(r) for r in cfg.eval.runs]
    cfg.eval.baseline = ab(cfg.eval.baseline)
    return cfg


def write_resolved(cfg: RunConfig, directory: str | os.PathLike, name: str = "config.json") -> Path:
    path = Path(directory) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.to_json() + "\n", encoding="utf-8")
    return path
