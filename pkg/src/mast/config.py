"""Run configuration: flat TOML file plus command-line overrides."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import ModelConfig


class ConfigError(ValueError):
    pass


# fields that say where things go, not what is computed; left out of the hash
_UNHASHED = ("out",)


@dataclass(frozen=True)
class RunConfig:
    # model
    resolution: int = 64
    dims: tuple[int, ...] = (16, 32, 64)
    depths: tuple[int, ...] = (1, 1, 1)
    channels: int = 32
    patch: int = 4
    lam: float = 0.7
    mutual: str = "literal"
    decoder_width: int = 32
    siamese: bool = True
    mixture_attention: bool = True
    # data
    delta: int = 2
    data_root: str = ""
    eval_root: str = ""
    n_clips: int = 40
    n_eval_clips: int = 10
    n_frames: int = 30
    difficulty: str = "easy"
    augment: bool = False
    # optimisation
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_period: int = 10
    epochs: int = 30
    batch_size: int = 8
    weight_window: int = 7
    stop_dice: float = 0.0
    # bookkeeping
    seed: int = 0
    out: str = "runs/default"

    def validate(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must lie in [0, 1], got {self.lam}")
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")
        if self.n_frames <= self.delta:
            raise ConfigError(f"n_frames={self.n_frames} leaves no pairs at delta={self.delta}")
        for name in ("epochs", "batch_size", "lr_period", "n_clips", "n_eval_clips", "channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if len(self.dims) != 3 or len(self.depths) != 3:
            raise ConfigError("dims and depths need three entries each")
        if self.mutual not in ("literal", "transposed"):
            raise ConfigError(f"mutual must be 'literal' or 'transposed', got {self.mutual!r}")
        if self.difficulty not in ("easy", "hard"):
            raise ConfigError(f"difficulty must be 'easy' or 'hard', got {self.difficulty!r}")
        for name in ("data_root", "eval_root"):
            path = getattr(self, name)
            if path and not Path(path).is_dir():
                raise ConfigError(f"{name} {path!r} is not a directory")
        try:
            self.model_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def model_config(self) -> ModelConfig:
        return ModelConfig(resolution=self.resolution, dims=tuple(self.dims), depths=tuple(self.depths),
                           channels=self.channels, patch=self.patch, lam=self.lam, mutual=self.mutual,
                           decoder_width=self.decoder_width, siamese=self.siamese,
                           mixture_attention=self.mixture_attention)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["depths"] = list(self.depths)
        return d

    def canonical(self) -> str:
        d = {k: v for k, v in self.as_dict().items() if k not in _UNHASHED}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def to_toml(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            if isinstance(v, bool):
                lines.append(f"{k} = {'true' if v else 'false'}")
            elif isinstance(v, str):
                lines.append(f"{k} = {json.dumps(v)}")
            elif isinstance(v, list):
                lines.append(f"{k} = [{', '.join(str(x) for x in v)}]")
            else:
                lines.append(f"{k} = {v!r}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    kind = _TYPES[name]
    if kind.startswith("tuple"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list, got {value!r}")
        return tuple(int(v) for v in value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string, got {value!r}")
    return value


def from_mapping(data: dict, base: RunConfig | None = None) -> RunConfig:
    unknown = sorted(set(data) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return replace(base or RunConfig(), **{k: _coerce(k, v) for k, v in data.items()})


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: config is flat; found tables {nested}")
    return from_mapping(data)


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply overrides whose value is not ``None``."""
    return from_mapping({k: v for k, v in overrides.items() if v is not None}, cfg)
