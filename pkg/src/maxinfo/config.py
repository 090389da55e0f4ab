"""Experiment configuration: a YAML file merged with command-line overrides."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .hilbert import DEGENERACY_TOL
from .histories import CONSISTENCY_TOL, P_MIN
from .selection import TIE_TOL
from .spinmodel import GENERICITY_TOL, SpinModelConfig

MAX_N = 64
# Vectors within this of unit norm are renormalized (with a warning past 1e-9);
# anything further off is treated as a typo.
RENORM_SILENT = 1e-9
RENORM_LIMIT = 1e-3


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    n: int
    v: list[float] | None = None
    u: list[list[float]] | None = None
    seed: int = 0


@dataclass
class Tolerances:
    consistency_tol: float = 1e-9
    genericity_tol: float = GENERICITY_TOL
    degeneracy_tol: float = DEGENERACY_TOL
    p_min: float = P_MIN
    tie_tol: float = TIE_TOL


@dataclass
class RunSection:
    seed: int = 0
    samples: int = 100_000
    grid: int = 25
    times: list[float] = field(default_factory=list)
    t: float = 0.0
    max_times: int | None = None
    workers: int | None = None
    output: str | None = None
    format: str = "csv"


@dataclass
class ExperimentConfig:
    model: ModelSection
    tolerances: Tolerances = field(default_factory=Tolerances)
    run: RunSection = field(default_factory=RunSection)

    def spin_config(self) -> SpinModelConfig:
        m = self.model
        if m.v is None or m.u is None:
            return SpinModelConfig.random(m.n, np.random.default_rng([m.seed, 0]))
        return SpinModelConfig(np.asarray(m.v), tuple(np.asarray(x) for x in m.u))

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _unit(vec, name: str) -> np.ndarray:
    x = np.asarray(vec, dtype=float)
    if x.shape != (3,):
        raise ConfigError(f"{name} must have 3 components, got {list(np.ravel(x))}")
    norm = float(np.linalg.norm(x))
    dev = abs(norm - 1.0)
    if dev > RENORM_LIMIT:
        raise ConfigError(f"{name} has norm {norm:.6g}, expected a unit vector")
    if dev > RENORM_SILENT:
        warnings.warn(f"{name} renormalized from norm {norm!r}")
    return x / norm


def _section(cls, data: dict | None, name: str):
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
    return cls(**data)


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Load ``path`` (YAML) and apply ``overrides`` given as ``{"section.key": value}``.

    A flat top-level ``n``/``seed`` is accepted as shorthand for the model
    section.
    """
    raw: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    model = raw.setdefault("model", {})
    for key in ("n", "v", "u"):
        if key in raw:
            model[key] = raw.pop(key)
    if "seed" in raw:
        seed = raw.pop("seed")
        model.setdefault("seed", seed)
        raw.setdefault("run", {}).setdefault("seed", seed)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        sec, key = dotted.split(".")
        raw.setdefault(sec, {})[key] = value
    extra = set(raw) - {"model", "tolerances", "run"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")

    if "n" not in model and model.get("u") is not None:
        model["n"] = len(model["u"])
    if "n" not in model:
        raise ConfigError("model.n is required")
    cfg = ExperimentConfig(
        model=_section(ModelSection, model, "model"),
        tolerances=_section(Tolerances, raw.get("tolerances"), "tolerances"),
        run=_section(RunSection, raw.get("run"), "run"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    m = cfg.model
    if not isinstance(m.n, int) or not 1 <= m.n <= MAX_N:
        raise ConfigError(f"n={m.n!r} out of range 1..{MAX_N}")
    if (m.v is None) != (m.u is None):
        raise ConfigError("give both v and u, or neither")
    if m.u is not None:
        if len(m.u) != m.n:
            raise ConfigError(f"n={m.n} but {len(m.u)} u vectors given")
        m.v = _unit(m.v, "v").tolist()
        m.u = [_unit(x, f"u[{i + 1}]").tolist() for i, x in enumerate(m.u)]
    for name, value in dataclasses.asdict(cfg.tolerances).items():
        if not value > 0:
            raise ConfigError(f"tolerance {name} must be positive, got {value!r}")
    if cfg.run.format not in ("csv", "jsonl"):
        raise ConfigError(f"unknown output format {cfg.run.format!r}")
    if cfg.run.samples < 1 or cfg.run.grid < 2:
        raise ConfigError("run.samples must be >= 1 and run.grid >= 2")
