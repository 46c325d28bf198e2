"""Scenario configuration: JSON in, JSON out.

Every field is optional; anything missing takes the stock value. A
simulation report (which embeds its config under ``"config"``) is accepted
as input, so a past run can be repeated from its own output.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .shape_model import DEFAULT_MARGIN, BetaParams, DosePriorSet
from .trial_sim import METHODS, DesignSpec, TrueScenario

ENV_VAR = "DDL_DEFAULT_CONFIG"
DEFAULT_TRUTH = (0.10, 0.20, 0.30)
_DOSE_KEYS = ("low", "mid", "high")


class ConfigError(ValueError):
    pass


def _priors_to_dict(priors: DosePriorSet) -> dict:
    return {k: [p.a, p.b] for k, p in zip(_DOSE_KEYS, priors)}


def _priors_from(value, what: str) -> DosePriorSet:
    if value == "uniform":
        return DosePriorSet.uniform()
    if value == "default":
        return DosePriorSet.default()
    if not isinstance(value, dict) or set(value) != set(_DOSE_KEYS):
        raise ConfigError(f"{what} must be 'default', 'uniform' or an object with keys low, mid, high")
    params = []
    for k in _DOSE_KEYS:
        ab = value[k]
        if isinstance(ab, dict):
            ab = (ab.get("a"), ab.get("b"))
        if not isinstance(ab, (list, tuple)) or len(ab) != 2:
            raise ConfigError(f"{what}.{k} must be [a, b]")
        params.append(BetaParams(float(ab[0]), float(ab[1])))
    return DosePriorSet(*params)


@dataclass(frozen=True)
class ScenarioConfig:
    priors: DosePriorSet = field(default_factory=DosePriorSet.default)
    pair_priors: DosePriorSet = field(default_factory=DosePriorSet.uniform)
    margin: float = DEFAULT_MARGIN
    truth: tuple = DEFAULT_TRUTH
    design: DesignSpec = field(default_factory=DesignSpec.three_arm)
    replicates: int = 10_000
    posterior_samples: int = 100_000
    seed: int = 0
    method: str = "importance"
    grid_cells: int = 200

    def __post_init__(self):
        if not 0.0 <= self.margin < 1.0:
            raise ConfigError("margin must lie in [0, 1)")
        if self.replicates < 1 or self.posterior_samples < 1:
            raise ConfigError("replicates and posterior_samples must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}")
        if self.grid_cells < 100:
            raise ConfigError("grid_cells must be at least 100")
        self.scenario()

    def scenario(self) -> TrueScenario:
        return TrueScenario(tuple(self.truth), margin=self.margin)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        return {
            "priors": _priors_to_dict(self.priors),
            "pair_priors": _priors_to_dict(self.pair_priors),
            "margin": self.margin,
            "truth": list(self.truth),
            "design": self.design.to_dict(),
            "replicates": self.replicates,
            "posterior_samples": self.posterior_samples,
            "seed": self.seed,
            "method": self.method,
            "grid_cells": self.grid_cells,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kw = {}
        try:
            if "priors" in data:
                kw["priors"] = _priors_from(data["priors"], "priors")
            if "pair_priors" in data:
                kw["pair_priors"] = _priors_from(data["pair_priors"], "pair_priors")
            if "design" in data:
                kw["design"] = DesignSpec.from_dict(data["design"])
            if "truth" in data:
                truth = data["truth"]
                if not isinstance(truth, (list, tuple)) or len(truth) != 3:
                    raise ConfigError("truth must be a list of three response rates")
                kw["truth"] = tuple(float(t) for t in truth)
            if "margin" in data:
                kw["margin"] = float(data["margin"])
            for key in ("replicates", "posterior_samples", "seed", "grid_cells"):
                if key in data:
                    value = data[key]
                    if isinstance(value, bool) or not isinstance(value, int):
                        raise ConfigError(f"{key} must be an integer")
                    kw[key] = value
            if "method" in data:
                kw["method"] = str(data["method"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.loads(text)


def resolve_config(path=None) -> ScenarioConfig:
    """Explicit path first, then the environment variable, then stock values."""
    path = path or os.environ.get(ENV_VAR)
    return ScenarioConfig.load(path) if path else ScenarioConfig()
