"""Flat ``key=value`` run configuration with dotted keys.

Every key has a default, so an empty configuration runs the synthetic demo.
Precedence: defaults < config file < ``--set`` overrides < ``PROVGUARD_SEED``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .exceptions import ConfigError

SEED_ENV = "PROVGUARD_SEED"

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "data.path": "data",
    "data.format": "jsonl",
    "model.path": "model.json",
    "report.dir": "reports",
    "graph.window": 10**9,
    "graph.batch_size": 50,
    "graph.edge_kinds": "read,write,connect,send,recv,exec,load,fork,clone",
    "aug.kinds": "EA,NA,FA",
    "aug.gamma": 0.5,
    "aug.seed": -1,
    "encoder.lr": 0.001,
    "encoder.tau": 0.5,
    "encoder.epochs": 20,
    "encoder.batch_size": 50,
    "encoder.hidden": 128,
    "encoder.d": 64,
    "encoder.optimizer": "adam",
    "encoder.edge_features": True,
    "detector.k": 8,
    "detector.quantile": 0.995,
    "detector.val_fraction": 0.2,
    "detector.theta": 0.0,
    "detect.level": "auto",
    "detect.subset": "test",
    "gen.profile": "graph_level",
    "gen.benign": 100,
    "gen.malicious": 25,
    "gen.train_fraction": 0.6,
    "eval.attacks": "gspa,gfpa,cgpa",
    "eval.rates": "0.1,0.2,0.5",
    "eval.policy": "random",
}

_CHOICES = {
    "data.format": ("jsonl", "csv"),
    "encoder.optimizer": ("adam", "sgd"),
    "detect.level": ("auto", "graph", "node"),
    "detect.subset": ("train", "test", "all"),
    "gen.profile": ("graph_level", "node_level"),
    "eval.policy": ("random", "malicious_nodes"),
}


def _convert(key: str, raw) -> object:
    default = DEFAULTS[key]
    if not isinstance(raw, str):
        value = raw
    elif isinstance(default, bool):
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
        value = low in ("true", "1", "yes")
    elif isinstance(default, int):
        try:
            value = int(float(raw)) if "e" in raw.lower() else int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    elif isinstance(default, float):
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    else:
        value = raw.strip()
    return value


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def set(self, key: str, raw) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        self.values[key] = _convert(key, raw)

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def aug_seed(self) -> int:
        s = int(self.values["aug.seed"])
        return self.seed if s < 0 else s

    @property
    def aug_kinds(self) -> list[str]:
        return [k.strip().upper() for k in str(self.values["aug.kinds"]).split(",") if k.strip()]

    def validate(self) -> RunConfig:
        v = self.values
        for key, options in _CHOICES.items():
            if v[key] not in options:
                raise ConfigError(f"{key} must be one of {options}, got {v[key]!r}")
        if not 0 <= v["aug.gamma"] <= 1:
            raise ConfigError("aug.gamma must lie in [0, 1]")
        kinds = self.aug_kinds
        if not kinds or not set(kinds) <= {"EA", "NA", "FA"}:
            raise ConfigError(f"aug.kinds must be a non-empty subset of EA,NA,FA, got {v['aug.kinds']!r}")
        for key in ("encoder.lr", "encoder.tau", "graph.window"):
            if v[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        if v["graph.batch_size"] < 0:
            raise ConfigError("graph.batch_size must be non-negative (0 means one graph per log)")
        for key in ("encoder.hidden", "encoder.d", "detector.k"):
            if v[key] < 1:
                raise ConfigError(f"{key} must be at least 1")
        if v["encoder.batch_size"] < 2:
            raise ConfigError("encoder.batch_size must be at least 2")
        if v["encoder.epochs"] < 0:
            raise ConfigError("encoder.epochs must be non-negative")
        if not 0 < v["detector.quantile"] <= 1:
            raise ConfigError("detector.quantile must lie in (0, 1]")
        if not 0 <= v["detector.val_fraction"] < 1:
            raise ConfigError("detector.val_fraction must lie in [0, 1)")
        if v["detector.theta"] < 0:
            raise ConfigError("detector.theta must be non-negative (0 means calibrate)")
        if not 0 < v["gen.train_fraction"] < 1:
            raise ConfigError("gen.train_fraction must lie in (0, 1)")
        for key in ("gen.benign", "gen.malicious"):
            if v[key] < 0:
                raise ConfigError(f"{key} must be non-negative")
        kinds = self.edge_kinds
        if not kinds or len(set(kinds)) != len(kinds):
            raise ConfigError("graph.edge_kinds must be a non-empty list of distinct labels")
        unknown = [a for a in self.eval_attacks if a not in ("GSPA", "GFPA", "CGPA", "SPA", "FPA")]
        if unknown:
            raise ConfigError(f"eval.attacks has unknown attack(s) {unknown}")
        for r in self.eval_rates:
            if not 0 <= r <= 1:
                raise ConfigError(f"eval.rates entries must lie in [0, 1], got {r}")
        return self

    @property
    def eval_rates(self) -> list[float]:
        try:
            return [float(x) for x in str(self.values["eval.rates"]).split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"invalid eval.rates {self.values['eval.rates']!r}") from None

    @property
    def edge_kinds(self) -> tuple[str, ...]:
        return tuple(x.strip() for x in str(self.values["graph.edge_kinds"]).split(",") if x.strip())

    @property
    def eval_attacks(self) -> list[str]:
        return [x.strip().upper() for x in str(self.values["eval.attacks"]).split(",") if x.strip()]

    def dump(self) -> str:
        return "".join(f"{k}={self.values[k]}\n" for k in sorted(self.values))


def parse_lines(lines: Iterable[str]) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def load_config(
    path: str | os.PathLike | None = None,
    overrides: Iterable[str] = (),
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for k, v in parse_lines(text.splitlines()).items():
            cfg.set(k, v)
    for k, v in parse_lines(overrides).items():
        cfg.set(k, v)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        cfg.set("seed", env[SEED_ENV])
    return cfg.validate()
