"""Run configuration and its INI file format.

A config file is plain ``key = value`` lines under a ``[statesel]`` section;
keys are the field names of :class:`Config`. Unknown keys are rejected.
Example::

    [statesel]
    max_len = 5
    kl_coefficient = 1.0
    learning_rate = 0.02
    variants = full, manual, learned
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .core import StateselError

MAX_LEN_BY_DOMAIN = {"nethack": 10, "arrangement": 5}
SECTION = "statesel"


class ConfigError(StateselError):
    pass


@dataclass(frozen=True)
class Config:
    # value learning
    gamma: float = 1.0
    max_len: int = MAX_LEN_BY_DOMAIN["arrangement"]
    kl_coefficient: float = 1.0
    learning_rate: float = 0.02
    batch_size: int = 32
    epochs: int = 40
    trajectories_per_step: int = 32
    hash_bits: int = 16
    upsample: bool = True
    loss: str = "squared"
    rng_seed: int = 0
    # actor: "scripted" or "remote" (endpoint from $STATESEL_ACTOR_URL)
    actor: str = "scripted"
    actor_timeout: float = 30.0
    boost: float = 3.0
    penalty: float = 0.5
    # demonstrations and evaluation
    n_demos: int = 25
    demo_targets: tuple[int, ...] = (2, 3)
    eval_targets: tuple[int, ...] = (2, 3, 4)
    n_objects: tuple[int, ...] = (7, 8, 9)
    episodes: int = 50
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    variants: tuple[str, ...] = ("full", "manual", "random:5", "learned")
    budget: int = 10
    greedy: bool = False
    workers: int = 1
    vocabulary: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.gamma != 1.0:
            raise ConfigError(
                f"gamma={self.gamma}: Monte Carlo labels from a sparse terminal reward "
                "are only exact for gamma = 1"
            )
        if self.max_len < 1:
            raise ConfigError("max_len must be at least 1")
        if self.kl_coefficient < 0:
            raise ConfigError("kl_coefficient must be non-negative")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1 or self.trajectories_per_step < 1:
            raise ConfigError("batch_size, epochs and trajectories_per_step must be positive")
        if self.loss != "squared":
            raise ConfigError(f"unsupported loss {self.loss!r}; only 'squared' ships")
        if self.actor not in ("scripted", "remote"):
            raise ConfigError(f"unknown actor {self.actor!r}; use scripted or remote")
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @classmethod
    def for_domain(cls, domain: str, **overrides) -> Config:
        try:
            return cls(max_len=MAX_LEN_BY_DOMAIN[domain], **overrides)
        except KeyError:
            raise ConfigError(f"unknown domain {domain!r}") from None

    def replace(self, **changes) -> Config:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in fields(self) for v in [getattr(self, f.name)]}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _coerce(name: str, default: Any, raw: str) -> Any:
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_overrides(pairs: dict[str, str], base: Config | None = None) -> Config:
    base = base or Config()
    known = {f.name: getattr(base, f.name) for f in fields(base)}
    changes = {}
    for key, raw in pairs.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, known[key], raw)
    return base.replace(**changes)


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> Config:
    cfg = Config()
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not parser.has_section(SECTION):
            raise ConfigError(f"config {path} has no [{SECTION}] section")
        cfg = parse_overrides(dict(parser.items(SECTION)), cfg)
    if overrides:
        cfg = parse_overrides(overrides, cfg)
    return cfg
