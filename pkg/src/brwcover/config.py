"""Experiment configuration: one flat record, stored as ``key=value`` text."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import get_type_hints

COMMANDS = ("cover", "hit", "freeze", "census", "gw-diag", "pakes", "scales", "lower", "upper")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "cover"
    d: int = 3
    dist: str = ""  # empty means det:d
    seed: int = 0
    replicas: int = 1000
    threads: int = 1
    out: str = "out"
    r: tuple[int, ...] = (8,)
    k: int = 1
    L: int = 10
    gamma: tuple[float, ...] = (0.5, 1.0, 2.0)
    strict_exact: bool = False
    slack: int = 60
    block: int = 0  # replicas per RNG block; 0 picks a size from r and d only
    n0: int = 1
    k_band: int = 6
    M: float = 4.0
    delta: float = 0.1
    a: float = 0.1
    delta_upper: float = 1.0
    n: int = 1000
    mode: str = "1d"

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.d < 2:
            raise ConfigError("d must be at least 2")
        if self.replicas < 1 or self.threads < 1:
            raise ConfigError("replicas and threads must be positive")

    @property
    def dist_spec(self) -> str:
        return self.dist or f"det:{self.d}"

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        hints = get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"line {n}: unknown key {key!r}")
            values[key] = _parse(hints[key], val)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(tp, val: str):
    if tp is bool:
        low = val.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean {val!r}")
    if tp is int:
        return int(val)
    if tp is float:
        return float(val)
    if tp is str:
        return val
    args = getattr(tp, "__args__", ())
    if args:
        item = args[0]
        return tuple(_parse(item, x.strip()) for x in val.split(",") if x.strip())
    raise ConfigError(f"unsupported type {tp}")


def parse_value(name: str, val: str):
    """Parse a single command-line value with the type of config field ``name``."""
    return _parse(get_type_hints(ExperimentConfig)[name], val)
