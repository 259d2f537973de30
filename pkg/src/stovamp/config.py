"""Flat ``key = value`` experiment configuration.

Every key may be overridden on the command line as ``--key value``.
Unknown keys are errors, so a typo never silently falls back to a default.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional

from .core import ConfigError
from .experiment import haar_block_rows
from .solver import BLOCK_ORDERS, NEGATIVE_PRECISION, SCHEDULES

EXPERIMENTS = ("haar", "cdp", "custom")
SOLVERS = ("stochastic", "vamp")

# keys that say where results go rather than what is computed; left out of the echo
NON_ECHO = ("output_dir", "figures")


@dataclass
class ExperimentConfig:
    experiment: str = "haar"
    n: int = 512
    alpha: float = 2.4
    height: int = 64
    width: int = 64
    image: str = ""
    L: int = 2
    snr_db: float = 30.0
    prior_variance: float = 1.0
    solver: str = "stochastic"
    rho: float = 0.97
    iterations: int = 200
    schedule: str = "sequential"
    block_order: str = "fixed"
    tau_init: str = "inverse_energy"
    negative_precision: str = "reflect"
    early_stop: float = 0.0
    seed: int = 0
    target_db: float = -25.0
    wall_clock: bool = False
    figures: bool = True
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        def choice(name, options):
            if getattr(self, name) not in options:
                raise ConfigError(f"{name} must be one of {options}, got {getattr(self, name)!r}")

        choice("experiment", EXPERIMENTS)
        choice("solver", SOLVERS)
        choice("schedule", SCHEDULES)
        choice("block_order", BLOCK_ORDERS)
        choice("negative_precision", NEGATIVE_PRECISION)
        for name in ("L", "iterations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if not 0 < self.rho <= 1:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")
        if not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        if not self.prior_variance > 0 or self.early_stop < 0:
            raise ConfigError("prior_variance must be > 0 and early_stop >= 0")
        if self.tau_init != "inverse_energy":
            try:
                ok = float(self.tau_init) > 0
            except ValueError:
                ok = False
            if not ok:
                raise ConfigError(f"tau_init must be 'inverse_energy' or a positive number, got {self.tau_init!r}")
        if self.experiment == "haar":
            haar_block_rows(self.n, self.alpha, self.L)
        elif self.experiment == "cdp":
            if not self.image:
                raise ConfigError("experiment = cdp needs an image path")
        elif self.height < 1 or self.width < 1:
            raise ConfigError("height and width must be >= 1")

    def echo(self) -> dict[str, str]:
        """Every computation-relevant key, in declaration order."""
        return {f.name: _render(getattr(self, f.name)) for f in fields(self) if f.name not in NON_ECHO}

    def solver_tau_init(self):
        return self.tau_init if self.tau_init == "inverse_energy" else float(self.tau_init)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None
    return raw


_TYPES = {"str": str, "int": int, "float": float, "bool": bool}


def field_types() -> dict[str, type]:
    return {f.name: _TYPES[f.type] if isinstance(f.type, str) else f.type for f in fields(ExperimentConfig)}


def parse_pairs(pairs: Iterable[tuple[str, str]], source: str = "config") -> dict:
    types = field_types()
    out = {}
    for key, value in pairs:
        if key not in types:
            raise ConfigError(f"{source}: unknown key {key!r}")
        out[key] = _convert(key, types[key], value)
    return out


def parse_text(text: str, source: str = "config") -> dict:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        pairs.append((key.strip(), value))
    return parse_pairs(pairs, source)


def parse_overrides(args: list[str]) -> dict:
    """``['--key', 'value', '--other=value']`` to a typed dict."""
    pairs, i = [], 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument {arg!r}; overrides look like --key value")
        key, sep, value = arg[2:].partition("=")
        if not sep:
            if i + 1 >= len(args):
                raise ConfigError(f"missing value for --{key}")
            i += 1
            value = args[i]
        pairs.append((key.replace("-", "_"), value))
        i += 1
    return parse_pairs(pairs, "command line")


def load_config(path: Optional[str], overrides: Optional[list[str]] = None) -> ExperimentConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_text(text, str(path)))
    values.update(parse_overrides(overrides or []))
    return ExperimentConfig(**values)
