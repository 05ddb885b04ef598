"""Experiment configuration and its flat dotted-key text format.

One ``key = value`` per line, ``#`` starts a comment, keys are the dotted
field paths of :class:`ExperimentConfig` (``evolution.coupling.g``). Tuples
are comma separated; ``none`` clears an optional tuple.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .collapse import MonitorSpec
from .dynamics import CouplingSpec, EvolutionSpec, PotentialSpec
from .errors import CollapsimError, ConfigError
from .hilbert import FockRegister, GridSpec
from .mzi import MziConfig

DEFAULT_SEED = 42


@dataclass(frozen=True)
class PacketSpec:
    """Incident beam profile on the slit plane."""

    x0: float = 0.0
    sigma: float = 2.0
    k0: float = 5.0


@dataclass(frozen=True)
class DefectSpec:
    """Pair of packets straddling the coupling window for the nonlinearity demo."""

    offset: float = 1.0
    sigma: float = 0.5
    g: float = 0.5
    field_amp: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    packet: PacketSpec = field(default_factory=PacketSpec)
    fock: FockRegister = field(default_factory=FockRegister)
    evolution: EvolutionSpec = field(
        default_factory=lambda: EvolutionSpec(
            dt=0.001,
            n_steps=2000,
            potential=PotentialSpec(),
            coupling=CouplingSpec(g=2.0, window_center=2.0, window_width=6.0, omega=1.0),
        )
    )
    monitor: MonitorSpec = field(default_factory=MonitorSpec)
    flight_time: float = 3.0
    boundary_tol: float = 2e-3
    n_trajectories: int = 10_000
    master_seed: int = DEFAULT_SEED
    screen_window: tuple = (-20.0, 20.0)
    histogram_bins: int = 80
    n_permutations: int = 10_000
    defect: DefectSpec = field(default_factory=DefectSpec)
    mzi: MziConfig = field(default_factory=MziConfig)
    mzi_shots: int = 0

    def __post_init__(self):
        object.__setattr__(self, "screen_window", tuple(float(v) for v in self.screen_window))
        if self.n_trajectories < 1:
            raise ConfigError("must be >= 1", key="n_trajectories")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", key="master_seed")
        if len(self.screen_window) != 2 or self.screen_window[0] >= self.screen_window[1]:
            raise ConfigError("needs two increasing values", key="screen_window")
        if self.histogram_bins < 1:
            raise ConfigError("must be >= 1", key="histogram_bins")
        if self.n_permutations < 1:
            raise ConfigError("must be >= 1", key="n_permutations")
        if self.flight_time < 0:
            raise ConfigError("must be non-negative", key="flight_time")
        if not self.boundary_tol > 0:
            raise ConfigError("must be positive", key="boundary_tol")
        if self.mzi_shots < 0:
            raise ConfigError("must be non-negative", key="mzi_shots")
        # checks that need several sections at once
        checks = (
            ("evolution.dt", lambda: self.evolution.check_stability(self.grid)),
            ("packet.x0", self._check_packet),
            ("evolution.coupling.window_center", self._check_window),
            ("evolution.potential.barrier_width", self._check_barrier),
        )
        for key, check in checks:
            try:
                check()
            except ConfigError:
                raise
            except CollapsimError as exc:
                raise ConfigError(str(exc), key=key) from exc

    def _check_packet(self):
        from .hilbert import gaussian_packet

        gaussian_packet(self.grid, self.packet.x0, self.packet.sigma, self.packet.k0)

    def _check_window(self):
        from .dynamics import coupling_window

        coupling_window(self.evolution.coupling, self.grid)

    def _check_barrier(self):
        p = self.evolution.potential
        if p.barrier_center - p.barrier_width / 2 < self.grid.x_min or (
            p.barrier_center + p.barrier_width / 2 > self.grid.x_max
        ):
            raise ConfigError("barrier extends past the grid", key="evolution.potential.barrier_width")


# --- flat key/value format ----------------------------------------------------


def _leaf_types(cls, prefix="") -> dict:
    out = {}
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        tp = hints[f.name]
        key = prefix + f.name
        if dataclasses.is_dataclass(tp):
            out.update(_leaf_types(tp, key + "."))
        else:
            out[key] = tp
    return out


LEAF_TYPES = _leaf_types(ExperimentConfig)


def _is_optional(tp) -> bool:
    return isinstance(tp, types.UnionType) and type(None) in tp.__args__


def _parse_value(raw: str, tp):
    text = raw.strip()
    if _is_optional(tp):
        if text.lower() == "none":
            return None
        (tp,) = [a for a in tp.__args__ if a is not type(None)]
    if tp is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if tp is int:
        return int(text.replace("_", ""))
    if tp is float:
        return float(text)
    if tp is tuple:
        return tuple(float(v) for v in text.split(",") if v.strip())
    raise TypeError(f"unsupported config type {tp!r}")


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _parse_lines(text: str, source: str) -> list:
    """``[(key, value, location)]`` in file order."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value' in {source}", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        entries.append((key, value, lineno))
    return entries


def _build(cls, values: dict, prefix: str = ""):
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        tp = typing.get_type_hints(cls)[f.name]
        if dataclasses.is_dataclass(tp):
            kwargs[f.name] = _build(tp, values, key + ".")
        elif key in values:
            kwargs[f.name] = values[key]
    return cls(**kwargs)


def _with_defaults(values: dict) -> dict:
    """Fill every leaf of ``values`` from the default config."""
    full = flatten(ExperimentConfig())
    full.update(values)
    return full


def _blame(entries: list, parsed: dict):
    """Locate the entry responsible for an invariant violation.

    Entries are applied one at a time on top of the defaults; the first one
    that breaks construction is blamed.
    """
    applied = {}
    for key, _, loc in entries:
        applied[key] = parsed[key]
        try:
            _build(ExperimentConfig, _with_defaults(applied))
        except (CollapsimError, ValueError) as exc:
            return key, loc, exc
    return None


def flatten(config: ExperimentConfig) -> dict:
    out = {}

    def walk(obj, prefix):
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if dataclasses.is_dataclass(v):
                walk(v, prefix + f.name + ".")
            else:
                out[prefix + f.name] = v

    walk(config, "")
    return out


def config_from_entries(entries: list) -> ExperimentConfig:
    """Build a config from ``(key, raw_value, location)`` triples; later entries win."""
    parsed = {}
    for key, raw, loc in entries:
        if key not in LEAF_TYPES:
            raise ConfigError("unknown key", key=key, line=loc)
        try:
            parsed[key] = _parse_value(raw, LEAF_TYPES[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"type mismatch: {exc}", key=key, line=loc) from exc
    try:
        return _build(ExperimentConfig, _with_defaults(parsed))
    except (CollapsimError, ValueError) as exc:
        if isinstance(exc, ConfigError) and exc.key is not None:
            loc = next((l for k, _, l in reversed(entries) if k == exc.key), None)
            raise ConfigError(f"invariant violation: {exc}", key=exc.key, line=loc) from exc
        found = _blame(entries, parsed)
        if found is None:
            raise ConfigError(f"invariant violation: {exc}") from exc
        key, loc, cause = found
        raise ConfigError(f"invariant violation: {cause}", key=key, line=loc) from exc


def parse_overrides(overrides) -> list:
    entries = []
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", line="--set")
        key, value = (s.strip() for s in item.split("=", 1))
        entries.append((key, value, "--set"))
    return entries


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read ``path`` (may be None for pure defaults) and apply ``overrides`` last."""
    entries = []
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {str(p)!r} does not exist")
        entries = _parse_lines(p.read_text(encoding="utf-8"), str(p))
    return config_from_entries(entries + parse_overrides(overrides))


def dump_config(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in flatten(config).items())
