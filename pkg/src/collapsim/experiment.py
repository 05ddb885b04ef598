"""Trajectory ensembles for the phonon/which-path correlation experiment.

Detector 1 is the screen (a joint Born draw at the end), detector 2 reads
the phonon register at the monitor cadence. Each trajectory:

1. the incident beam is conditioned on passing the slits,
2. transit through the slit channels with the phonon coupling on, the
   register measured every ``cadence`` steps,
3. exact free flight to the screen, then one joint (x, n) draw.

Records are analyzed by splitting on ``phonon_created``: the elastic class
defines the fringe maxima, every record gets its distance to the nearest
maximum, and the point-biserial correlation between that distance and the
creation flag is tested by permutation.
"""

from __future__ import annotations

import csv
import logging
import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .collapse import MonitoredRun, RngStream, draw_from_cdf, screen_cdf, split_seed
from .config import ExperimentConfig
from .dynamics import (
    PotentialSpec,
    boundary_weight,
    evolve,
    free_flight,
    superposition_defect,
    transmit_through_slits,
)
from .errors import (
    BoundaryLeakError,
    CollapsimError,
    EnsembleError,
    InsufficientDataError,
    NoFringeError,
    SchemaError,
    SingleClassError,
    TrajectoryError,
    ZeroVarianceError,
)
from .hilbert import JointState, embed, gaussian_packet
from .observables import distances_to_nearest_max, find_maxima, histogram, smooth, visibility
from .stats import point_biserial as _pb_test

log = logging.getLogger(__name__)

SCHEMA = "collapsim-v1"
RECORD_COLUMNS = (
    "schema",
    "trajectory_id",
    "seed",
    "screen_x",
    "phonon_created",
    "n_phonons_final",
    "first_creation_step",
    "distance_to_max",
)
SUMMARY_KEYS = (
    "n_total",
    "n_created",
    "n_elastic",
    "visibility_elastic",
    "visibility_created",
    "r_pb",
    "p_value",
    "mean_distance_elastic",
    "mean_distance_created",
)
MIN_CLASS = 100
MAX_ERROR_FRACTION = 0.01
PERMUTATION_SEED = 0


@dataclass
class TrajectoryRecord:
    id: int
    seed: int
    screen_x: float
    phonon_created: bool
    n_phonons_final: int
    first_creation_step: int | None
    distance_to_max: float | None = None

    def __post_init__(self):
        if (self.first_creation_step is not None) != bool(self.phonon_created):
            raise ValueError("first_creation_step must be set exactly when phonon_created")


@dataclass
class EnsembleSummary:
    n_total: int
    n_created: int
    n_elastic: int
    visibility_elastic: float | None = None
    visibility_created: float | None = None
    r_pb: float | None = None
    p_value: float | None = None
    mean_distance_elastic: float | None = None
    mean_distance_created: float | None = None
    notes: tuple = ()

    def to_text(self) -> str:
        lines = []
        for key in SUMMARY_KEYS:
            v = getattr(self, key)
            lines.append(f"{key} = {'none' if v is None else repr(v)}\n")
        return "".join(lines)


# --- single trajectories -------------------------------------------------------


def initial_state(config: ExperimentConfig) -> JointState:
    """Beam transmitted through the slits, phonon register empty."""
    p = config.packet
    incident = gaussian_packet(config.grid, p.x0, p.sigma, p.k0)
    psi = transmit_through_slits(incident, config.evolution.potential)
    return embed(psi, 0, config.fock)


def screen_state(config: ExperimentConfig, final: JointState) -> JointState:
    flown = free_flight(final, config.flight_time, config.evolution.coupling.omega)
    edge = boundary_weight(flown)
    if edge > config.boundary_tol:
        raise BoundaryLeakError(
            f"{edge:.3g} of the probability reached the grid edge "
            f"(tolerance {config.boundary_tol}); enlarge the grid or shorten flight_time"
        )
    return flown


class _Runner:
    """Per-config shared state: memoized monitored branches and screen CDFs."""

    def __init__(self, config: ExperimentConfig, max_cached: int = 4096):
        self.config = config
        self.monitored = MonitoredRun(initial_state(config), config.evolution, config.monitor)
        self.max_cached = max_cached
        self._cdfs: OrderedDict = OrderedDict()

    def cdf(self, history: tuple) -> np.ndarray:
        try:
            self._cdfs.move_to_end(history)
            return self._cdfs[history]
        except KeyError:
            flown = screen_state(self.config, self.monitored.final_state(history))
            cum = screen_cdf(flown)
            self._cdfs[history] = cum
            if len(self._cdfs) > self.max_cached:
                self._cdfs.popitem(last=False)
            return cum

    def trajectory(self, trajectory_id: int) -> TrajectoryRecord:
        cfg = self.config
        seed = split_seed(cfg.master_seed, trajectory_id)
        rng = RngStream(seed)
        events = self.monitored.sample_history(rng)
        history = tuple(n for _, n in events)
        x, n_final = draw_from_cdf(self.cdf(history), cfg.grid, cfg.fock.dim, rng)
        first = next((step for step, n in events if n != 0), None)
        if first is None and n_final != 0:
            # the final readout is the first change of phonon number
            first = cfg.evolution.n_steps
        return TrajectoryRecord(
            id=trajectory_id,
            seed=seed,
            screen_x=x,
            phonon_created=first is not None,
            n_phonons_final=n_final,
            first_creation_step=first,
        )


@lru_cache(maxsize=2)
def _runner(config: ExperimentConfig) -> _Runner:
    return _Runner(config)


def run_trajectory(config: ExperimentConfig, trajectory_id: int) -> TrajectoryRecord:
    """One monitored trajectory; a pure function of ``(config, trajectory_id)``."""
    try:
        return _runner(config).trajectory(trajectory_id)
    except CollapsimError as exc:
        raise TrajectoryError(trajectory_id, exc) from exc


def _run_chunk(args):
    config, ids = args
    out = []
    for i in ids:
        try:
            out.append(run_trajectory(config, i))
        except TrajectoryError as exc:
            out.append(exc)
    return out


def run_records(config: ExperimentConfig, workers: int | None = 1) -> list[TrajectoryRecord]:
    """All trajectories, ordered by id, identical for any worker count."""
    ids = list(range(config.n_trajectories))
    workers = max(1, workers or os.cpu_count() or 1)
    if workers == 1:
        results = _run_chunk((config, ids))
    else:
        n_chunks = min(len(ids), workers * 4)
        chunks = [ids[i::n_chunks] for i in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c) for c in chunks]))
        results = [r for part in parts for r in part]
        results.sort(key=lambda r: r.trajectory_id if isinstance(r, TrajectoryError) else r.id)
    errors = [r for r in results if isinstance(r, TrajectoryError)]
    if errors:
        for e in errors[:5]:
            log.warning("%s", e)
        if len(errors) > MAX_ERROR_FRACTION * len(ids):
            raise EnsembleError(f"{len(errors)} of {len(ids)} trajectories failed; first: {errors[0]}")
    return [r for r in results if not isinstance(r, TrajectoryError)]


def run_ensemble(config: ExperimentConfig, workers: int | None = 1):
    records = run_records(config, workers)
    return records, summarize(records, config)


# --- analysis ---------------------------------------------------------------------


def point_biserial(records, n_permutations: int = 10_000, seed: int = PERMUTATION_SEED):
    """``(r_pb, p_value)`` between ``phonon_created`` and ``distance_to_max``."""
    if any(r.distance_to_max is None for r in records):
        raise ValueError("distance_to_max must be filled before the correlation test")
    labels = [r.phonon_created for r in records]
    d = [r.distance_to_max for r in records]
    return _pb_test(labels, d, n_permutations=n_permutations, seed=seed)


def screen_edges(config: ExperimentConfig) -> np.ndarray:
    lo, hi = config.screen_window
    return np.linspace(lo, hi, config.histogram_bins + 1)


def class_visibility(xs, edges, window) -> float | None:
    """Visibility of the smoothed screen histogram; 0 when no fringes are resolved."""
    h = histogram(xs, edges)
    try:
        return visibility(smooth(h.counts), h.centers, window)
    except NoFringeError:
        return 0.0


def reference_maxima(records, edges, window) -> list[float]:
    """Fringe maxima of the elastic sub-ensemble's smoothed histogram."""
    xs = [r.screen_x for r in records if not r.phonon_created]
    h = histogram(xs, edges)
    return find_maxima(smooth(h.counts), h.centers, window)


def analyze(
    records,
    edges,
    window,
    n_permutations: int = 10_000,
    perm_seed: int = PERMUTATION_SEED,
    reference=None,
) -> EnsembleSummary:
    """Split by class, fill ``distance_to_max`` in place, and test the correlation.

    ``reference`` optionally supplies the maxima; by default they come from
    the elastic records.
    """
    if not records:
        raise InsufficientDataError("no records to analyze")
    created = [r for r in records if r.phonon_created]
    elastic = [r for r in records if not r.phonon_created]
    if len(elastic) < MIN_CLASS:
        raise InsufficientDataError(
            f"elastic class has {len(elastic)} records; at least {MIN_CLASS} needed"
        )
    maxima = list(reference) if reference is not None else reference_maxima(records, edges, window)
    d = distances_to_nearest_max([r.screen_x for r in records], maxima)
    for r, v in zip(records, d):
        r.distance_to_max = float(v)

    s = EnsembleSummary(len(records), len(created), len(elastic))
    s.visibility_elastic = class_visibility([r.screen_x for r in elastic], edges, window)
    s.mean_distance_elastic = float(np.mean([r.distance_to_max for r in elastic]))
    if len(created) >= MIN_CLASS:
        s.visibility_created = class_visibility([r.screen_x for r in created], edges, window)
    if created:
        s.mean_distance_created = float(np.mean([r.distance_to_max for r in created]))
    try:
        s.r_pb, s.p_value = point_biserial(records, n_permutations, perm_seed)
    except SingleClassError:
        s.notes += ("r_pb: single-class",)
    except ZeroVarianceError:
        s.notes += ("r_pb: zero-variance",)
    return s


def summarize(records, config: ExperimentConfig) -> EnsembleSummary:
    """:func:`analyze` with degenerate ensembles reported as ``none`` fields."""
    try:
        return analyze(records, screen_edges(config), config.screen_window, config.n_permutations)
    except InsufficientDataError as exc:
        for r in records:
            r.distance_to_max = None
        n_created = sum(r.phonon_created for r in records)
        return EnsembleSummary(
            len(records), n_created, len(records) - n_created, notes=(f"degenerate: {exc}",)
        )


# --- persistence --------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(
                [
                    SCHEMA,
                    _fmt(r.id),
                    _fmt(r.seed),
                    _fmt(float(r.screen_x)),
                    _fmt(bool(r.phonon_created)),
                    _fmt(r.n_phonons_final),
                    _fmt(r.first_creation_step),
                    _fmt(None if r.distance_to_max is None else float(r.distance_to_max)),
                ]
            )


def _opt_int(s):
    return int(s) if s != "" else None


def _opt_float(s):
    return float(s) if s != "" else None


def _bool(s):
    if s not in ("0", "1"):
        raise ValueError(f"boolean field must be 0 or 1, got {s!r}")
    return s == "1"


def read_records(path) -> list[TrajectoryRecord]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header") from None
        unknown = [c for c in header if c not in RECORD_COLUMNS]
        if unknown:
            raise SchemaError(f"{path}: unknown column '{unknown[0]}'")
        missing = [c for c in RECORD_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column '{missing[0]}'")
        col = {name: header.index(name) for name in RECORD_COLUMNS}
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            if row[col["schema"]] != SCHEMA:
                raise SchemaError(
                    f"{path}:{lineno}: schema version {row[col['schema']]!r}, expected {SCHEMA!r}"
                )
            try:
                out.append(
                    TrajectoryRecord(
                        id=int(row[col["trajectory_id"]]),
                        seed=int(row[col["seed"]]),
                        screen_x=float(row[col["screen_x"]]),
                        phonon_created=_bool(row[col["phonon_created"]]),
                        n_phonons_final=int(row[col["n_phonons_final"]]),
                        first_creation_step=_opt_int(row[col["first_creation_step"]]),
                        distance_to_max=_opt_float(row[col["distance_to_max"]]),
                    )
                )
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_summary(summary: EnsembleSummary, path) -> None:
    Path(path).write_text(summary.to_text(), encoding="utf-8")


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SUMMARY_KEYS:
            raise SchemaError(f"{path}: unknown summary key '{key}'")
        out[key] = None if value == "none" else (int(value) if key.startswith("n_") else float(value))
    return out


# --- unmonitored pattern ------------------------------------------------------------


def unmonitored_pattern(config: ExperimentConfig):
    """Screen probability density per phonon sector for one unmonitored run.

    Returns ``(x, pdf)`` with ``pdf`` of shape ``(N, d)``; ``pdf.sum() * dx`` is 1.
    """
    final = evolve(initial_state(config), config.evolution)
    flown = screen_state(config, final)
    return config.grid.x, np.abs(flown.amp) ** 2


def record_fields() -> tuple:
    return tuple(f.name for f in fields(TrajectoryRecord))


# --- superposition defect -----------------------------------------------------------


def defect_pair(config: ExperimentConfig):
    """Two packets at rest, straddling the coupling window centre."""
    d = config.defect
    c = config.evolution.coupling.window_center
    u = gaussian_packet(config.grid, c - d.offset, d.sigma, 0.0)
    v = gaussian_packet(config.grid, c + d.offset, d.sigma, 0.0)
    return u, v


def defect_values(config: ExperimentConfig) -> tuple[float, float]:
    """Superposition defect of the mean-field map at ``g = 0`` and at ``defect.g``.

    The slit barrier is removed so only the field back-reaction can break
    linearity.
    """
    u, v = defect_pair(config)
    base = replace(config.evolution, potential=PotentialSpec(barrier_height=0.0, slit_centers=None))
    out = []
    for g in (0.0, config.defect.g):
        spec = replace(base, coupling=replace(base.coupling, g=g))
        out.append(superposition_defect(u, v, spec, config.defect.field_amp))
    return out[0], out[1]
