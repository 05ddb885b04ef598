"""Screen statistics: histograms, fringe maxima, visibility, distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import EmptyMaximaError, EmptyWindowError, NoFringeError
from .hilbert import GridSpec

DEFAULT_PROMINENCE = 0.1


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


@dataclass(frozen=True)
class FringeAnalysis:
    maxima: tuple
    visibility: float
    window: tuple


def histogram(samples, edges) -> Histogram:
    """Left-closed bins ``[e_i, e_{i+1})``; the last bin is closed on the right too."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("histogram needs at least two bin edges")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    s = np.asarray(samples, dtype=float).ravel()
    under = int(np.sum(s < edges[0]))
    over = int(np.sum(s > edges[-1]))
    counts, _ = np.histogram(s, bins=edges)
    return Histogram(edges, counts.astype(np.int64), under, over)


def smooth(values, passes: int = 1) -> np.ndarray:
    """Binomial [1, 2, 1]/4 smoothing with edge replication."""
    v = np.asarray(values, dtype=float)
    for _ in range(passes):
        p = np.pad(v, 1, mode="edge")
        v = 0.25 * p[:-2] + 0.5 * p[1:-1] + 0.25 * p[2:]
    return v


def _coords(grid_or_coords, n: int) -> np.ndarray:
    if isinstance(grid_or_coords, GridSpec):
        c = grid_or_coords.x
    else:
        c = np.asarray(grid_or_coords, dtype=float)
    if c.shape != (n,):
        raise ValueError(f"coordinates of shape {c.shape} do not match pdf length {n}")
    return c


def _window_peaks(pdf, grid_or_coords, window, prominence):
    pdf = np.asarray(pdf, dtype=float)
    x = _coords(grid_or_coords, pdf.size)
    lo, hi = window
    mask = (x >= lo) & (x <= hi)
    if mask.sum() < 3:
        raise EmptyWindowError(f"window [{lo}, {hi}] covers fewer than 3 samples")
    if not prominence > 0:
        raise ValueError("prominence must be positive")
    sub = pdf[mask]
    top = float(pdf.max())
    if top <= 0:
        return x[mask], sub, np.array([], dtype=int)
    thr = prominence * top
    peaks, _ = find_peaks(sub, height=thr, prominence=thr)
    return x[mask], sub, peaks


def find_maxima(pdf, grid, window, prominence: float = DEFAULT_PROMINENCE) -> list[float]:
    """Interior local maxima in ``window`` taller and more prominent than ``prominence * max(pdf)``.

    ``grid`` is a :class:`GridSpec` or an array of sample coordinates (e.g.
    histogram bin centers). Both the height and the topographic prominence
    must clear the threshold, which keeps shot-noise wiggles out.
    """
    xs, _, peaks = _window_peaks(pdf, grid, window, prominence)
    return [float(v) for v in xs[peaks]]


def visibility(pdf, grid, window, prominence: float = DEFAULT_PROMINENCE) -> float:
    """``(I_max - I_min) / (I_max + I_min)`` over the fringes in ``window``.

    ``I_max`` is the highest detected maximum and ``I_min`` the lowest
    minimum lying between two adjacent maxima.
    """
    _, sub, peaks = _window_peaks(pdf, grid, window, prominence)
    if peaks.size < 2:
        raise NoFringeError(f"fewer than two fringe maxima inside window {tuple(window)}")
    i_max = float(sub[peaks].max())
    i_min = min(float(sub[a:b + 1].min()) for a, b in zip(peaks[:-1], peaks[1:]))
    return (i_max - i_min) / (i_max + i_min)


def fringe_analysis(pdf, grid, window, prominence: float = DEFAULT_PROMINENCE) -> FringeAnalysis:
    maxima = find_maxima(pdf, grid, window, prominence)
    try:
        vis = visibility(pdf, grid, window, prominence)
    except NoFringeError:
        vis = 0.0
    return FringeAnalysis(tuple(maxima), vis, tuple(window))


def distance_to_nearest_max(x: float, maxima) -> float:
    m = np.asarray(maxima, dtype=float)
    if m.size == 0:
        raise EmptyMaximaError("no maxima to measure distance to")
    return float(np.min(np.abs(x - m)))


def distances_to_nearest_max(xs, maxima) -> np.ndarray:
    """Vectorized :func:`distance_to_nearest_max` for sorted ``maxima``."""
    m = np.sort(np.asarray(maxima, dtype=float))
    if m.size == 0:
        raise EmptyMaximaError("no maxima to measure distance to")
    xs = np.asarray(xs, dtype=float)
    j = np.clip(np.searchsorted(m, xs), 1, max(m.size - 1, 1))
    left = np.abs(xs - m[j - 1])
    right = np.abs(xs - m[np.minimum(j, m.size - 1)])
    return np.minimum(left, right)
