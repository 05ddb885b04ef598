"""Point-biserial correlation with a label-permutation p-value."""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import SingleClassError, ZeroVarianceError

PERM_CHUNK = 1000


@njit(cache=True)
def _subset_sums(values, m, u):
    # Partial Fisher-Yates: the first m slots after m swaps are a uniform m-subset,
    # whatever order `idx` was left in by the previous row.
    n = values.size
    idx = np.arange(n)
    out = np.empty(u.shape[0])
    for p in range(u.shape[0]):
        s = 0.0
        for j in range(m):
            r = j + int(u[p, j] * (n - j))
            if r >= n:
                r = n - 1
            t = idx[j]
            idx[j] = idx[r]
            idx[r] = t
            s += values[idx[j]]
        out[p] = s
    return out


def point_biserial_r(labels, values) -> float:
    """``(mean_1 - mean_0) / s * sqrt(n0 n1) / n`` with ``s`` the population std."""
    y = np.asarray(labels, dtype=bool)
    d = np.asarray(values, dtype=float)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n0 == 0 or n1 == 0:
        raise SingleClassError("point-biserial correlation needs both classes")
    s = float(d.std())
    if s < 1e-15:
        raise ZeroVarianceError("all values are identical")
    return float((d[y].mean() - d[~y].mean()) / s * np.sqrt(n0 * n1) / y.size)


def point_biserial(labels, values, n_permutations: int = 10_000, seed: int = 0):
    """Return ``(r_pb, p_value)``; the p-value is two-sided over label permutations.

    ``p = (1 + #{|r_perm| >= |r_obs|}) / (1 + n_permutations)``.
    """
    y = np.asarray(labels, dtype=bool)
    d = np.asarray(values, dtype=float)
    r_obs = point_biserial_r(y, d)
    n = y.size
    n1 = int(y.sum())
    n0 = n - n1
    s = float(d.std())
    total = float(d.sum())
    # permute the smaller class; its subset sum fixes the other
    m = min(n0, n1)
    scale = np.sqrt(n0 * n1) / n / s

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    hits = 0
    done = 0
    tol = abs(r_obs) * (1 - 1e-12)
    while done < n_permutations:
        chunk = min(PERM_CHUNK, n_permutations - done)
        sums = _subset_sums(d, m, rng.random((chunk, m)))
        s1 = sums if m == n1 else total - sums
        r = (s1 / n1 - (total - s1) / n0) * scale
        hits += int(np.sum(np.abs(r) >= tol))
        done += chunk
    return r_obs, (1 + hits) / (1 + n_permutations)
