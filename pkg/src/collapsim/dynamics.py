"""Split-operator propagation of the electron-phonon state.

The Hamiltonian on one phonon mode is

    H = p^2/2 + V(x) + omega a^dag a + g w(x) (a + a^dag)

with ``V`` the slit barrier and ``w`` a raised-cosine window that localizes
the coupling on the crystal. One Strang step is a kinetic half step in
momentum space, an exact per-point exponential of the local
``(n_max+1) x (n_max+1)`` block, and another kinetic half step.

Geometry is transverse: ``x`` is the screen axis, time stands in for the
longitudinal flight. An experiment runs in two stages, a *transit* through
the slit channels (barrier and coupling active) and a free *flight* to the
screen, which is solved exactly by :func:`free_flight`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .errors import DegenerateStateError, GeometryError, StabilityError
from .hilbert import (
    FockRegister,
    GridSpec,
    JointState,
    WaveField,
    norm,
    require_normalized,
)


@dataclass(frozen=True)
class PotentialSpec:
    barrier_center: float = 0.0
    barrier_width: float = 16.0
    barrier_height: float = 50.0
    slit_centers: tuple | None = (-2.0, 2.0)
    slit_width: float = 1.0

    def __post_init__(self):
        if self.slit_centers is not None:
            object.__setattr__(self, "slit_centers", tuple(float(c) for c in self.slit_centers))
        if not self.barrier_width > 0:
            raise GeometryError(f"barrier_width must be positive, got {self.barrier_width}")
        if not self.barrier_height >= 0:
            raise GeometryError(f"barrier_height must be non-negative, got {self.barrier_height}")
        if not self.slit_width > 0:
            raise GeometryError(f"slit_width must be positive, got {self.slit_width}")
        if not self.slit_centers:
            return
        if not self.barrier_height > 0:
            raise GeometryError("barrier_height must be positive when slits are specified")
        half = self.barrier_width / 2
        for c in self.slit_centers:
            if abs(c - self.barrier_center) + self.slit_width / 2 > half:
                raise GeometryError(f"slit at {c} extends outside the barrier")
        cs = sorted(self.slit_centers)
        for a, b in zip(cs, cs[1:]):
            if b - a <= self.slit_width:
                raise GeometryError(f"slits at {a} and {b} overlap")


@dataclass(frozen=True)
class CouplingSpec:
    g: float = 1.5
    window_center: float = 2.0
    window_width: float = 2.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.g >= 0:
            raise GeometryError(f"coupling g must be non-negative, got {self.g}")
        if not self.window_width > 0:
            raise GeometryError(f"window_width must be positive, got {self.window_width}")
        if not self.omega > 0:
            raise GeometryError(f"omega must be positive, got {self.omega}")


@dataclass(frozen=True)
class EvolutionSpec:
    dt: float = 0.001
    n_steps: int = 2000
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    coupling: CouplingSpec = field(default_factory=CouplingSpec)

    def __post_init__(self):
        if not self.dt > 0:
            raise StabilityError(f"dt must be positive, got {self.dt}")
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 1:
            raise StabilityError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    def check_stability(self, grid: GridSpec) -> None:
        e_max = grid.k_max**2 / 2
        if self.dt * e_max >= np.pi:
            raise StabilityError(
                f"dt={self.dt} too large: dt * max kinetic energy = {self.dt * e_max:.3f} >= pi"
            )


def build_potential(p: PotentialSpec, grid: GridSpec) -> np.ndarray:
    # open intervals, so mirror-image openings sample the same number of points
    x = grid.x
    v = np.where(np.abs(x - p.barrier_center) < p.barrier_width / 2, float(p.barrier_height), 0.0)
    for c in p.slit_centers or ():
        v[np.abs(x - c) < p.slit_width / 2] = 0.0
    return v


def coupling_window(c: CouplingSpec, grid: GridSpec) -> np.ndarray:
    """Raised-cosine bump of unit height and full support ``window_width``."""
    half = c.window_width / 2
    if c.window_center - half < grid.x_min or c.window_center + half > grid.x_max:
        raise GeometryError(
            f"coupling window [{c.window_center - half}, {c.window_center + half}] leaves the grid"
        )
    u = grid.x - c.window_center
    return np.where(np.abs(u) < half, 0.5 * (1 + np.cos(np.pi * u / half)), 0.0)


def ladder_x(fock: FockRegister) -> np.ndarray:
    """Truncated ``a + a^dag`` (real, tridiagonal)."""
    off = np.sqrt(np.arange(1, fock.dim, dtype=float))
    return np.diag(off, 1) + np.diag(off, -1)


class Propagator:
    """Precomputed Strang factors for one (grid, register, spec) triple."""

    def __init__(self, grid: GridSpec, fock: FockRegister, spec: EvolutionSpec):
        spec.check_stability(grid)
        self.grid, self.fock, self.spec = grid, fock, spec
        dt = spec.dt
        k2 = grid.k**2 / 2
        self.half_kin = np.exp(-0.5j * dt * k2)
        self.full_kin = np.exp(-1j * dt * k2)

        v = build_potential(spec.potential, grid)
        c = spec.coupling
        n = np.arange(fock.dim, dtype=float)
        if c.g == 0:
            # diagonal local factor: (d, N)
            self.local_diag = np.exp(-1j * dt * (v[None, :] + c.omega * n[:, None]))
            self.local = None
        else:
            w = coupling_window(c, grid)
            h = c.omega * np.diag(n)[None] + (c.g * w)[:, None, None] * ladder_x(fock)[None]
            ev, vec = np.linalg.eigh(h)
            u = np.einsum("imk,ik,ink->imn", vec, np.exp(-1j * dt * ev), vec)
            u *= np.exp(-1j * dt * v)[:, None, None]
            self.local = np.ascontiguousarray(u.transpose(1, 2, 0))  # (d, d, N)
            self.local_diag = None

    def _local(self, work):
        if self.local is None:
            return work * self.local_diag
        return np.einsum("mnx,nx->mx", self.local, work)

    def run(self, amp: np.ndarray, n_steps: int) -> np.ndarray:
        """Advance an ``(N, d)`` amplitude array by ``n_steps`` Strang steps."""
        if n_steps == 0:
            return np.array(amp, copy=True)
        work = np.ascontiguousarray(amp.T)
        work = sfft.ifft(self.half_kin * sfft.fft(work, axis=-1), axis=-1)
        for s in range(n_steps):
            work = self._local(work)
            kin = self.full_kin if s < n_steps - 1 else self.half_kin
            work = sfft.ifft(kin * sfft.fft(work, axis=-1), axis=-1)
        return work.T


@lru_cache(maxsize=32)
def propagator(grid: GridSpec, fock: FockRegister, spec: EvolutionSpec) -> Propagator:
    return Propagator(grid, fock, spec)


def step_unitary(state: JointState, spec: EvolutionSpec) -> JointState:
    require_normalized(state)
    prop = propagator(state.grid, state.fock, spec)
    return JointState(state.grid, state.fock, prop.run(state.amp, 1))


def evolve(state: JointState, spec: EvolutionSpec, n_steps: int | None = None) -> JointState:
    """``n_steps`` (default ``spec.n_steps``) Strang steps with fused kinetic halves.

    The map is linear, so unnormalized input is accepted.
    """
    n = spec.n_steps if n_steps is None else n_steps
    if n < 0:
        raise StabilityError(f"n_steps must be non-negative, got {n}")
    prop = propagator(state.grid, state.fock, spec)
    return JointState(state.grid, state.fock, prop.run(state.amp, n))


def free_flight(state: JointState, t: float, omega: float = 0.0) -> JointState:
    """Exact propagation under ``p^2/2 + omega a^dag a`` for time ``t``."""
    grid = state.grid
    phase_k = np.exp(-0.5j * t * grid.k**2)[:, None]
    phase_n = np.exp(-1j * t * omega * np.arange(state.fock.dim))[None, :]
    amp = sfft.ifft(phase_k * sfft.fft(state.amp, axis=0), axis=0) * phase_n
    return JointState(grid, state.fock, amp)


def boundary_weight(state: JointState | WaveField, fraction: float = 0.05) -> float:
    """Probability within ``fraction`` of the grid length of either edge."""
    grid = state.grid
    x = grid.x
    margin = fraction * grid.length
    edge = (x < grid.x_min + margin) | (x >= grid.x_max - margin)
    a = state.amp if state.amp.ndim == 2 else state.amp[:, None]
    return float(np.sum(np.abs(a[edge]) ** 2) * grid.dx)


def energy(state: JointState, spec: EvolutionSpec) -> float:
    """Expectation of the full Hamiltonian (unnormalized states are normalized first)."""
    grid = state.grid
    a = state.amp
    nrm2 = np.sum(np.abs(a) ** 2) * grid.dx
    ak = sfft.fft(a, axis=0)
    kin = np.sum((grid.k**2 / 2)[:, None] * np.abs(ak) ** 2) * grid.dx / grid.n_points
    v = build_potential(spec.potential, grid)
    pot = np.sum(v[:, None] * np.abs(a) ** 2) * grid.dx
    c = spec.coupling
    n = np.arange(state.fock.dim)
    pho = c.omega * np.sum(n[None, :] * np.abs(a) ** 2) * grid.dx
    cpl = 0.0
    if c.g:
        w = coupling_window(c, grid)
        x_op = ladder_x(state.fock)
        cpl = c.g * np.real(np.sum(w[:, None] * a.conj() * (a @ x_op.T))) * grid.dx
    return float((kin + pot + pho + cpl) / nrm2)


# --- slit transmission ------------------------------------------------------


@lru_cache(maxsize=8)
def slit_modes(grid: GridSpec, potential: PotentialSpec) -> np.ndarray:
    """Fundamental guided mode of each slit channel, as orthonormal grid columns.

    The channel Hamiltonian ``p^2/2 + V(x)`` is diagonalized with the exact
    spectral kinetic operator; modes bound below the barrier top and mostly
    inside the barrier extent are guided, and the lowest one per slit is kept.
    """
    if not potential.slit_centers:
        raise GeometryError("slit transmission needs slit openings")
    col = np.real(np.fft.ifft(grid.k**2 / 2))
    h = sla.circulant(col) + np.diag(build_potential(potential, grid))
    h = 0.5 * (h + h.T)
    ev, vec = sla.eigh(h, subset_by_value=(-np.inf, potential.barrier_height))
    x = grid.x
    half = potential.barrier_width / 2
    inside = np.abs(x - potential.barrier_center) < half
    guided = np.sum(vec[inside] ** 2, axis=0) > 0.5
    n_slits = len(potential.slit_centers)
    if guided.sum() < n_slits:
        raise GeometryError(
            f"only {int(guided.sum())} guided channel modes for {n_slits} slits; "
            "widen the slits or raise the barrier"
        )
    modes = vec[:, np.flatnonzero(guided)[:n_slits]]
    modes.flags.writeable = False
    return modes


def transmit_through_slits(psi: WaveField, potential: PotentialSpec) -> WaveField:
    """Condition an incident beam on passing the slit plane.

    Only the fundamental guided mode of each channel is transmitted; the
    result is the renormalized projection of ``psi`` onto those modes.
    Electrons stopped by the wall never reach the screen, so the screen
    statistics are conditional on transmission.
    """
    modes = slit_modes(psi.grid, potential)
    amp = modes @ (modes.T @ psi.amp)
    out = WaveField(psi.grid, amp)
    nrm = norm(out)
    if nrm < 1e-12:
        raise DegenerateStateError("incident beam does not reach any slit")
    return WaveField(psi.grid, amp / nrm)


# --- mean-field nonlinearity demo -------------------------------------------


def evolve_mean_field(
    psi: WaveField,
    field_amp: float,
    spec: EvolutionSpec,
    n_steps: int | None = None,
    field_velocity: float = 0.0,
) -> tuple[WaveField, float]:
    """Self-consistent electron + classical field.

    The field obeys ``A'' = -omega^2 A - g <w>_psi`` and the electron sees
    ``V(x) + g w(x) A(t)``. Each step is a kinetic half step, a local kick at
    the midpoint field value (leapfrog for ``A``), and a kinetic half step,
    so the electron update is unitary for any frozen ``A``.
    """
    require_normalized(psi)
    grid = psi.grid
    spec.check_stability(grid)
    n = spec.n_steps if n_steps is None else n_steps
    c = spec.coupling
    dt = spec.dt
    v = build_potential(spec.potential, grid)
    w = coupling_window(c, grid) if c.g else np.zeros(grid.n_points)
    half_kin = np.exp(-0.25j * dt * grid.k**2)

    a, adot = float(field_amp), float(field_velocity)
    work = psi.amp.copy()
    for _ in range(n):
        work = sfft.ifft(half_kin * sfft.fft(work))
        a_mid = a + 0.5 * dt * adot
        work = work * np.exp(-1j * dt * (v + c.g * w * a_mid))
        w_mean = np.sum(w * np.abs(work) ** 2) * grid.dx
        adot += dt * (-(c.omega**2) * a_mid - c.g * w_mean)
        a = a_mid + 0.5 * dt * adot
        work = sfft.ifft(half_kin * sfft.fft(work))
    return WaveField(grid, work), a


def superposition_defect(
    u: WaveField, v: WaveField, spec: EvolutionSpec, field_amp: float = 0.0
) -> float:
    """``|| E((u+v)/s) - (E(u) + E(v))/s ||`` with ``s = ||u+v||`` and ``E`` the mean-field map."""
    grid = u.grid
    s_amp = u.amp + v.amp
    s = float(np.sqrt(np.sum(np.abs(s_amp) ** 2) * grid.dx))
    if s < 1e-12:
        raise DegenerateStateError("u + v has vanishing norm")
    e_sum, _ = evolve_mean_field(WaveField(grid, s_amp / s), field_amp, spec)
    e_u, _ = evolve_mean_field(u, field_amp, spec)
    e_v, _ = evolve_mean_field(v, field_amp, spec)
    diff = e_sum.amp - (e_u.amp + e_v.amp) / s
    return float(np.sqrt(np.sum(np.abs(diff) ** 2) * grid.dx))
