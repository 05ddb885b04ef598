"""State containers for the electron-phonon system.

An electron lives on a periodic 1-D grid (the transverse screen axis), a
single phonon mode lives in a truncated Fock register, and the joint state is
an ``(n_points, n_max + 1)`` amplitude array. Norms carry the ``dx`` measure so
that ``sum(|amp|**2) * dx == 1`` for a normalized state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateSigmaError,
    GridError,
    InvalidDensityMatrixError,
    PacketOutsideGridError,
    SectorOutOfRangeError,
    UnnormalizedStateError,
)

NORM_TOL = 1e-9
API_NORM_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    n_points: int = 1024
    x_min: float = -40.0
    x_max: float = 40.0

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise GridError(f"n_points must be a power of two >= 8, got {n!r}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise GridError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        k = 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        k.flags.writeable = False
        return k

    @property
    def k_max(self) -> float:
        return np.pi / self.dx


@dataclass(frozen=True)
class FockRegister:
    n_max: int = 2

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise SectorOutOfRangeError(f"n_max must be a positive integer, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def check(self, n: int) -> None:
        if not 0 <= n <= self.n_max:
            raise SectorOutOfRangeError(f"phonon sector {n} outside 0..{self.n_max}")


def _frozen_array(a, dtype=complex) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: GridSpec
    amp: np.ndarray

    def __post_init__(self):
        amp = _frozen_array(self.amp)
        if amp.shape != (self.grid.n_points,):
            raise ValueError(f"amp shape {amp.shape} does not match grid ({self.grid.n_points},)")
        if not np.all(np.isfinite(amp)):
            raise ValueError("wavefield contains non-finite amplitudes")
        object.__setattr__(self, "amp", amp)


@dataclass(frozen=True, eq=False)
class JointState:
    grid: GridSpec
    fock: FockRegister
    amp: np.ndarray

    def __post_init__(self):
        amp = _frozen_array(self.amp)
        if amp.shape != (self.grid.n_points, self.fock.dim):
            raise ValueError(
                f"amp shape {amp.shape} does not match ({self.grid.n_points}, {self.fock.dim})"
            )
        if not np.all(np.isfinite(amp)):
            raise ValueError("joint state contains non-finite amplitudes")
        object.__setattr__(self, "amp", amp)

    def sector(self, n: int) -> WaveField:
        """Unnormalized electron amplitude in phonon sector ``n``."""
        self.fock.check(n)
        return WaveField(self.grid, self.amp[:, n])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = _frozen_array(self.elements)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise InvalidDensityMatrixError(f"density matrix must be square, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise InvalidDensityMatrixError("density matrix has non-finite entries")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > 1e-10:
            raise InvalidDensityMatrixError(f"not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-9:
            raise InvalidDensityMatrixError(f"trace {tr!r} differs from 1")
        lam_min = np.linalg.eigvalsh(rho).min()
        if lam_min < -1e-10:
            raise InvalidDensityMatrixError(f"negative eigenvalue {lam_min:.3g}")
        object.__setattr__(self, "elements", rho)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)


def gaussian_packet(grid: GridSpec, x0: float, sigma: float, k0: float) -> WaveField:
    """Normalized packet ``exp(-(x-x0)^2 / (4 sigma^2) + i k0 x)``.

    ``sigma`` is the standard deviation of the position density.
    """
    if not sigma > 0:
        raise DegenerateSigmaError(f"sigma must be positive, got {sigma!r}")
    if x0 - 4 * sigma < grid.x_min or x0 + 4 * sigma > grid.x_max:
        raise PacketOutsideGridError(
            f"packet support [{x0 - 4 * sigma}, {x0 + 4 * sigma}] leaves grid "
            f"[{grid.x_min}, {grid.x_max}]"
        )
    x = grid.x
    amp = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * k0 * x)
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dx)
    return WaveField(grid, amp)


def embed(psi: WaveField, n: int, fock: FockRegister | None = None) -> JointState:
    fock = fock or FockRegister()
    fock.check(n)
    amp = np.zeros((psi.grid.n_points, fock.dim), dtype=complex)
    amp[:, n] = psi.amp
    return JointState(psi.grid, fock, amp)


def norm(state: WaveField | JointState) -> float:
    return float(np.sqrt(np.sum(np.abs(state.amp) ** 2) * state.grid.dx))


def normalize(state):
    nrm = norm(state)
    if nrm == 0:
        raise UnnormalizedStateError("cannot normalize a zero state")
    if isinstance(state, JointState):
        return JointState(state.grid, state.fock, state.amp / nrm)
    return WaveField(state.grid, state.amp / nrm)


def require_normalized(state, tol: float = API_NORM_TOL) -> None:
    nrm = norm(state)
    if abs(nrm - 1.0) > tol:
        raise UnnormalizedStateError(f"state norm {nrm!r} deviates from 1 by more than {tol}")


def inner(a: WaveField | JointState, b: WaveField | JointState) -> complex:
    """<a|b> with the grid measure."""
    return complex(np.vdot(a.amp, b.amp) * a.grid.dx)


def born_pdf(psi: WaveField) -> np.ndarray:
    require_normalized(psi)
    return np.abs(psi.amp) ** 2 * psi.grid.dx


def sector_weight(state: JointState, n: int) -> float:
    state.fock.check(n)
    return float(np.sum(np.abs(state.amp[:, n]) ** 2) * state.grid.dx)


def sector_weights(state: JointState) -> np.ndarray:
    return np.sum(np.abs(state.amp) ** 2, axis=0) * state.grid.dx


def reduced_phonon_dm(state: JointState) -> DensityMatrix:
    """Trace out the electron: ``rho[m, n] = sum_i amp[i, m] conj(amp[i, n]) dx``.

    For a pure joint state this matrix has the same nonzero spectrum as the
    reduced electron matrix, at (n_max+1)^2 cost instead of n_points^2.
    """
    require_normalized(state)
    a = state.amp
    rho = (a.T @ a.conj()) * state.grid.dx
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits, with 0 log 0 taken as 0."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    lam = np.clip(rho.eigenvalues(), 0.0, None)
    lam = lam[lam > 0]
    s = float(-np.sum(lam * np.log2(lam)))
    return max(s, 0.0)
