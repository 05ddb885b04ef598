"""Single-photon Mach-Zehnder interferometer with an optional absorbing object.

Beam splitter convention: ``BS(theta) = [[cos, i sin], [i sin, cos]]``. The
photon enters mode 0; the object, when present, sits in arm 1 and absorbs
everything reaching it; ``phase`` is applied to arm 1. Output port 0 is the
dark port (no light at balanced settings without the object).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collapse import WEIGHT_FLOOR, RngStream


@dataclass(frozen=True)
class MziConfig:
    theta1: float = np.pi / 4
    theta2: float = np.pi / 4
    object_present: bool = False
    phase: float = 0.0


@dataclass(frozen=True)
class MziOutcome:
    p_dark: float
    p_bright: float
    p_absorbed: float

    def as_tuple(self):
        return (self.p_dark, self.p_bright, self.p_absorbed)


@dataclass(frozen=True)
class MziCounts:
    dark: int
    bright: int
    absorbed: int

    @property
    def total(self) -> int:
        return self.dark + self.bright + self.absorbed


def beam_splitter(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]])


def mzi_probabilities(config: MziConfig) -> MziOutcome:
    amp = beam_splitter(config.theta1) @ np.array([1.0, 0.0], dtype=complex)
    p_absorbed = 0.0
    if config.object_present:
        p_absorbed = float(abs(amp[1]) ** 2)
        amp[1] = 0.0
    amp[1] *= np.exp(1j * config.phase)
    out = beam_splitter(config.theta2) @ amp
    return MziOutcome(float(abs(out[0]) ** 2), float(abs(out[1]) ** 2), p_absorbed)


def mzi_sample(config: MziConfig, n_shots: int, rng: RngStream) -> MziCounts:
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    p = np.array(mzi_probabilities(config).as_tuple())
    p[p < WEIGHT_FLOOR] = 0.0
    counts = rng.generator.multinomial(n_shots, p / p.sum())
    return MziCounts(*(int(c) for c in counts))
