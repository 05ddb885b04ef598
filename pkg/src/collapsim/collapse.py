"""Projective monitoring of the phonon register and Born sampling at the screen.

A phonon-number measurement collapses the joint state onto one sector; the
electron keeps only the branch correlated with that outcome. Between
measurements the evolution is the ordinary unitary one from
:mod:`collapsim.dynamics`.

Every random draw goes through :class:`RngStream`, one uniform per
measurement and one per screen sample, so a trajectory is a deterministic
function of its seed.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .dynamics import EvolutionSpec, evolve
from .errors import DegenerateStateError
from .hilbert import JointState, require_normalized, sector_weights

WEIGHT_FLOOR = 1e-15
_U64 = 2**64


@dataclass(frozen=True)
class MonitorSpec:
    cadence: int = 50
    enabled: bool = True

    def __post_init__(self):
        if not isinstance(self.cadence, (int, np.integer)) or self.cadence < 1:
            raise ValueError(f"cadence must be a positive integer, got {self.cadence!r}")


def split_seed(seed: int, k: int) -> int:
    """Child seed for stream ``k`` of ``seed`` (SeedSequence spawn key)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(k),))
    return int(ss.generate_state(1, np.uint64)[0])


class RngStream:
    """Counter-based (Philox) random stream with deterministic splitting."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    def uniform(self) -> float:
        return float(self.generator.random())

    def split(self, k: int) -> "RngStream":
        return RngStream(split_seed(self.seed, k))

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def _choose(weights: np.ndarray, u: float) -> int:
    """Index drawn with probability proportional to ``weights`` from one uniform ``u``."""
    w = np.where(weights >= WEIGHT_FLOOR, weights, 0.0)
    cum = np.cumsum(w)
    if cum[-1] <= 0:
        raise DegenerateStateError("all outcome weights are below the sampling floor")
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    # u * total can round onto the last edge
    idx = min(idx, len(w) - 1)
    while w[idx] == 0:
        idx -= 1
    return idx


def _project(state: JointState, n: int, weight: float) -> JointState:
    amp = np.zeros_like(state.amp)
    amp[:, n] = state.amp[:, n] / np.sqrt(weight)
    return JointState(state.grid, state.fock, amp)


def measure_phonon(state: JointState, rng: RngStream) -> tuple[int, JointState]:
    """Projective phonon-number measurement with Born probabilities."""
    require_normalized(state)
    w = sector_weights(state)
    n = _choose(w, rng.uniform())
    return n, _project(state, n, w[n])


def screen_cdf(state: JointState) -> np.ndarray:
    """Cumulative joint Born distribution over (x-index, n), flattened x-major."""
    p = np.abs(state.amp) ** 2 * state.grid.dx
    p[:, sector_weights(state) < WEIGHT_FLOOR] = 0.0
    cum = np.cumsum(p.ravel())
    if cum[-1] <= 0:
        raise DegenerateStateError("screen distribution is empty")
    return cum


def draw_from_cdf(cum: np.ndarray, grid, dim: int, rng: RngStream) -> tuple[float, int]:
    u = rng.uniform() * cum[-1]
    flat = min(int(np.searchsorted(cum, u, side="right")), cum.size - 1)
    # skip zero-probability cells that share the same cumulative value
    while flat > 0 and cum[flat] == cum[flat - 1]:
        flat -= 1
    i, n = divmod(flat, dim)
    return float(grid.x[i]), int(n)


def screen_sample(state: JointState, rng: RngStream) -> tuple[float, int]:
    """Joint position / phonon-number draw at the screen."""
    require_normalized(state)
    return draw_from_cdf(screen_cdf(state), state.grid, state.fock.dim, rng)


def _schedule(spec: EvolutionSpec, monitor: MonitorSpec) -> tuple[int, int]:
    if not monitor.enabled:
        return 0, spec.n_steps
    return divmod(spec.n_steps, monitor.cadence)


def run_monitored(
    state: JointState, spec: EvolutionSpec, monitor: MonitorSpec, rng: RngStream
) -> tuple[JointState, list[tuple[int, int]]]:
    """Evolve ``cadence`` steps, measure, repeat; trailing steps run unmeasured.

    Returns the final state and ``(step, outcome)`` for every measurement.
    """
    n_meas, rest = _schedule(spec, monitor)
    events = []
    for j in range(n_meas):
        pre = evolve(state, spec, monitor.cadence)
        outcome, state = measure_phonon(pre, rng)
        events.append(((j + 1) * monitor.cadence, outcome))
    if rest:
        state = evolve(state, spec, rest)
    return state, events


class MonitoredRun:
    """Memoized :func:`run_monitored` for many trajectories sharing a start state.

    Between measurements the dynamics is deterministic, so the state reached
    after a given outcome history is the same for every trajectory. Those
    states are cached by history (LRU-bounded) and only the random draws are
    repeated per trajectory. The arithmetic is the same as in
    :func:`run_monitored`, so results agree bit for bit.
    """

    def __init__(self, state, spec, monitor, max_nodes: int = 4096):
        require_normalized(state)
        self.state, self.spec, self.monitor = state, spec, monitor
        self.n_meas, self.rest = _schedule(spec, monitor)
        self.max_nodes = max_nodes
        self._nodes: OrderedDict = OrderedDict()
        self._finals: OrderedDict = OrderedDict()

    def _lru_get(self, cache, key, build):
        try:
            cache.move_to_end(key)
            return cache[key]
        except KeyError:
            value = build()
            cache[key] = value
            if len(cache) > self.max_nodes:
                cache.popitem(last=False)
            return value

    def _post(self, history: tuple) -> JointState:
        if not history:
            return self.state
        pre, w = self._node(history[:-1])
        n = history[-1]
        return _project(pre, n, w[n])

    def _node(self, history: tuple):
        """(pre-measurement state, sector weights) after ``history``."""

        def build():
            pre = evolve(self._post(history), self.spec, self.monitor.cadence)
            require_normalized(pre)
            return pre, sector_weights(pre)

        return self._lru_get(self._nodes, history, build)

    def sample_history(self, rng: RngStream) -> list[tuple[int, int]]:
        history = ()
        events = []
        for j in range(self.n_meas):
            _, w = self._node(history)
            n = _choose(w, rng.uniform())
            history += (n,)
            events.append(((j + 1) * self.monitor.cadence, n))
        return events

    def final_state(self, history: tuple) -> JointState:
        def build():
            post = self._post(history)
            return evolve(post, self.spec, self.rest) if self.rest else post

        return self._lru_get(self._finals, history, build)

    def run(self, rng: RngStream) -> tuple[JointState, list[tuple[int, int]]]:
        events = self.sample_history(rng)
        return self.final_state(tuple(n for _, n in events)), events
