"""Transition-rate accessors and initial distributions.

States are opaque hashable objects: plain ints for finite models, tuples of
ints for rule-based models such as Lotka-Volterra.
"""

from __future__ import annotations

import abc
import bisect

import numpy as np

from .errors import ConfigError

_REL_TOL = 1e-12


class RateSpec(abc.ABC):
    """Accessor for an intensity matrix Q.

    ``rate(s, s2)`` is the jump intensity from ``s`` to ``s2 != s``,
    ``exit_rate(s)`` the total intensity of leaving ``s`` and ``targets(s)``
    the finite ordered list of states reachable in one jump.
    """

    @abc.abstractmethod
    def rate(self, s, s2) -> float: ...

    @abc.abstractmethod
    def exit_rate(self, s) -> float: ...

    @abc.abstractmethod
    def targets(self, s): ...

    def exit_rate_many(self, states) -> np.ndarray:
        # Loop fallback; array-backed subclasses override.
        return np.array([self.exit_rate(s) for s in iter_states(states)])


def iter_states(states):
    """Iterate over a batch of states (1-d array of codes or 2-d of vectors)."""
    arr = np.asarray(states)
    if arr.ndim <= 1:
        return arr.tolist() if arr.ndim == 1 else [arr.item()]
    return [tuple(row) for row in arr.tolist()]


class DenseRateSpec(RateSpec):
    """Finite state space backed by a dense off-diagonal rate matrix.

    States are the integers ``0 .. n_states-1``. Exit rates and target lists
    are cached at construction.
    """

    def __init__(self, rates: np.ndarray):
        rates = np.asarray(rates, dtype=float)
        if rates.ndim != 2 or rates.shape[0] != rates.shape[1]:
            raise ConfigError("rate matrix must be square")
        if np.any(rates < 0) and np.any(rates[~np.eye(len(rates), dtype=bool)] < 0):
            raise ConfigError("off-diagonal rates must be nonnegative")
        off = rates.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0):
            raise ConfigError("off-diagonal rates must be nonnegative")
        self.matrix = off
        self.n_states = off.shape[0]
        self._exit = off.sum(axis=1)
        self._targets = [np.nonzero(off[s])[0].tolist() for s in range(self.n_states)]

    @classmethod
    def from_intensity_matrix(cls, q: np.ndarray) -> "DenseRateSpec":
        """Build from a full intensity matrix (rows summing to zero)."""
        q = np.asarray(q, dtype=float)
        if not np.allclose(q.sum(axis=1), 0.0, atol=1e-9):
            raise ConfigError("intensity matrix rows must sum to zero")
        return cls(q)

    @property
    def states(self):
        return list(range(self.n_states))

    def rate(self, s, s2) -> float:
        return float(self.matrix[s, s2])

    def exit_rate(self, s) -> float:
        return float(self._exit[s])

    def targets(self, s):
        return self._targets[s]

    def exit_rate_many(self, states) -> np.ndarray:
        return self._exit[np.asarray(states, dtype=np.intp)]

    def max_exit_rate(self) -> float:
        return float(self._exit.max()) if self.n_states else 0.0


class FunctionRateSpec(RateSpec):
    """Rule-based rates: a callable mapping a state to [(target, rate), ...].

    Suits infinite state spaces where only local jump targets are enumerable.
    """

    def __init__(self, jump_rule, exit_bound=None):
        self._rule = jump_rule
        self.exit_bound = exit_bound  # sup_s exit_rate(s), None if unbounded

    def _pairs(self, s):
        return [(t, r) for t, r in self._rule(s) if r > 0.0]

    def rate(self, s, s2) -> float:
        for t, r in self._pairs(s):
            if t == s2:
                return r
        return 0.0

    def exit_rate(self, s) -> float:
        return float(sum(r for _, r in self._pairs(s)))

    def targets(self, s):
        return [t for t, _ in self._pairs(s)]


class SegmentedRates:
    """Piecewise-constant-in-time rates: one RateSpec per time segment.

    Segment j covers [breaks[j], breaks[j+1]); the first break is 0 and the
    last is the horizon. A homogeneous process is the single-segment case.
    """

    def __init__(self, breaks, specs):
        self.breaks = tuple(float(b) for b in breaks)
        self.specs = list(specs)
        if len(self.breaks) != len(self.specs) + 1:
            raise ConfigError("need exactly one spec per segment")
        if self.breaks[0] != 0.0 or any(
            b1 <= b0 for b0, b1 in zip(self.breaks, self.breaks[1:])
        ):
            raise ConfigError("segment breaks must increase from 0")

    @classmethod
    def constant(cls, q: RateSpec, t_max: float) -> "SegmentedRates":
        return cls((0.0, t_max), [q])

    @property
    def t_max(self) -> float:
        return self.breaks[-1]

    def index_at(self, t: float) -> int:
        j = bisect.bisect_right(self.breaks, t) - 1
        return min(max(j, 0), len(self.specs) - 1)

    def spec_at(self, t: float) -> RateSpec:
        return self.specs[self.index_at(t)]

    def iter_pieces(self, a: float, b: float):
        """Yield (t0, t1, spec) covering [a, b]."""
        j = self.index_at(a)
        t0 = a
        while t0 < b:
            t1 = min(self.breaks[j + 1], b)
            yield t0, t1, self.specs[j]
            t0 = t1
            j += 1

    def exit_integral(self, s, a: float, b: float) -> float:
        return sum(spec.exit_rate(s) * (t1 - t0)
                   for t0, t1, spec in self.iter_pieces(a, b))


class FiniteInitial:
    """Initial distribution over integer states 0..n-1."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or probs.sum() <= 0:
            raise ConfigError("initial probabilities must be nonnegative, not all zero")
        self.probs = probs / probs.sum()
        with np.errstate(divide="ignore"):
            self.log_probs = np.log(self.probs)

    def sample(self, rng):
        return int(rng.choice(len(self.probs), p=self.probs))

    def sample_many(self, count, rng):
        return rng.choice(len(self.probs), size=count, p=self.probs)

    def log_pmf(self, s) -> float:
        return float(self.log_probs[s])

    def log_pmf_many(self, states):
        return self.log_probs[np.asarray(states, dtype=np.intp)]

    @classmethod
    def point_mass(cls, state, n_states):
        probs = np.zeros(n_states)
        probs[state] = 1.0
        return cls(probs)


class PointMassInitial:
    """Degenerate initial distribution at a single (possibly tuple) state."""

    def __init__(self, state):
        self.state = state

    def sample(self, rng):
        return self.state

    def sample_many(self, count, rng):
        arr = np.asarray(self.state)
        if arr.ndim == 0:
            return np.full(count, self.state)
        return np.tile(arr, (count, 1))

    def log_pmf(self, s) -> float:
        return 0.0 if tuple(np.atleast_1d(s)) == tuple(np.atleast_1d(self.state)) else -np.inf

    def log_pmf_many(self, states):
        ref = np.asarray(self.state)
        arr = np.asarray(states)
        if arr.ndim > 1:
            hit = np.all(arr == ref, axis=1)
        else:
            hit = arr == ref
        out = np.where(hit, 0.0, -np.inf)
        return out
