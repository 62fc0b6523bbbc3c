"""Predator-prey (Lotka-Volterra) jump process on the unbounded lattice.

States are pairs (x, y) of nonnegative population counts: x prey, y
predators. Four local reactions: prey birth alpha*x, prey death beta*x*y,
predator birth delta*x*y, predator death gamma*y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augment import HomogeneousVirtual, SkeletonKernel
from .evidence import PointObservation
from .rates import RateSpec

_LOG2 = math.log(2.0)
_LOG_FLOOR = math.log(1e-6)

_DELTAS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [0, 0]], dtype=np.int64)


class LotkaVolterraRates(RateSpec):
    """Rule-based rates for the predator-prey model (infinite state space)."""

    def __init__(self, alpha=5e-4, beta=1e-4, delta=1e-4, gamma=5e-4):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.delta = float(delta)
        self.gamma = float(gamma)
        self.exit_bound = None  # populations are unbounded, so are the rates

    def _pairs(self, s):
        x, y = s
        cand = (((x + 1, y), self.alpha * x),
                ((x - 1, y), self.beta * x * y),
                ((x, y + 1), self.delta * x * y),
                ((x, y - 1), self.gamma * y))
        return [(t, r) for t, r in cand if r > 0.0]

    def rate(self, s, s2) -> float:
        for t, r in self._pairs(s):
            if t == tuple(s2):
                return r
        return 0.0

    def exit_rate(self, s) -> float:
        return float(sum(r for _, r in self._pairs(s)))

    def targets(self, s):
        return [t for t, _ in self._pairs(s)]

    def _rate_table(self, states) -> np.ndarray:
        arr = np.asarray(states, dtype=float)
        x, y = arr[..., 0], arr[..., 1]
        return np.stack([self.alpha * x, self.beta * x * y,
                         self.delta * x * y, self.gamma * y], axis=-1)

    def exit_rate_many(self, states) -> np.ndarray:
        return self._rate_table(states).sum(axis=-1)

    def make_skeleton_kernel(self, policy) -> SkeletonKernel:
        if isinstance(policy, HomogeneousVirtual):
            return LvSkeletonKernel(self, policy)
        return SkeletonKernel(self, policy)


class LvSkeletonKernel(SkeletonKernel):
    """Vectorized skeleton kernel for the predator-prey model under a
    constant virtual-jump surplus."""

    def sample_many(self, states, rng):
        arr = np.asarray(states, dtype=np.int64)
        rates = self.q._rate_table(arr)
        totals = rates.sum(axis=1) + self.policy.theta
        u = rng.uniform(size=len(arr)) * totals
        cum = np.cumsum(rates, axis=1)
        move = (u[:, None] >= cum).sum(axis=1)  # 0..3 reaction, 4 = stay
        return arr + _DELTAS[move]

    def logprob_to(self, states, target) -> np.ndarray:
        arr = np.asarray(states, dtype=np.int64)
        tgt = np.asarray(target, dtype=np.int64)
        rates = self.q._rate_table(arr)
        totals = rates.sum(axis=1) + self.policy.theta
        diff = tgt[None, :] - arr
        num = np.zeros(len(arr))
        for j, (dx, dy) in enumerate(_DELTAS[:4]):
            hit = (diff[:, 0] == dx) & (diff[:, 1] == dy)
            num[hit] = rates[hit, j]
        stay = (diff[:, 0] == 0) & (diff[:, 1] == 0)
        num[stay] = self.policy.theta
        with np.errstate(divide="ignore"):
            return np.where(num > 0, np.log(np.where(num > 0, num, 1.0))
                            - np.log(totals), -np.inf)


@dataclass(frozen=True)
class PreyObservation(PointObservation):
    """Noisy prey count; keeps the raw value so compiled samplers can
    re-evaluate the likelihood without the closure."""

    value: int = 0


def prey_observation(t: float, observed: int) -> PointObservation:
    """Noisy count of the prey population: log L = -log(2^|x - v| + 1e-6)."""
    v = int(observed)

    def log_lik(s) -> float:
        return -np.logaddexp(abs(s[0] - v) * _LOG2, _LOG_FLOOR)

    def log_lik_many(states) -> np.ndarray:
        arr = np.asarray(states)
        return -np.logaddexp(np.abs(arr[..., 0] - v) * _LOG2, _LOG_FLOOR)

    return PreyObservation(t=float(t), log_lik=log_lik,
                           log_lik_many=log_lik_many, value=v)


def sample_prey_observation(x: int, rng, window: int = 60) -> int:
    """Draw an observed count from the likelihood kernel around the truth."""
    lo = max(0, x - window)
    values = np.arange(lo, x + window + 1)
    logp = -np.logaddexp(np.abs(values - x) * _LOG2, _LOG_FLOOR)
    p = np.exp(logp - logp.max())
    return int(rng.choice(values, p=p / p.sum()))
