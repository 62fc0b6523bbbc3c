"""Virtual-jump augmentation policies and the induced skeleton kernel.

A policy chooses the dominating intensity R(s) >= Q(s) used by thinning.
Supported choices: a global constant (uniformization), a constant surplus
over the exit rate (homogeneous virtual jumps), and a multiple of the exit
rate (state-dependent bound, used by the chain-network preset).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PolicyViolationError
from .rates import DenseRateSpec, RateSpec, iter_states


@dataclass(frozen=True)
class Uniformization:
    """R(s) = lam for every state."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("uniformization rate must be positive")

    def total_rate(self, q: RateSpec, s) -> float:
        exit_rate = q.exit_rate(s)
        if self.lam < exit_rate:
            raise PolicyViolationError(s, self.lam, exit_rate)
        return self.lam

    def total_rate_many(self, q: RateSpec, states) -> np.ndarray:
        exit_rates = q.exit_rate_many(states)
        bad = exit_rates > self.lam
        if np.any(bad):
            offender = list(iter_states(states))[int(np.argmax(bad))]
            raise PolicyViolationError(offender, self.lam, float(exit_rates[bad][0]))
        return np.full(len(exit_rates), self.lam)

    @property
    def constant_total_rate(self):
        return self.lam


@dataclass(frozen=True)
class HomogeneousVirtual:
    """R(s) = Q(s) + theta: virtual jumps form a rate-theta Poisson process."""

    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise ConfigError("virtual-jump intensity theta must be positive")

    def total_rate(self, q: RateSpec, s) -> float:
        return q.exit_rate(s) + self.theta

    def total_rate_many(self, q: RateSpec, states) -> np.ndarray:
        return q.exit_rate_many(states) + self.theta

    constant_total_rate = None


@dataclass(frozen=True)
class ScaledExit:
    """R(s) = factor * Q(s): state-dependent dominating rate.

    Matches the chain-network setting where the bound is twice the intensity
    of leaving the current state.
    """

    factor: float = 2.0

    def __post_init__(self):
        if self.factor <= 1:
            raise ConfigError("scale factor must exceed 1")

    def total_rate(self, q: RateSpec, s) -> float:
        return self.factor * q.exit_rate(s)

    def total_rate_many(self, q: RateSpec, states) -> np.ndarray:
        return self.factor * q.exit_rate_many(states)

    constant_total_rate = None


AugmentationPolicy = Uniformization | HomogeneousVirtual | ScaledExit


class SkeletonKernel:
    """Transition kernel of the redundant skeleton chain.

    Off-diagonal probability Q(s,s')/R(s), staying probability 1 - Q(s)/R(s).
    """

    def __init__(self, q: RateSpec, policy: AugmentationPolicy):
        self.q = q
        self.policy = policy

    def prob(self, s, s2) -> float:
        total = self.policy.total_rate(self.q, s)
        if s2 == s:
            if total == 0.0:
                return 1.0
            return 1.0 - self.q.exit_rate(s) / total
        if total == 0.0:
            return 0.0
        return self.q.rate(s, s2) / total

    def logprob(self, s, s2) -> float:
        p = self.prob(s, s2)
        return float(np.log(p)) if p > 0 else -np.inf

    def sample(self, s, rng):
        total = self.policy.total_rate(self.q, s)
        if total == 0.0:
            return s
        u = rng.uniform() * total
        acc = 0.0
        for target in self.q.targets(s):
            acc += self.q.rate(s, target)
            if u < acc:
                return target
        return s

    def sample_many(self, states, rng):
        out = [self.sample(s, rng) for s in iter_states(states)]
        arr = np.asarray(states)
        if arr.ndim > 1:
            return np.array(out, dtype=arr.dtype)
        return np.array(out)

    def logprob_to(self, states, target) -> np.ndarray:
        return np.array([self.logprob(s, target) for s in iter_states(states)])


class DenseSkeletonKernel(SkeletonKernel):
    """Tabulated kernel over a finite state space, with vectorized sampling."""

    def __init__(self, q: DenseRateSpec, policy: AugmentationPolicy):
        super().__init__(q, policy)
        totals = policy.total_rate_many(q, np.arange(q.n_states))
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(totals[:, None] > 0, q.matrix / totals[:, None], 0.0)
        stay = np.where(totals > 0, 1.0 - q.exit_rate_many(np.arange(q.n_states)) / totals, 1.0)
        np.fill_diagonal(p, stay)
        # Guard tiny negatives from cancellation.
        p = np.clip(p, 0.0, None)
        self.matrix = p / p.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            self.log_matrix = np.log(self.matrix)
        self._cum = np.cumsum(self.matrix, axis=1)

    def prob(self, s, s2) -> float:
        return float(self.matrix[s, s2])

    def logprob(self, s, s2) -> float:
        return float(self.log_matrix[s, s2])

    def sample(self, s, rng):
        return int(np.searchsorted(self._cum[s], rng.uniform()))

    def sample_many(self, states, rng):
        states = np.asarray(states, dtype=np.intp)
        u = rng.uniform(size=len(states))
        cum = self._cum[states]
        return (u[:, None] > cum).sum(axis=1)

    def logprob_to(self, states, target) -> np.ndarray:
        return self.log_matrix[np.asarray(states, dtype=np.intp), target]


def build_kernel(q: RateSpec, policy: AugmentationPolicy) -> SkeletonKernel:
    """Skeleton transition kernel induced by q and the augmentation policy."""
    maker = getattr(q, "make_skeleton_kernel", None)
    if maker is not None:
        return maker(policy)
    if isinstance(q, DenseRateSpec):
        return DenseSkeletonKernel(q, policy)
    return SkeletonKernel(q, policy)
