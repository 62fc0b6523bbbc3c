"""Evidence models and the conditional skeleton as a discrete-time HMM.

With the potential-jump grid fixed, the conditional law of the skeleton is a
finite-horizon HMM: initial weight, per-step transition kernel and per-step
potentials. Potentials collect point-observation likelihoods, holding factors
(absent under constant-rate uniformization) and fully-observed child-process
contributions.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass

import numpy as np

from .augment import AugmentationPolicy, SkeletonKernel, Uniformization, build_kernel
from .errors import DegeneratePotentialError, UnsupportedModelError
from .rates import RateSpec, SegmentedRates, iter_states

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointObservation:
    """Noisy observation at a fixed time, as a state -> log-likelihood map."""

    t: float
    log_lik: object  # callable state -> float
    log_lik_many: object = None  # optional vectorized form
    point_state: object = None  # set when the observation pins the state

    def eval_many(self, states) -> np.ndarray:
        if self.log_lik_many is not None:
            return np.asarray(self.log_lik_many(states), dtype=float)
        return np.array([self.log_lik(s) for s in iter_states(states)])


def locate_observation_steps(grid_times, obs_times):
    """Map each observation to the last grid index at or before it."""
    grid = list(grid_times)
    out = []
    for t in obs_times:
        out.append(bisect.bisect_right(grid, t))
    return out


class ChildProcessEvidence:
    """A fully observed child trajectory whose rates depend on the parent state.

    ``cim(parent_state)`` returns the child's RateSpec (or SegmentedRates if
    co-parents vary over time). Cumulative tables over the child's refined
    breakpoints are memoized per parent state, so interval queries are
    O(log m).
    """

    def __init__(self, child, cim):
        self.child = child
        self._cim = cim
        self._tables = {}

    def _table(self, parent_state):
        tab = self._tables.get(parent_state)
        if tab is None:
            rates = self._cim(parent_state)
            if isinstance(rates, RateSpec):
                rates = SegmentedRates.constant(rates, self.child.t_max)
            # Refine child jumps with the rate breakpoints.
            breaks = sorted(set(rates.breaks) | set(self.child.times)
                            | {0.0, self.child.t_max})
            breaks = [b for b in breaks if 0.0 <= b <= self.child.t_max]
            cum_exit = [0.0]
            for b0, b1 in zip(breaks, breaks[1:]):
                y = self.child.state_at(b0)
                exit_rate = rates.spec_at(b0).exit_rate(y)
                cum_exit.append(cum_exit[-1] + exit_rate * (b1 - b0))
            jump_times = list(self.child.times)
            cum_jump = [0.0]
            prev = self.child.s0
            for t, y in zip(self.child.times, self.child.states):
                r = rates.spec_at(t).rate(prev, y)
                cum_jump.append(cum_jump[-1] + (np.log(r) if r > 0 else -np.inf))
                prev = y
            tab = (np.array(breaks), np.array(cum_exit),
                   np.array(jump_times), np.array(cum_jump))
            self._tables[parent_state] = tab
        return tab

    def _cum_exit_at(self, tab, t):
        breaks, cum_exit = tab[0], tab[1]
        j = int(np.searchsorted(breaks, t, side="right")) - 1
        j = min(max(j, 0), len(breaks) - 2)
        b0 = breaks[j]
        per_unit = (cum_exit[j + 1] - cum_exit[j]) / (breaks[j + 1] - b0)
        return cum_exit[j] + per_unit * (t - b0)

    def interval_loglik(self, parent_state, a: float, b: float) -> float:
        """Child log-density restricted to (a, b], given the parent state.

        A child jump exactly at a grid boundary belongs to the earlier
        interval (closed-left convention for the holding pieces).
        """
        tab = self._table(parent_state)
        jump_times, cum_jump = tab[2], tab[3]
        i0 = int(np.searchsorted(jump_times, a, side="right"))
        i1 = int(np.searchsorted(jump_times, b, side="right"))
        jump_part = cum_jump[i1] - cum_jump[i0]
        exit_part = self._cum_exit_at(tab, b) - self._cum_exit_at(tab, a)
        return float(jump_part - exit_part)


def _total_rate_integral(policy, segrates: SegmentedRates, s, a, b) -> float:
    if isinstance(policy, Uniformization):
        return policy.lam * (b - a)
    return sum(policy.total_rate(spec, s) * (t1 - t0)
               for t0, t1, spec in segrates.iter_pieces(a, b))


class HmmFactors:
    """Discrete-time conditional model of the skeleton on a fixed grid.

    Exposes the pieces FFBS and PGAS need: initial distribution, per-step
    kernels and per-step log-potentials (lazily evaluated functions so
    infinite state spaces work; finite backends tabulate).
    """

    def __init__(self, grid, t_max, init, kernel_fn, log_potential_fn,
                 states=None):
        self.grid = np.asarray(grid, dtype=float)
        self.t_max = float(t_max)
        self.init = init
        self._kernel_fn = kernel_fn
        self._log_potential_fn = log_potential_fn
        self.states = states
        self._table = None
        self._log_kernel_mats = {}

    @property
    def n(self) -> int:
        return len(self.grid)

    def kernel(self, k: int) -> SkeletonKernel:
        """Kernel of the transition s_{k-1} -> s_k (k = 1..n)."""
        return self._kernel_fn(k)

    def log_potential(self, k: int, states) -> np.ndarray:
        return np.asarray(self._log_potential_fn(k, states), dtype=float)

    # Finite-space helpers -------------------------------------------------

    def _require_finite(self):
        if self.states is None:
            raise UnsupportedModelError(
                "operation requires a finite, enumerable state space"
            )

    def potential_table(self) -> np.ndarray:
        """(n+1, K) table of log-potentials over the full state space."""
        self._require_finite()
        if self._table is None:
            codes = np.asarray(self.states)
            table = np.vstack([self.log_potential(k, codes)
                               for k in range(self.n + 1)])
            for k in range(self.n + 1):
                if not np.any(np.isfinite(table[k])):
                    raise DegeneratePotentialError(k)
            self._table = table
        return self._table

    def log_kernel_matrix(self, k: int) -> np.ndarray:
        self._require_finite()
        mat = self._log_kernel_mats.get(k)
        if mat is None:
            kernel = self.kernel(k)
            if hasattr(kernel, "log_matrix"):
                mat = kernel.log_matrix
            else:
                codes = list(self.states)
                mat = np.array([[kernel.logprob(s, s2) for s2 in codes]
                                for s in codes])
            self._log_kernel_mats[k] = mat
        return mat

    def log_initial_vector(self) -> np.ndarray:
        self._require_finite()
        return self.init.log_pmf_many(np.asarray(self.states))


def build_hmm_factors_segmented(segrates: SegmentedRates,
                                policy: AugmentationPolicy, init, grid,
                                evidence=(), states=None) -> HmmFactors:
    """Assemble HmmFactors for a (piecewise-homogeneous) conditioned skeleton.

    ``evidence`` mixes PointObservation and ChildProcessEvidence entries.
    Constant-in-skeleton factors are dropped: the result is the conditional
    law up to normalization.
    """
    grid = np.asarray(grid, dtype=float)
    t_max = segrates.t_max
    n = len(grid)
    point_obs = [e for e in evidence if isinstance(e, PointObservation)]
    child_evs = [e for e in evidence if isinstance(e, ChildProcessEvidence)]
    for ev in child_evs:
        if set(ev.child.times) & set(grid.tolist()):
            log.warning("child jump coincides with a grid point; "
                        "assigned to the earlier interval")

    obs_by_step: dict[int, list[PointObservation]] = {}
    steps = locate_observation_steps(grid, [o.t for o in point_obs])
    for ob, k in zip(point_obs, steps):
        if ob.t > t_max:
            raise UnsupportedModelError(
                f"observation at t={ob.t} beyond horizon {t_max}")
        obs_by_step.setdefault(k, []).append(ob)

    constant_rate = isinstance(policy, Uniformization)
    kernel_cache: dict[int, SkeletonKernel] = {}

    def kernel_fn(k: int) -> SkeletonKernel:
        seg = segrates.index_at(grid[k - 1])
        kernel = kernel_cache.get(seg)
        if kernel is None:
            kernel = build_kernel(segrates.specs[seg], policy)
            kernel_cache[seg] = kernel
        return kernel

    def bounds(k: int):
        a = 0.0 if k == 0 else float(grid[k - 1])
        b = t_max if k == n else float(grid[k])
        return a, b

    def log_potential_fn(k: int, states_arr) -> np.ndarray:
        arr = np.asarray(states_arr)
        count = len(arr) if arr.ndim >= 1 else 1
        out = np.zeros(count)
        a, b = bounds(k)
        if not constant_rate:
            # Holding factor: next-candidate intensity times survival at R.
            if len(segrates.specs) == 1:
                totals = policy.total_rate_many(segrates.specs[0], states_arr)
                out -= totals * (b - a)
                if k < n:
                    with np.errstate(divide="ignore"):
                        out += np.where(totals > 0, np.log(
                            np.where(totals > 0, totals, 1.0)), -np.inf)
            else:
                for i, s in enumerate(iter_states(states_arr)):
                    out[i] -= _total_rate_integral(policy, segrates, s, a, b)
                    if k < n:
                        out[i] += _log_or_neg_inf(
                            policy.total_rate(segrates.spec_at(b), s))
        for ob in obs_by_step.get(k, ()):
            out += ob.eval_many(states_arr)
        for ev in child_evs:
            state_list = iter_states(states_arr)
            out += np.array([ev.interval_loglik(s, a, b) for s in state_list])
        return out

    return HmmFactors(grid, t_max, init, kernel_fn, log_potential_fn,
                      states=states)


def _log_or_neg_inf(x: float) -> float:
    return float(np.log(x)) if x > 0 else -np.inf


def build_hmm_factors(q: RateSpec, policy: AugmentationPolicy, init, grid,
                      t_max: float, evidence=(), states=None) -> HmmFactors:
    """Homogeneous-rates convenience wrapper."""
    if states is None:
        states = getattr(q, "states", None)
    return build_hmm_factors_segmented(
        SegmentedRates.constant(q, t_max), policy, init, grid,
        evidence=evidence, states=states)


def child_process_potentials(child_ev: ChildProcessEvidence, grid,
                             t_max: float):
    """Per-step child-process log-potential g_k(s) as a function."""
    grid = np.asarray(grid, dtype=float)
    n = len(grid)

    def g(k: int, s) -> float:
        a = 0.0 if k == 0 else float(grid[k - 1])
        b = t_max if k == n else float(grid[k])
        return child_ev.interval_loglik(s, a, b)

    return g
