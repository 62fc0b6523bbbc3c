"""Exact log-densities of trajectories, with and without virtual jumps."""

from __future__ import annotations

import bisect
import math

import numpy as np

from .augment import AugmentationPolicy
from .rates import RateSpec
from .trajectory import AugmentedTrajectory, Trajectory


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -np.inf


def log_density_trajectory(q: RateSpec, nu, traj: Trajectory) -> float:
    """Log path density: jump rates, exponential holdings and the final
    survival factor past the last jump."""
    logp = nu.log_pmf(traj.s0)
    prev_t = 0.0
    prev_s = traj.s0
    for t, s in zip(traj.times, traj.states):
        logp += _log(q.rate(prev_s, s)) - q.exit_rate(prev_s) * (t - prev_t)
        prev_t, prev_s = t, s
    logp -= q.exit_rate(prev_s) * (traj.t_max - prev_t)
    return float(logp)


def log_density_virtual(aug: AugmentedTrajectory, q: RateSpec,
                        policy: AugmentationPolicy) -> float:
    """Log conditional density of the virtual jumps given the true path.

    Per segment in state s the virtual times are Poisson with rate
    R(s) - Q(s).
    """
    traj = aug.strip()
    true_idx = set(aug.true_jump_indices())
    counts: dict[int, int] = {}
    for k in range(aug.n):
        if k not in true_idx:
            j = _segment_index(traj, aug.times[k])
            counts[j] = counts.get(j, 0) + 1
    logp = 0.0
    for j, (t0, t1, s) in enumerate(traj.segments()):
        extra = policy.total_rate(q, s) - q.exit_rate(s)
        count = counts.get(j, 0)
        if count and extra <= 0:
            return -np.inf
        if extra > 0:
            logp += count * math.log(extra)
        logp -= extra * (t1 - t0)
    return float(logp)


def _segment_index(traj: Trajectory, t: float) -> int:
    return bisect.bisect_right(traj.times, t)


def log_density_augmented(q: RateSpec, policy: AugmentationPolicy, nu,
                          aug: AugmentedTrajectory) -> float:
    """Log joint density of grid times and redundant skeleton.

    Holding over each grid interval uses the dominating rate of the state in
    force on that interval; stay steps contribute R(s)-Q(s), moves Q(s,s').
    """
    logp = nu.log_pmf(aug.s0)
    prev_t = 0.0
    prev_s = aug.s0
    for t, s in zip(aug.times, aug.states):
        total = policy.total_rate(q, prev_s)
        logp -= total * (t - prev_t)
        if s == prev_s:
            logp += _log(total - q.exit_rate(prev_s))
        else:
            logp += _log(q.rate(prev_s, s))
        prev_t, prev_s = t, s
    logp -= policy.total_rate(q, prev_s) * (aug.t_max - prev_t)
    return float(logp)
