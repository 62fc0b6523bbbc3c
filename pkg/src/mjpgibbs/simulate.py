"""Forward simulation: Gillespie, thinning, and virtual-jump resampling."""

from __future__ import annotations

import numpy as np

from .augment import AugmentationPolicy, build_kernel
from .errors import ExplosionError, PolicyViolationError
from .rates import RateSpec
from .trajectory import AugmentedTrajectory, Trajectory

DEFAULT_JUMP_CAP = 10**6


def simulate_gillespie(q: RateSpec, nu, t_max: float, rng,
                       max_jumps: int = DEFAULT_JUMP_CAP) -> Trajectory:
    """Exact forward draw: exponential holding times, targets chosen by rate."""
    s = nu.sample(rng)
    s0 = s
    t = 0.0
    times, states = [], []
    while True:
        exit_rate = q.exit_rate(s)
        if exit_rate <= 0.0:
            break  # absorbing state
        t += rng.exponential(1.0 / exit_rate)
        if t >= t_max:
            break
        if len(times) >= max_jumps:
            raise ExplosionError(
                f"more than {max_jumps} jumps before t={t_max}; "
                "rates look explosive or mis-specified"
            )
        u = rng.uniform() * exit_rate
        acc = 0.0
        for target in q.targets(s):
            acc += q.rate(s, target)
            if u < acc:
                s = target
                break
        times.append(t)
        states.append(s)
    return Trajectory(s0=s0, times=tuple(times), states=tuple(states), t_max=t_max)


def thinning_sample(q: RateSpec, policy: AugmentationPolicy, nu, t_max: float,
                    rng, max_jumps: int = DEFAULT_JUMP_CAP) -> AugmentedTrajectory:
    """Dominating-rate candidate times, accepted as true jumps w.p. Q(s)/R(s).

    Candidates past t_max are discarded; the grid lies strictly inside
    (0, t_max).
    """
    kernel = build_kernel(q, policy)
    s = nu.sample(rng)
    s0 = s
    t = 0.0
    times, states = [], []
    while True:
        total = policy.total_rate(q, s)
        if total < q.exit_rate(s):
            raise PolicyViolationError(s, total, q.exit_rate(s))
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t >= t_max:
            break
        if len(times) >= max_jumps:
            raise ExplosionError(
                f"more than {max_jumps} potential jumps before t={t_max}"
            )
        s = kernel.sample(s, rng)
        times.append(t)
        states.append(s)
    return AugmentedTrajectory(s0=s0, times=tuple(times), states=tuple(states),
                               t_max=t_max)


def _segment_virtual_times(t0: float, t1: float, extra_rate: float, rng):
    count = rng.poisson(extra_rate * (t1 - t0))
    return np.sort(rng.uniform(t0, t1, size=count))


def resample_virtual(traj: Trajectory, q: RateSpec, policy: AugmentationPolicy,
                     rng) -> AugmentedTrajectory:
    """Insert fresh virtual jumps; true jumps and skeleton stay fixed.

    Within a segment where the path sits in state s, virtual times form a
    Poisson process with rate R(s) - Q(s).
    """
    times, states = [], []
    for t0, t1, s in traj.segments():
        extra = policy.total_rate(q, s) - q.exit_rate(s)
        if extra < 0:
            raise PolicyViolationError(s, policy.total_rate(q, s), q.exit_rate(s))
        if extra > 0:
            draws = _segment_virtual_times(t0, t1, extra, rng)
            # A floating-point tie (with a boundary or between draws) is a
            # probability-zero event; redraw the whole segment if one occurs.
            while len(draws) and (np.any(np.diff(draws) <= 0)
                                  or draws[0] <= t0 or draws[-1] >= t1):
                draws = np.sort(rng.uniform(t0, t1, size=len(draws)))
            for t in draws:
                times.append(float(t))
                states.append(s)
        if t1 < traj.t_max:
            times.append(t1)
            states.append(traj.state_at(t1))
    return AugmentedTrajectory(s0=traj.s0, times=tuple(times),
                               states=tuple(states), t_max=traj.t_max)
