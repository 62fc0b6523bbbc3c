"""Sufficient statistics, effective sample size and test oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnsupportedModelError
from .evidence import HmmFactors, PointObservation
from .rates import DenseRateSpec
from .trajectory import Trajectory


@dataclass
class SuffStats:
    """Occupation time per state and total jump count of one trajectory."""

    occupation: dict
    jump_count: int


def sufficient_stats(traj: Trajectory, state_set=None) -> SuffStats:
    """Exact piecewise-constant integration of occupation times."""
    occ = {}
    if state_set is not None:
        occ = {_key(s): 0.0 for s in state_set}
    for t0, t1, s in traj.segments():
        occ[_key(s)] = occ.get(_key(s), 0.0) + (t1 - t0)
    return SuffStats(occupation=occ, jump_count=traj.m)


def _key(s):
    return tuple(s) if isinstance(s, (list, np.ndarray)) else s


def ess(series, return_flag: bool = False):
    """Effective sample size with Geyer initial-positive-sequence truncation.

    A constant series gets ESS = n (flagged when ``return_flag``).
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 10:
        raise ConfigError("need at least 10 values for an ESS estimate")
    if not np.all(np.isfinite(x)):
        raise ConfigError("series contains non-finite values")
    var = x.var()
    if var == 0.0:
        return (float(n), True) if return_flag else float(n)
    x = x - x.mean()
    # Autocovariances via FFT.
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    rho = acov / acov[0]
    # Sum of adjacent pairs must stay positive (Geyer).
    tail = 0.0
    for k in range(1, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tail += pair
    denom = 1.0 + 2.0 * tail
    value = float(np.clip(n / denom, 1e-12, n))
    return (value, False) if return_flag else value


@dataclass
class GridSummary:
    """Posterior mean and standard deviation of the state on a time grid."""

    grid: np.ndarray
    mean: np.ndarray
    sd: np.ndarray


def grid_summary(samples, grid) -> GridSummary:
    """Evaluate each sampled path on the grid (right-continuous) and
    aggregate."""
    grid = np.asarray(grid, dtype=float)
    values = np.array([[_as_number(traj.state_at(t)) for t in grid]
                       for traj in samples], dtype=float)
    return GridSummary(grid=grid, mean=values.mean(axis=0),
                       sd=values.std(axis=0))


def _as_number(s):
    if isinstance(s, tuple):
        return np.array(s, dtype=float)
    return float(s)


def exact_skeleton_posterior(factors: HmmFactors, max_size: int = 10**6):
    """Exhaustive skeleton posterior by enumeration (test oracle)."""
    states = list(factors.states or ())
    if not states:
        raise UnsupportedModelError("enumeration needs a finite state space")
    n = factors.n
    if len(states) ** (n + 1) > max_size:
        raise ConfigError("skeleton space too large to enumerate")
    table = factors.potential_table()
    log_init = factors.log_initial_vector()
    log_kernels = [factors.log_kernel_matrix(k) for k in range(1, n + 1)]
    out = {}
    for codes in itertools.product(range(len(states)), repeat=n + 1):
        logp = log_init[codes[0]] + table[0][codes[0]]
        for k in range(1, n + 1):
            logp += log_kernels[k - 1][codes[k - 1], codes[k]]
            logp += table[k][codes[k]]
        out[tuple(states[c] for c in codes)] = math.exp(logp)
    total = sum(out.values())
    if total <= 0:
        raise ConfigError("posterior mass is zero on every skeleton")
    return {skel: p / total for skel, p in out.items()}


def discretized_smoother(q: DenseRateSpec, init, evidence, t_max: float,
                         h: float = 1e-3):
    """Occupation-time posterior expectations from a fine Euler-discretized
    HMM with forward-backward smoothing (independent oracle, O(h) bias)."""
    n_steps = int(round(t_max / h))
    full_q = q.matrix - np.diag(q.exit_rate_many(np.arange(q.n_states)))
    trans = np.eye(q.n_states) + h * full_q
    if np.any(trans < 0):
        raise ConfigError(f"time step {h} too large for these rates")
    obs_logs = np.zeros((n_steps + 1, q.n_states))
    for ev in evidence:
        if not isinstance(ev, PointObservation):
            raise UnsupportedModelError(
                "discretized smoother supports point observations only")
        idx = int(round(ev.t / h))
        obs_logs[idx] += ev.eval_many(np.arange(q.n_states))
    # Forward pass (scaled).
    alphas = np.zeros((n_steps + 1, q.n_states))
    a = init.log_pmf_many(np.arange(q.n_states))
    a = np.exp(a - a.max()) * np.exp(obs_logs[0] - obs_logs[0].max())
    a /= a.sum()
    alphas[0] = a
    for k in range(1, n_steps + 1):
        a = a @ trans
        like = np.exp(obs_logs[k] - obs_logs[k].max())
        a = a * like
        a /= a.sum()
        alphas[k] = a
    # Backward pass.
    smoothed = np.zeros_like(alphas)
    b = np.ones(q.n_states)
    smoothed[-1] = alphas[-1]
    for k in range(n_steps - 1, -1, -1):
        like = np.exp(obs_logs[k + 1] - obs_logs[k + 1].max())
        b = trans @ (like * b)
        b /= b.max()
        post = alphas[k] * b
        smoothed[k] = post / post.sum()
    # Trapezoidal occupation integral.
    weights = np.full(n_steps + 1, h)
    weights[0] = weights[-1] = h / 2
    return smoothed.T @ weights


def ess_summary(records) -> dict:
    """Per-statistic ESS from chain records plus the whole-model median."""
    series: dict = {}
    for row in records:
        key_occ = ("occupation", row["node"], row["state"])
        series.setdefault(key_occ, []).append(row["occupation_time"])
        key_jump = ("jumps", row["node"])
        series.setdefault(key_jump, {})
        series[key_jump][row["iteration"]] = row["jump_count"]
    out = {}
    for key, values in series.items():
        if isinstance(values, dict):
            values = [values[i] for i in sorted(values)]
        if len(values) >= 10:
            out["/".join(str(p) for p in key)] = ess(values)
    med = float(np.median(list(out.values()))) if out else float("nan")
    return {"ess": out, "median_ess": med}
