"""Batched, compiled skeleton draws over fixed tabulated HMM factors.

These mirror `ffbs_sample` and `pgas_step` for finite state spaces when the
grid and potentials are held fixed, so large numbers of independent
repetitions (exactness and invariance checks) run at compiled speed. The
forward filter is deterministic given the factors and is computed once; only
the backward/particle passes are repeated.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import logsumexp

from .engine_ctbn import _categorical_from_log, _seed
from .errors import ConfigError
from .evidence import HmmFactors

_NEG_INF = -np.inf


def tabulate_factors(factors: HmmFactors):
    """Dense arrays (log_init, log potentials, log kernels, cumulative
    kernels, cumulative initial law) for the compiled passes."""
    table = np.asarray(factors.potential_table(), dtype=float)
    log_init = np.asarray(factors.log_initial_vector(), dtype=float)
    n, k = factors.n, table.shape[1]
    logk = np.empty((max(n, 1), k, k))
    cumk = np.empty((max(n, 1), k, k))
    for step in range(1, n + 1):
        logk[step - 1] = factors.log_kernel_matrix(step)
        cumk[step - 1] = np.cumsum(np.exp(logk[step - 1]), axis=1)
    init_probs = np.exp(log_init - logsumexp(log_init))
    init_cum = np.cumsum(init_probs)
    return log_init, table, logk, cumk, init_cum


def forward_filter(factors: HmmFactors) -> np.ndarray:
    """(n+1, K) forward log-messages alpha_k(s)."""
    table = factors.potential_table()
    alpha = factors.log_initial_vector() + table[0]
    out = [alpha]
    for k in range(1, factors.n + 1):
        log_p = factors.log_kernel_matrix(k)
        with np.errstate(invalid="ignore"):
            alpha = table[k] + logsumexp(alpha[:, None] + log_p, axis=0)
        out.append(alpha)
    return np.asarray(out)


@njit(cache=True)
def _backward_draw(alphas, logk, n, k_states, out):
    back = np.empty(k_states)
    out[n] = _categorical_from_log(alphas[n], k_states)
    for step in range(n - 1, -1, -1):
        for s in range(k_states):
            back[s] = alphas[step, s] + logk[step, s, out[step + 1]]
        out[step] = _categorical_from_log(back, k_states)


@njit(cache=True)
def _ffbs_batch(alphas, logk, n, k_states, reps, out):
    for r in range(reps):
        _backward_draw(alphas, logk, n, k_states, out[r])


@njit(cache=True)
def _pgas_once(ref, table, logk, cumk, init_cum, n, k_states, n_particles,
               part, anc, logw, prev_logw, awork, probs, out):
    for i in range(n_particles - 1):
        u = np.random.random()
        lo, hi = 0, k_states - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if init_cum[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        part[0, i] = lo
    part[0, n_particles - 1] = ref[0]
    for i in range(n_particles):
        logw[i] = table[0, part[0, i]]
    for k in range(1, n + 1):
        for i in range(n_particles):
            prev_logw[i] = logw[i]
            awork[i] = prev_logw[i] + logk[k - 1, part[k - 1, i], ref[k]]
        anc[k - 1, n_particles - 1] = _categorical_from_log(awork,
                                                            n_particles)
        m = _NEG_INF
        for i in range(n_particles):
            if prev_logw[i] > m:
                m = prev_logw[i]
        total = 0.0
        for i in range(n_particles):
            probs[i] = np.exp(prev_logw[i] - m)
            total += probs[i]
        for i in range(n_particles - 1):
            u = np.random.random() * total
            acc = 0.0
            pick = n_particles - 1
            for j in range(n_particles):
                acc += probs[j]
                if u < acc:
                    pick = j
                    break
            anc[k - 1, i] = pick
            s_prev = part[k - 1, pick]
            u2 = np.random.random()
            lo, hi = 0, k_states - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if cumk[k - 1, s_prev, mid] > u2:
                    hi = mid
                else:
                    lo = mid + 1
            part[k, i] = lo
        part[k, n_particles - 1] = ref[k]
        for i in range(n_particles):
            logw[i] = table[k, part[k, i]]
    pick = _categorical_from_log(logw, n_particles)
    for k in range(n, -1, -1):
        out[k] = part[k, pick]
        if k > 0:
            pick = anc[k - 1, pick]


@njit(cache=True)
def _pgas_refresh_batch(alphas, table, logk, cumk, init_cum, n, k_states,
                        n_particles, reps, out):
    ref = np.empty(n + 1, dtype=np.int64)
    part = np.empty((n + 1, n_particles), dtype=np.int64)
    anc = np.empty((max(n, 1), n_particles), dtype=np.int64)
    logw = np.empty(n_particles)
    prev_logw = np.empty(n_particles)
    awork = np.empty(n_particles)
    probs = np.empty(n_particles)
    for r in range(reps):
        _backward_draw(alphas, logk, n, k_states, ref)
        _pgas_once(ref, table, logk, cumk, init_cum, n, k_states,
                   n_particles, part, anc, logw, prev_logw, awork, probs,
                   out[r])


def ffbs_draws(factors: HmmFactors, reps: int, seed: int) -> np.ndarray:
    """`reps` independent exact skeleton draws, as (reps, n+1) state codes."""
    alphas = forward_filter(factors)
    _, _, logk, _, _ = tabulate_factors(factors)
    out = np.empty((reps, factors.n + 1), dtype=np.int64)
    _seed(int(seed) % (2**32))
    _ffbs_batch(alphas, logk, factors.n, alphas.shape[1], reps, out)
    return out


def pgas_refresh_draws(factors: HmmFactors, n_particles: int, reps: int,
                       seed: int) -> np.ndarray:
    """Draw an exact skeleton, apply one conditional-SMC update, repeat.

    Each row is the post-update skeleton of an independent repetition; under
    invariance these are exact draws from the skeleton posterior.
    """
    if n_particles < 2:
        raise ConfigError("conditional SMC needs at least 2 particles")
    alphas = forward_filter(factors)
    _, table, logk, cumk, init_cum = tabulate_factors(factors)
    out = np.empty((reps, factors.n + 1), dtype=np.int64)
    _seed(int(seed) % (2**32))
    _pgas_refresh_batch(alphas, table, logk, cumk, init_cum, factors.n,
                        alphas.shape[1], n_particles, reps, out)
    return out


def skeleton_codes(draws: np.ndarray, k_states: int) -> np.ndarray:
    """Encode skeletons as base-K integers for frequency comparisons."""
    powers = k_states ** np.arange(draws.shape[1])
    return draws @ powers
