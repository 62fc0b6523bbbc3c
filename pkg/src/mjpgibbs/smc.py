"""Sequential Monte Carlo over skeleton HMM factors: SMC, FFBS and PGAS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, WeightCollapseError
from .evidence import HmmFactors

_PRIOR_PROPOSAL = object()


def _softmax(logw: np.ndarray) -> np.ndarray:
    m = np.max(logw)
    if not np.isfinite(m):
        raise WeightCollapseError(-1)
    w = np.exp(logw - m)
    return w / w.sum()


def multinomial_resample(logw, count: int, rng) -> np.ndarray:
    """i.i.d. ancestor indices with probabilities softmax(logw)."""
    probs = _softmax(np.asarray(logw, dtype=float))
    return rng.choice(len(probs), size=count, p=probs)


def _state_entry(arr: np.ndarray, i: int):
    entry = arr[i]
    if np.ndim(entry) > 0:
        return tuple(int(x) for x in entry)
    return entry.item() if hasattr(entry, "item") else entry


def _set_entry(arr: np.ndarray, i: int, state):
    arr[i] = np.asarray(state)


@dataclass
class ParticleSystem:
    """Per-step particle states, log-weights and ancestor indices."""

    step_states: list
    log_weights: list
    ancestors: list

    @property
    def n(self) -> int:
        return len(self.step_states) - 1

    @property
    def n_particles(self) -> int:
        return len(self.log_weights[0])

    def path(self, i: int) -> list:
        """Trace particle i's genealogy back to step 0."""
        out = []
        idx = i
        for k in range(self.n, -1, -1):
            out.append(_state_entry(self.step_states[k], idx))
            if k > 0:
                idx = int(self.ancestors[k - 1][idx])
        out.reverse()
        return out


def smc_run(factors: HmmFactors, n_particles: int, rng,
            init_proposal=_PRIOR_PROPOSAL):
    """Bootstrap SMC with the prior pair (initial law, skeleton kernel).

    Returns the particle system and the unbiased log-normalizing-constant
    estimate sum_k log mean_i w_k^i.
    """
    if n_particles < 1:
        raise ConfigError("need at least one particle")
    if init_proposal is _PRIOR_PROPOSAL:
        states = np.asarray(factors.init.sample_many(n_particles, rng))
        logw = factors.log_potential(0, states)
    else:
        sample_many, log_pmf_many = init_proposal
        states = np.asarray(sample_many(n_particles, rng))
        logw = (factors.log_potential(0, states)
                + factors.init.log_pmf_many(states) - log_pmf_many(states))
    _check_weights(logw, 0)
    step_states, log_weights, ancestors = [states], [logw], []
    log_z = float(logsumexp(logw) - np.log(n_particles))
    for k in range(1, factors.n + 1):
        anc = multinomial_resample(log_weights[-1], n_particles, rng)
        kernel = factors.kernel(k)
        states = np.asarray(kernel.sample_many(step_states[-1][anc], rng))
        logw = factors.log_potential(k, states)
        _check_weights(logw, k)
        step_states.append(states)
        log_weights.append(logw)
        ancestors.append(anc)
        log_z += float(logsumexp(logw) - np.log(n_particles))
    return ParticleSystem(step_states, log_weights, ancestors), log_z


def _check_weights(logw: np.ndarray, step: int):
    if not np.any(np.isfinite(logw)):
        raise WeightCollapseError(step)


def _sample_from_log(logp: np.ndarray, rng) -> int:
    return int(rng.choice(len(logp), p=_softmax(logp)))


def ffbs_sample(factors: HmmFactors, rng) -> list:
    """Exact skeleton draw by forward filtering and backward sampling.

    Requires a finite, tabulated state space.
    """
    table = factors.potential_table()
    alpha = factors.log_initial_vector() + table[0]
    alphas = [alpha]
    for k in range(1, factors.n + 1):
        log_p = factors.log_kernel_matrix(k)
        with np.errstate(invalid="ignore"):
            alpha = table[k] + logsumexp(alpha[:, None] + log_p, axis=0)
        alphas.append(alpha)
    codes = [_sample_from_log(alphas[-1], rng)]
    for k in range(factors.n - 1, -1, -1):
        log_p = factors.log_kernel_matrix(k + 1)
        codes.append(_sample_from_log(alphas[k] + log_p[:, codes[-1]], rng))
    codes.reverse()
    states = list(factors.states)
    return [states[c] for c in codes]


def pgas_step(factors: HmmFactors, reference, n_particles: int, rng,
              init_proposal=_PRIOR_PROPOSAL) -> list:
    """One conditional-SMC-with-ancestor-sampling update of the skeleton.

    The reference path occupies the last particle slot and is never
    propagated; its ancestor at each step is redrawn over the full weighted
    pre-resampling particle set with probability proportional to
    w_{k-1}^i P(xi_{k-1}^i, s_k). The induced kernel leaves the conditional
    skeleton law invariant for every particle count >= 2.
    """
    reference = list(reference)
    if n_particles < 2:
        raise ConfigError("conditional SMC needs at least 2 particles")
    if len(reference) != factors.n + 1:
        raise ConfigError(
            f"reference skeleton has length {len(reference)}, "
            f"expected {factors.n + 1}")
    ref_arr = np.asarray(reference)
    for k in range(factors.n + 1):
        g_ref = factors.log_potential(k, ref_arr[k:k + 1])[0]
        if not np.isfinite(g_ref):
            raise ConfigError(
                f"reference skeleton has zero potential at step {k}")

    n_free = n_particles - 1
    free0 = np.asarray(factors.init.sample_many(n_free, rng))
    if init_proposal is not _PRIOR_PROPOSAL:
        sample_many, log_pmf_many = init_proposal
        free0 = np.asarray(sample_many(n_free, rng))
    states = _append_state(free0, reference[0])
    logw = factors.log_potential(0, states)
    if init_proposal is not _PRIOR_PROPOSAL:
        # Same weight function for every slot, reference included.
        logw = logw + factors.init.log_pmf_many(states) - log_pmf_many(states)
    _check_weights(logw, 0)
    step_states, log_weights, ancestors = [states], [logw], []

    for k in range(1, factors.n + 1):
        kernel = factors.kernel(k)
        prev_states = step_states[-1]
        prev_logw = log_weights[-1]
        # Ancestor resampling for the reference path (pre-resampling system).
        anc_logw = prev_logw + kernel.logprob_to(prev_states, reference[k])
        ref_anc = _sample_from_log(anc_logw, rng)
        free_anc = multinomial_resample(prev_logw, n_free, rng)
        anc = np.concatenate([free_anc, [ref_anc]])
        new_free = np.asarray(kernel.sample_many(prev_states[free_anc], rng))
        states = _append_state(new_free, reference[k])
        logw = factors.log_potential(k, states)
        _check_weights(logw, k)
        step_states.append(states)
        log_weights.append(logw)
        ancestors.append(anc)

    system = ParticleSystem(step_states, log_weights, ancestors)
    chosen = _sample_from_log(log_weights[-1], rng)
    return system.path(chosen)


def _append_state(arr: np.ndarray, state) -> np.ndarray:
    extra = np.asarray(state)
    if arr.ndim > 1:
        return np.vstack([arr, extra[None, :]])
    return np.concatenate([arr, extra[None]])
