"""Compiled Gibbs-sweep engine for finite networks with chain-like structure.

Mirrors the pure-python sampler (virtual-jump refresh, then FFBS or particle
update of each hidden node's skeleton) but runs whole sweeps inside numba so
per-sweep cost reflects the algorithms, not interpreter overhead. Supported
models: every node has at most one parent and at most one child, finite
per-node state spaces, exact point observations (state pins), and fully
observed nodes entering as child evidence. Anything else falls back to the
reference implementation.

The forward-filtering update is O(n K^2) per node and the particle update is
O(n (N + log K)), which is what the cost-scaling experiment measures.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .augment import HomogeneousVirtual, ScaledExit, Uniformization
from .ctbn import CtbnPath
from .errors import ConfigError, UnsupportedModelError
from .rates import DenseRateSpec, FiniteInitial, PointMassInitial
from .trajectory import Trajectory

_POL_UNIFORM = 0
_POL_SURPLUS = 1
_POL_SCALED = 2

_NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# Compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True, inline="always")
def _total_rate(kind, param, exit_rate):
    if kind == _POL_UNIFORM:
        return param
    if kind == _POL_SURPLUS:
        return exit_rate + param
    return param * exit_rate


@njit(cache=True)
def _categorical_from_log(logw, n):
    m = _NEG_INF
    for i in range(n):
        if logw[i] > m:
            m = logw[i]
    total = 0.0
    for i in range(n):
        total += np.exp(logw[i] - m)
    u = np.random.random() * total
    acc = 0.0
    for i in range(n):
        acc += np.exp(logw[i] - m)
        if u < acc:
            return i
    return n - 1


@njit(cache=True)
def _searchsorted_right(arr, n, x):
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _parent_pieces(w, parent, times, states, n_jumps, s0_arr, t_max,
                   pb, pstate):
    """Fill parent breakpoints/states for node w; returns piece count."""
    p = parent[w]
    if p < 0:
        pb[0] = 0.0
        pb[1] = t_max
        pstate[0] = 0
        return 1
    m = n_jumps[p]
    pb[0] = 0.0
    pstate[0] = s0_arr[p]
    for j in range(m):
        pb[j + 1] = times[p, j]
        pstate[j + 1] = states[p, j]
    pb[m + 1] = t_max
    return m + 1


@njit(cache=True)
def _resample_grid(w, s0_arr, times, states, n_jumps, t_max,
                   kind, param, exits, n_pieces, pb, pstate,
                   gt, gs, cap):
    """Refresh virtual jumps for node w on its current path.

    Writes the merged potential-jump grid (times gt, skeleton states gs)
    and returns its length, or -1 when the buffer is too small.
    """
    m = n_jumps[w]
    n = 0
    seg_start = 0.0
    s = s0_arr[w]
    j = 0  # parent piece index
    for i in range(m + 1):
        seg_end = times[w, i] if i < m else t_max
        # advance to the parent piece containing seg_start
        while j + 1 < n_pieces and pb[j + 1] <= seg_start:
            j += 1
        jj = j
        a = seg_start
        while a < seg_end:
            b = seg_end if pb[jj + 1] > seg_end else pb[jj + 1]
            p = pstate[jj]
            exit_rate = exits[w, p, s]
            surplus = _total_rate(kind, param, exit_rate) - exit_rate
            if surplus > 0.0:
                # Poisson process on (a, b) via exponential gaps
                t = a + np.random.exponential(1.0 / surplus)
                while t < b:
                    if t > a:  # skip probability-zero float tie with a
                        if n >= cap:
                            return -1
                        gt[n] = t
                        gs[n] = s
                        n += 1
                    t += np.random.exponential(1.0 / surplus)
            a = b
            jj += 1
        if i < m:
            if n >= cap:
                return -1
            gt[n] = times[w, i]
            gs[n] = states[w, i]
            s = states[w, i]
            n += 1
        seg_start = seg_end
    return n


@njit(cache=True)
def _write_back(w, skel, n, gt, s0_arr, times, states, n_jumps):
    """Strip the new redundant skeleton back into the node's trajectory."""
    s0_arr[w] = skel[0]
    count = 0
    prev = skel[0]
    for k in range(n):
        if skel[k + 1] != prev:
            times[w, count] = gt[k]
            states[w, count] = skel[k + 1]
            prev = skel[k + 1]
            count += 1
    n_jumps[w] = count


@njit(cache=True)
def _build_gmat(w, kw, n, gt, t_max, kindw, n_pieces, pb, pstate,
                n_pins, pin_step, pin_state_arr, child,
                s0_arr, times, states, n_jumps,
                tot, log_tot, lograte_t, exits_ct, gmat, parr):
    """Log-potential of every grid step at every state, in one pass.

    Each contribution -- the holding integral against the parent pieces,
    the skeleton-rate factor at each transition, the child's jump factors
    and exit-rate integral, and the exact-observation masks -- is a
    contiguous table row applied to the affected step, so the whole matrix
    costs one merged traversal of the timelines instead of per-step
    searches.  Also records in parr the parent state in force at each
    transition time, which the skeleton kernel needs later.
    """
    for k in range(n + 1):
        for s in range(kw):
            gmat[k, s] = np.float32(0.0)
    if kindw != _POL_UNIFORM:
        # holding integral plus the exit-total factor at each transition;
        # with a state-independent total rate both are flat over states
        # and cancel in the normalisation, so they are skipped above.
        j = 0
        t0 = 0.0
        for k in range(n + 1):
            b = t_max if k == n else gt[k]
            while True:
                t1 = pb[j + 1] if pb[j + 1] < b else b
                row = tot[w, pstate[j]]
                dt = np.float32(t1 - t0)
                for s in range(kw):
                    gmat[k, s] -= row[s] * dt
                t0 = t1
                if t0 >= b:
                    break
                j += 1
            while j + 1 < n_pieces and pb[j + 1] <= b:
                j += 1
            if k < n:
                parr[k + 1] = pstate[j]
                row2 = log_tot[w, pstate[j]]
                for s in range(kw):
                    gmat[k, s] += row2[s]
    else:
        j = 0
        for k in range(1, n + 1):
            b = gt[k - 1]
            while j + 1 < n_pieces and pb[j + 1] <= b:
                j += 1
            parr[k] = pstate[j]
    u = child[w]
    if u >= 0:
        m = n_jumps[u]
        # a child jump exactly at a grid time belongs to the step it ends
        k = 0
        for jj in range(m):
            t = times[u, jj]
            while k < n and gt[k] < t:
                k += 1
            y0 = s0_arr[u] if jj == 0 else states[u, jj - 1]
            row = lograte_t[u, y0, states[u, jj]]
            for s in range(kw):
                gmat[k, s] += row[s]
        # child exit-rate integral: merge child pieces with grid steps
        jj = 0
        k = 0
        t0 = 0.0
        y = s0_arr[u]
        while t0 < t_max:
            tj = times[u, jj] if jj < m else t_max
            b = gt[k] if k < n else t_max
            t1 = tj if tj < b else b
            row = exits_ct[u, y]
            dt = np.float32(t1 - t0)
            for s in range(kw):
                gmat[k, s] -= row[s] * dt
            t0 = t1
            if jj < m and t1 == tj:
                y = states[u, jj]
                jj += 1
            if k < n and t1 == b:
                k += 1
    # exact observations: mask the step to the pinned state; two
    # conflicting pins on one step leave the whole row impossible
    for i in range(n_pins):
        k = pin_step[i]
        ps = pin_state_arr[i]
        keep = gmat[k, ps]
        for s in range(kw):
            gmat[k, s] = np.float32(_NEG_INF)
        gmat[k, ps] = keep


@njit(cache=True)
def _update_node_ffbs(w, kw, s0_arr, times, states, n_jumps, t_max,
                      kind, param, exits, tot, log_tot, lograte_t, exits_ct,
                      logk, init_logp,
                      parent, child, pin_t, pin_s, pin_lo, pin_hi,
                      gt, gs, skel, pb, pstate, cap, alpha,
                      pin_step, pin_state_arr, parr, back, gmat):
    n_pieces = _parent_pieces(w, parent, times, states, n_jumps, s0_arr,
                              t_max, pb, pstate)
    n = _resample_grid(w, s0_arr, times, states, n_jumps, t_max,
                       kind[w], param[w], exits, n_pieces, pb, pstate,
                       gt, gs, cap)
    if n < 0:
        return -1
    n_pins = pin_hi - pin_lo
    for i in range(n_pins):
        pin_step[i] = _searchsorted_right(gt, n, pin_t[pin_lo + i])
        pin_state_arr[i] = pin_s[pin_lo + i]
    _build_gmat(w, kw, n, gt, t_max, kind[w], n_pieces, pb, pstate, n_pins,
                pin_step, pin_state_arr, child, s0_arr, times, states,
                n_jumps, tot, log_tot, lograte_t, exits_ct, gmat, parr)
    # forward filtering in log space, quadratic in the state-space size
    for s in range(kw):
        alpha[0, s] = init_logp[w, s] + gmat[0, s]
    for k in range(1, n + 1):
        p = parr[k]
        for s2 in range(kw):
            m = _NEG_INF
            for s in range(kw):
                v = alpha[k - 1, s] + logk[w, p, s, s2]
                if v > m:
                    m = v
            acc = 0.0
            if m > _NEG_INF:
                for s in range(kw):
                    acc += np.exp(alpha[k - 1, s] + logk[w, p, s, s2] - m)
            lse = m + np.log(acc) if acc > 0.0 else _NEG_INF
            alpha[k, s2] = gmat[k, s2] + lse
    ok = False
    for s in range(kw):
        if alpha[n, s] > _NEG_INF:
            ok = True
    if not ok:
        return -2
    # backward sampling
    skel[n] = _categorical_from_log(alpha[n], kw)
    for k in range(n - 1, -1, -1):
        p = parr[k + 1]
        for s in range(kw):
            back[s] = alpha[k, s] + logk[w, p, s, skel[k + 1]]
        skel[k] = _categorical_from_log(back, kw)
    _write_back(w, skel, n, gt, s0_arr, times, states, n_jumps)
    return n


@njit(cache=True)
def _update_node_pgas(w, kw, n_particles, s0_arr, times, states, n_jumps,
                      t_max, kind, param, exits, tot, log_tot, lograte_t,
                      exits_ct, logk_anc, stay, alias,
                      init_logp, init_cum, parent, child,
                      pin_t, pin_s, pin_lo, pin_hi,
                      gt, gs, skel, pb, pstate, cap,
                      pin_step, pin_state_arr, parr, gmat):
    n_pieces = _parent_pieces(w, parent, times, states, n_jumps, s0_arr,
                              t_max, pb, pstate)
    # keep the reference skeleton before the grid is refreshed
    ref0 = s0_arr[w]
    n = _resample_grid(w, s0_arr, times, states, n_jumps, t_max,
                       kind[w], param[w], exits, n_pieces, pb, pstate,
                       gt, gs, cap)
    if n < 0:
        return -1
    n_pins = pin_hi - pin_lo
    for i in range(n_pins):
        pin_step[i] = _searchsorted_right(gt, n, pin_t[pin_lo + i])
        pin_state_arr[i] = pin_s[pin_lo + i]
    _build_gmat(w, kw, n, gt, t_max, kind[w], n_pieces, pb, pstate, n_pins,
                pin_step, pin_state_arr, child, s0_arr, times, states,
                n_jumps, tot, log_tot, lograte_t, exits_ct, gmat, parr)

    part = np.empty((n + 1, n_particles), dtype=np.int64)
    anc = np.empty((n, n_particles), dtype=np.int64)
    logw = np.empty(n_particles)
    prev_logw = np.empty(n_particles)
    cum = np.empty(n_particles)
    awork = np.empty(n_particles)

    # step 0: free particles from the initial law, reference in the last slot
    for i in range(n_particles - 1):
        u = np.random.random()
        lo = 0
        hi = kw - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if init_cum[w, mid] > u:
                hi = mid
            else:
                lo = mid + 1
        part[0, i] = lo
    part[0, n_particles - 1] = ref0
    for i in range(n_particles):
        logw[i] = gmat[0, part[0, i]]
    ok = False
    for i in range(n_particles):
        if logw[i] > _NEG_INF:
            ok = True
    if not ok:
        return -2

    for k in range(1, n + 1):
        ref_k = gs[k - 1]
        # parent state in force at the transition time gt[k-1]
        p = parr[k]
        for i in range(n_particles):
            prev_logw[i] = logw[i]
        # reference ancestor over the weighted pre-resampling system
        for i in range(n_particles):
            awork[i] = prev_logw[i] + logk_anc[w, p, ref_k, part[k - 1, i]]
        anc[k - 1, n_particles - 1] = _categorical_from_log(awork,
                                                            n_particles)
        # free ancestors: multinomial on the previous weights via the
        # cumulative distribution and binary search
        m = _NEG_INF
        for i in range(n_particles):
            if prev_logw[i] > m:
                m = prev_logw[i]
        total = 0.0
        for i in range(n_particles):
            total += np.exp(prev_logw[i] - m)
            cum[i] = total
        for i in range(n_particles - 1):
            u = np.random.random() * total
            lo2 = 0
            hi2 = n_particles - 1
            while lo2 < hi2:
                mid2 = (lo2 + hi2) // 2
                if cum[mid2] > u:
                    hi2 = mid2
                else:
                    lo2 = mid2 + 1
            pick = lo2
            anc[k - 1, i] = pick
            # propagate through the skeleton kernel: explicit
            # self-transition stage, then an O(1) alias draw over the
            # jump distribution on the residual uniform
            s_prev = part[k - 1, pick]
            u2 = np.random.random()
            st = stay[w, p, s_prev]
            if u2 < st:
                part[k, i] = s_prev
            else:
                v = (u2 - st) / (1.0 - st) * kw
                cell = int(v)
                if cell >= kw:
                    cell = kw - 1
                if v - cell < alias[w, p, s_prev, cell, 0]:
                    part[k, i] = cell
                else:
                    part[k, i] = int(alias[w, p, s_prev, cell, 1])
        part[k, n_particles - 1] = ref_k
        for i in range(n_particles):
            logw[i] = gmat[k, part[k, i]]
        ok = False
        for i in range(n_particles):
            if logw[i] > _NEG_INF:
                ok = True
        if not ok:
            return -2

    pick = _categorical_from_log(logw, n_particles)
    for k in range(n, -1, -1):
        skel[k] = part[k, pick]
        if k > 0:
            pick = anc[k - 1, pick]
    _write_back(w, skel, n, gt, s0_arr, times, states, n_jumps)
    return n


@njit(cache=True)
def _sweep(method_pgas, n_particles, hidden, kdims, s0_arr, times, states,
           n_jumps, t_max, kind, param, exits, tot, log_tot, lograte_t,
           exits_ct, logk, logk_anc, stay, alias,
           init_logp, init_cum, parent, child, pin_t, pin_s, pin_ptr,
           gt, gs, skel, pb, pstate, cap, alpha,
           fpin_step, fpin_state, fparr, fback, gmat):
    for h in range(hidden.shape[0]):
        w = hidden[h]
        if method_pgas:
            r = _update_node_pgas(w, kdims[w], n_particles, s0_arr, times,
                                  states, n_jumps, t_max, kind, param, exits,
                                  tot, log_tot, lograte_t, exits_ct,
                                  logk_anc, stay, alias, init_logp,
                                  init_cum, parent, child, pin_t, pin_s,
                                  pin_ptr[w], pin_ptr[w + 1], gt, gs, skel,
                                  pb, pstate, cap, fpin_step, fpin_state,
                                  fparr, gmat)
        else:
            r = _update_node_ffbs(w, kdims[w], s0_arr, times, states,
                                  n_jumps, t_max, kind, param, exits, tot,
                                  log_tot, lograte_t, exits_ct,
                                  logk, init_logp, parent, child, pin_t,
                                  pin_s, pin_ptr[w], pin_ptr[w + 1], gt, gs,
                                  skel, pb, pstate, cap, alpha,
                                  fpin_step, fpin_state, fparr, fback, gmat)
        if r < 0:
            return r
    return 0


@njit(cache=True)
def _run_sweeps(n_sweeps, method_pgas, n_particles, hidden, kdims, s0_arr,
                times, states, n_jumps, t_max, kind, param, exits, tot,
                log_tot, lograte_t, exits_ct,
                logk, logk_anc, stay, alias, init_logp, init_cum,
                parent, child,
                pin_t, pin_s, pin_ptr, gt, gs, skel, pb, pstate, cap, alpha,
                fpin_step, fpin_state, fparr, fback, gmat,
                occ_out, jump_out):
    n_nodes = parent.shape[0]
    for it in range(n_sweeps):
        r = _sweep(method_pgas, n_particles, hidden, kdims, s0_arr, times,
                   states, n_jumps, t_max, kind, param, exits, tot, log_tot,
                   lograte_t, exits_ct, logk, logk_anc,
                   stay, alias, init_logp, init_cum, parent, child,
                   pin_t, pin_s, pin_ptr, gt, gs, skel, pb, pstate, cap,
                   alpha, fpin_step, fpin_state, fparr, fback, gmat)
        if r < 0:
            return r
        for w in range(n_nodes):
            m = n_jumps[w]
            prev_t = 0.0
            s = s0_arr[w]
            for j in range(m):
                occ_out[it, w, s] += times[w, j] - prev_t
                prev_t = times[w, j]
                s = states[w, j]
            occ_out[it, w, s] += t_max - prev_t
            jump_out[it, w] = m
    return 0


# ---------------------------------------------------------------------------
# Python wrapper
# ---------------------------------------------------------------------------

def _build_alias(probs):
    """Vose alias tables for O(1) categorical sampling from a fixed row."""
    k = len(probs)
    scaled = np.asarray(probs, dtype=float) * k
    prob = np.ones(k)
    idx = np.arange(k, dtype=np.int64)
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        idx[s] = g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    return prob, idx


def _policy_code(policy):
    if isinstance(policy, Uniformization):
        return _POL_UNIFORM, policy.lam
    if isinstance(policy, HomogeneousVirtual):
        return _POL_SURPLUS, policy.theta
    if isinstance(policy, ScaledExit):
        return _POL_SCALED, policy.factor
    raise UnsupportedModelError(f"unknown policy {policy!r}")


def supports_problem(problem, config) -> bool:
    """Whether the compiled engine covers this inference problem."""
    from .mcmc import CtbnProblem

    if not isinstance(problem, CtbnProblem):
        return False
    if config.node_order != "fixed":
        return False
    model = problem.model
    seen_child = set()
    for w in model.nodes:
        if len(model.pa(w)) > 1 or len(model.ch(w)) > 1:
            return False
        for u in model.ch(w):
            if u in seen_child:
                return False
            seen_child.add(u)
        for spec in model.cims[w].values():
            if not isinstance(spec, DenseRateSpec):
                return False
        factor = model.init.node_factor(model.node_index(w))
        if not isinstance(factor, (FiniteInitial, PointMassInitial)):
            return False
    for w, obs_list in problem.evidence.items():
        if w in problem.observed:
            return False
        for ob in obs_list:
            if getattr(ob, "point_state", None) is None:
                return False
    try:
        for w in problem.hidden_nodes:
            _policy_code(config.policy_for(w))
    except UnsupportedModelError:
        return False
    return True


class CompiledCtbnEngine:
    """Array-backed state for the compiled sweeps plus decode helpers."""

    def __init__(self, problem, config, init_path: CtbnPath):
        from .mcmc import CtbnProblem

        if not isinstance(problem, CtbnProblem):
            raise UnsupportedModelError("compiled engine is CTBN-only")
        model = problem.model
        self.problem = problem
        self.config = config
        self.nodes = list(model.nodes)
        n_nodes = len(self.nodes)
        self.kdims = np.array([model.state_spaces[w] for w in self.nodes],
                              dtype=np.int64)
        kmax = int(self.kdims.max())
        idx = {w: i for i, w in enumerate(self.nodes)}
        self.parent = np.full(n_nodes, -1, dtype=np.int64)
        self.child = np.full(n_nodes, -1, dtype=np.int64)
        for a, b in model.edges:
            self.parent[idx[b]] = idx[a]
            self.child[idx[a]] = idx[b]
        pmax = 1
        for i, w in enumerate(self.nodes):
            if self.parent[i] >= 0:
                pmax = max(pmax, int(self.kdims[self.parent[i]]))
        self.rates = np.zeros((n_nodes, pmax, kmax, kmax))
        self.exits = np.zeros((n_nodes, pmax, kmax))
        self.kind = np.zeros(n_nodes, dtype=np.int64)
        self.param = np.zeros(n_nodes)
        for i, w in enumerate(self.nodes):
            configs = ([()] if self.parent[i] < 0
                       else [(p,) for p in
                             range(self.kdims[self.parent[i]])])
            for cfg in configs:
                spec = model.cim(w, cfg)
                p = cfg[0] if cfg else 0
                k = spec.n_states
                self.rates[i, p, :k, :k] = spec.matrix
                self.exits[i, p, :k] = spec.matrix.sum(axis=1)
            code, value = _policy_code(config.policy_for(w))
            self.kind[i] = code
            self.param[i] = value
        # dominating-rate and log tables so potential evaluations need no
        # transcendental calls at sweep time
        self.tot = np.zeros((n_nodes, pmax, kmax))
        for i in range(n_nodes):
            n_p = (1 if self.parent[i] < 0
                   else int(self.kdims[self.parent[i]]))
            for p in range(n_p):
                for s in range(int(self.kdims[i])):
                    self.tot[i, p, s] = _total_rate.py_func(
                        self.kind[i], self.param[i], self.exits[i, p, s])
        with np.errstate(divide="ignore"):
            self.log_tot = np.where(self.tot > 0.0, np.log(
                np.where(self.tot > 0.0, self.tot, 1.0)), _NEG_INF)
            lograte = np.where(self.rates > 0.0, np.log(
                np.where(self.rates > 0.0, self.rates, 1.0)), _NEG_INF)
        # child tables transposed so the conditioning (parent) state is the
        # fastest axis: lograte_t[u, prev, new, s], exits_ct[u, y, s];
        # single precision halves the cache footprint of the hot lookups
        # (the ~1e-7 relative rounding is far below sampling noise)
        self.lograte_t = np.ascontiguousarray(
            lograte.transpose(0, 2, 3, 1)).astype(np.float32)
        self.exits_ct = np.ascontiguousarray(
            self.exits.transpose(0, 2, 1)).astype(np.float32)
        self.tot = self.tot.astype(np.float32)
        self.log_tot = self.log_tot.astype(np.float32)
        # skeleton kernels per (node, parent state): log table plus a
        # two-stage sampler (stay probability, then an alias table over the
        # jump distribution; most draws never touch the big table)
        self.logk = np.full((n_nodes, pmax, kmax, kmax), _NEG_INF)
        self.stay = np.ones((n_nodes, pmax, kmax), dtype=np.float32)
        # prob and alias index interleaved so one draw touches one line
        self.alias = np.ones((n_nodes, pmax, kmax, kmax, 2),
                             dtype=np.float32)
        for i in range(n_nodes):
            k = int(self.kdims[i])
            n_p = (1 if self.parent[i] < 0
                   else int(self.kdims[self.parent[i]]))
            for p in range(n_p):
                total = np.array([_total_rate.py_func(
                    self.kind[i], self.param[i], self.exits[i, p, s])
                    for s in range(k)])
                mat = np.zeros((k, k))
                with np.errstate(divide="ignore", invalid="ignore"):
                    mat[:, :] = np.where(total[:, None] > 0,
                                         self.rates[i, p, :k, :k]
                                         / total[:, None], 0.0)
                stay = np.where(total > 0,
                                1.0 - self.exits[i, p, :k] / total, 1.0)
                np.fill_diagonal(mat, np.clip(stay, 0.0, None))
                mat /= mat.sum(axis=1, keepdims=True)
                with np.errstate(divide="ignore"):
                    self.logk[i, p, :k, :k] = np.log(mat)
                for s in range(k):
                    self.stay[i, p, s] = mat[s, s]
                    jrow = mat[s].copy()
                    jrow[s] = 0.0
                    jtot = jrow.sum()
                    if jtot > 0.0:
                        a_prob, a_idx = _build_alias(jrow / jtot)
                        self.alias[i, p, s, :k, 0] = a_prob
                        self.alias[i, p, s, :k, 1] = a_idx
        # kernel transposed for ancestor weights: logk_anc[w, p, to, from]
        self.logk_anc = np.ascontiguousarray(
            self.logk.transpose(0, 1, 3, 2)).astype(np.float32)
        # initial law per node
        self.init_logp = np.full((n_nodes, kmax), _NEG_INF)
        self.init_cum = np.ones((n_nodes, kmax))
        for i, w in enumerate(self.nodes):
            factor = model.init.node_factor(model.node_index(w))
            k = int(self.kdims[i])
            if isinstance(factor, PointMassInitial):
                probs = np.zeros(k)
                probs[int(factor.state)] = 1.0
            else:
                probs = factor.probs
            with np.errstate(divide="ignore"):
                self.init_logp[i, :k] = np.log(probs)
            self.init_cum[i, :k] = np.cumsum(probs)
        # pins, concatenated per node
        pin_t, pin_s, ptr = [], [], [0]
        for i, w in enumerate(self.nodes):
            for ob in sorted(problem.evidence.get(w, ()), key=lambda o: o.t):
                pin_t.append(float(ob.t))
                pin_s.append(int(ob.point_state))
            ptr.append(len(pin_t))
        self.pin_t = np.array(pin_t, dtype=np.float64)
        self.pin_s = np.array(pin_s, dtype=np.int64)
        self.pin_ptr = np.array(ptr, dtype=np.int64)
        self.hidden = np.array([idx[w] for w in problem.hidden_nodes],
                               dtype=np.int64)
        self.t_max = float(problem.t_max)
        # trajectory buffers sized from expected grid occupancy
        max_total = max(
            (float(self.param[i]) if self.kind[i] == _POL_UNIFORM else
             float(self.exits[i].max()) * (2.0 if self.kind[i] == _POL_SCALED
                                           else 1.0) + float(self.param[i]))
            for i in range(n_nodes))
        cap = max(1024, int(16 * max_total * self.t_max) + 64)
        self.cap = cap
        self.times = np.zeros((n_nodes, cap))
        self.states = np.zeros((n_nodes, cap), dtype=np.int64)
        self.n_jumps = np.zeros(n_nodes, dtype=np.int64)
        self.s0 = np.zeros(n_nodes, dtype=np.int64)
        self.load_path(init_path)
        # scratch
        self._gt = np.zeros(cap)
        self._gs = np.zeros(cap, dtype=np.int64)
        self._skel = np.zeros(cap + 1, dtype=np.int64)
        self._pb = np.zeros(cap + 2)
        self._pstate = np.zeros(cap + 2, dtype=np.int64)
        self._alpha = np.zeros((cap + 1, kmax))
        max_pins = max(1, int(np.diff(self.pin_ptr).max(initial=0)))
        self._fpin_step = np.zeros(max_pins, dtype=np.int64)
        self._fpin_state = np.zeros(max_pins, dtype=np.int64)
        self._fparr = np.zeros(cap + 2, dtype=np.int64)
        self._fback = np.zeros(kmax)
        self._gmat = np.zeros((cap + 1, kmax), dtype=np.float32)

    def load_path(self, path: CtbnPath):
        for i, w in enumerate(self.nodes):
            traj = path.trajs[w]
            m = traj.m
            if m > self.cap - 8:
                raise ConfigError("trajectory exceeds engine buffers")
            self.s0[i] = traj.s0
            self.times[i, :m] = traj.times
            self.states[i, :m] = traj.states
            self.n_jumps[i] = m

    def seed(self, seed: int):
        _seed(int(seed) % (2**32))

    def current_path(self) -> CtbnPath:
        trajs = {}
        for i, w in enumerate(self.nodes):
            m = int(self.n_jumps[i])
            trajs[w] = Trajectory(
                s0=int(self.s0[i]),
                times=tuple(float(t) for t in self.times[i, :m]),
                states=tuple(int(s) for s in self.states[i, :m]),
                t_max=self.t_max)
        return CtbnPath(trajs=trajs, t_max=self.t_max)

    def run_sweeps(self, n_sweeps: int):
        """Run sweeps back to back; returns (occupation, jump counts)."""
        n_nodes = len(self.nodes)
        kmax = int(self.kdims.max())
        occ = np.zeros((n_sweeps, n_nodes, kmax))
        jumps = np.zeros((n_sweeps, n_nodes), dtype=np.int64)
        code = _run_sweeps(
            n_sweeps, self.config.method == "pgas",
            self.config.n_particles, self.hidden, self.kdims, self.s0,
            self.times, self.states, self.n_jumps, self.t_max, self.kind,
            self.param, self.exits, self.tot, self.log_tot, self.lograte_t,
            self.exits_ct, self.logk, self.logk_anc, self.stay, self.alias,
            self.init_logp, self.init_cum, self.parent,
            self.child, self.pin_t, self.pin_s, self.pin_ptr, self._gt,
            self._gs, self._skel, self._pb, self._pstate, self.cap,
            self._alpha, self._fpin_step, self._fpin_state, self._fparr,
            self._fback, self._gmat, occ, jumps)
        self._check(code)
        return occ, jumps

    def sweep(self):
        occ, jumps = self.run_sweeps(1)
        return occ[0], jumps[0]

    def _check(self, code: int):
        if code == -1:
            raise ConfigError("engine grid buffer overflow; rates and "
                              "horizon imply too many potential jumps")
        if code == -2:
            raise ConfigError("potential vanished on the whole state space "
                              "during a compiled sweep")
