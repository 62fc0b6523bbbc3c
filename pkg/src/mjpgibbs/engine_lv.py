"""Compiled particle sampler for the predator-prey trajectory posterior.

Specialized to the four-reaction predator-prey model under the
surplus-jump augmentation with constant surplus theta: virtual times then
form a homogeneous Poisson(theta) process independent of the path, so the
whole refresh + conditional-SMC cycle runs in one compiled pass. States are
(prey, predator) pairs; the particle update costs O(grid length x particles)
per sweep regardless of population sizes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .augment import HomogeneousVirtual
from .errors import ConfigError, SamplingError, UnsupportedModelError
from .lv import LotkaVolterraRates, PreyObservation
from .rates import PointMassInitial
from .trajectory import Trajectory

_LOG2 = math.log(2.0)
_LOG_FLOOR = math.log(1e-6)
_NEG_INF = -np.inf


@njit(cache=True)
def _lv_seed(seed):
    np.random.seed(seed)


@njit(cache=True, inline="always")
def _exit_rate(x, y, alpha, beta, delta, gamma):
    return alpha * x + beta * x * y + delta * x * y + gamma * y


@njit(cache=True, inline="always")
def _obs_loglik(x, v):
    a = abs(x - v) * _LOG2
    if a >= _LOG_FLOOR:
        return -(a + np.log1p(np.exp(_LOG_FLOOR - a)))
    return -(_LOG_FLOOR + np.log1p(np.exp(a - _LOG_FLOOR)))


@njit(cache=True)
def _merge_grid(m, times, sx, sy, x0, y0, t_max, theta, gt, gsx, gsy, cap):
    """Superpose Poisson(theta) virtual times on the true jumps."""
    count = np.random.poisson(theta * t_max)
    vt = np.sort(np.random.random(count) * t_max)
    n = 0
    i = 0  # true jumps consumed
    j = 0  # virtual times consumed
    x, y = x0, y0
    last = 0.0
    while i < m or j < count:
        take_true = j >= count or (i < m and times[i] <= vt[j])
        t = times[i] if take_true else vt[j]
        if take_true:
            x, y = sx[i], sy[i]
            i += 1
        else:
            j += 1
            if t <= last or t >= t_max:
                continue  # probability-zero tie or boundary hit
        if n >= cap:
            return -1
        gt[n] = t
        gsx[n] = x
        gsy[n] = y
        last = t
        n += 1
    return n


@njit(cache=True)
def _pgas_lv(n, gt, gsx, gsy, x0, y0, t_max, alpha, beta, delta, gamma,
             theta, n_obs, obs_step, obs_val, n_particles, px, py, anc,
             logw, prev_logw, awork, probs):
    """Conditional SMC with ancestor sampling on the merged grid.

    Writes the chosen skeleton back into (gsx, gsy); the start state is
    pinned at (x0, y0).
    """
    for i in range(n_particles):
        px[0, i] = x0
        py[0, i] = y0
    # step-0 potential: survival over (0, gt[0]) plus the candidate factor
    b0 = gt[0] if n > 0 else t_max
    o = 0
    for i in range(n_particles):
        q = _exit_rate(px[0, i], py[0, i], alpha, beta, delta, gamma)
        g = -(q + theta) * b0
        if n > 0:
            g += np.log(q + theta)
        oo = o
        while oo < n_obs and obs_step[oo] == 0:
            g += _obs_loglik(px[0, i], obs_val[oo])
            oo += 1
        logw[i] = g
    while o < n_obs and obs_step[o] == 0:
        o += 1

    for k in range(1, n + 1):
        rx, ry = gsx[k - 1], gsy[k - 1]
        for i in range(n_particles):
            prev_logw[i] = logw[i]
        # reference-ancestor weights: previous weight times kernel mass
        for i in range(n_particles):
            xp, yp = px[k - 1, i], py[k - 1, i]
            q = _exit_rate(xp, yp, alpha, beta, delta, gamma)
            total = q + theta
            dx, dy = rx - xp, ry - yp
            if dx == 0 and dy == 0:
                rate = theta
            elif dx == 1 and dy == 0:
                rate = alpha * xp
            elif dx == -1 and dy == 0:
                rate = beta * xp * yp
            elif dx == 0 and dy == 1:
                rate = delta * xp * yp
            elif dx == 0 and dy == -1:
                rate = gamma * yp
            else:
                rate = 0.0
            awork[i] = (prev_logw[i] + np.log(rate / total)
                        if rate > 0.0 else _NEG_INF)
        m = _NEG_INF
        for i in range(n_particles):
            if awork[i] > m:
                m = awork[i]
        if m == _NEG_INF:
            return -2
        total_a = 0.0
        for i in range(n_particles):
            total_a += np.exp(awork[i] - m)
        u = np.random.random() * total_a
        acc = 0.0
        ref_anc = n_particles - 1
        for i in range(n_particles):
            acc += np.exp(awork[i] - m)
            if u < acc:
                ref_anc = i
                break
        anc[k - 1, n_particles - 1] = ref_anc
        # free particles: multinomial ancestors, kernel propagation
        m = _NEG_INF
        for i in range(n_particles):
            if prev_logw[i] > m:
                m = prev_logw[i]
        if m == _NEG_INF:
            return -2
        total_w = 0.0
        for i in range(n_particles):
            probs[i] = np.exp(prev_logw[i] - m)
            total_w += probs[i]
        for i in range(n_particles - 1):
            u = np.random.random() * total_w
            acc = 0.0
            pick = n_particles - 1
            for j in range(n_particles):
                acc += probs[j]
                if u < acc:
                    pick = j
                    break
            anc[k - 1, i] = pick
            xp, yp = px[k - 1, pick], py[k - 1, pick]
            r0 = alpha * xp
            r1 = beta * xp * yp
            r2 = delta * xp * yp
            r3 = gamma * yp
            total = r0 + r1 + r2 + r3 + theta
            u2 = np.random.random() * total
            if u2 < r0:
                xp += 1
            elif u2 < r0 + r1:
                xp -= 1
            elif u2 < r0 + r1 + r2:
                yp += 1
            elif u2 < r0 + r1 + r2 + r3:
                yp -= 1
            px[k, i] = xp
            py[k, i] = yp
        px[k, n_particles - 1] = rx
        py[k, n_particles - 1] = ry
        # weights: potential of the interval (gt[k-1], next grid time)
        a = gt[k - 1]
        b = t_max if k == n else gt[k]
        oo0 = o
        while o < n_obs and obs_step[o] == k:
            o += 1
        for i in range(n_particles):
            q = _exit_rate(px[k, i], py[k, i], alpha, beta, delta, gamma)
            g = -(q + theta) * (b - a)
            if k < n:
                g += np.log(q + theta)
            for oo in range(oo0, o):
                g += _obs_loglik(px[k, i], obs_val[oo])
            logw[i] = g
    m = _NEG_INF
    for i in range(n_particles):
        if logw[i] > m:
            m = logw[i]
    if m == _NEG_INF:
        return -2
    total_w = 0.0
    for i in range(n_particles):
        total_w += np.exp(logw[i] - m)
    u = np.random.random() * total_w
    acc = 0.0
    pick = n_particles - 1
    for i in range(n_particles):
        acc += np.exp(logw[i] - m)
        if u < acc:
            pick = i
            break
    for k in range(n, 0, -1):
        gsx[k - 1] = px[k, pick]
        gsy[k - 1] = py[k, pick]
        pick = anc[k - 1, pick]
    return 0


@njit(cache=True)
def _strip_lv(n, gt, gsx, gsy, x0, y0, times, sx, sy):
    count = 0
    x, y = x0, y0
    for k in range(n):
        if gsx[k] != x or gsy[k] != y:
            times[count] = gt[k]
            sx[count] = gsx[k]
            sy[count] = gsy[k]
            x, y = gsx[k], gsy[k]
            count += 1
    return count


@njit(cache=True)
def _run_lv(n_sweeps, m0, times, sx, sy, x0, y0, t_max, alpha, beta, delta,
            gamma, theta, obs_t, obs_val, n_particles, cap, gt, gsx, gsy,
            eval_t, out_x, out_y, out_jumps):
    n_obs = obs_t.shape[0]
    obs_step = np.empty(n_obs, dtype=np.int64)
    px = np.empty((cap + 1, n_particles), dtype=np.int64)
    py = np.empty((cap + 1, n_particles), dtype=np.int64)
    anc = np.empty((cap, n_particles), dtype=np.int64)
    logw = np.empty(n_particles)
    prev_logw = np.empty(n_particles)
    awork = np.empty(n_particles)
    probs = np.empty(n_particles)
    m = m0
    for sweep in range(n_sweeps):
        n = _merge_grid(m, times, sx, sy, x0, y0, t_max, theta, gt, gsx,
                        gsy, cap)
        if n < 0:
            return -1, m
        # observation -> step index (last grid index at or before the time)
        for i in range(n_obs):
            lo, hi = 0, n
            t = obs_t[i]
            while lo < hi:
                mid = (lo + hi) // 2
                if gt[mid] <= t:
                    lo = mid + 1
                else:
                    hi = mid
            obs_step[i] = lo
        r = _pgas_lv(n, gt, gsx, gsy, x0, y0, t_max, alpha, beta, delta,
                     gamma, theta, n_obs, obs_step, obs_val, n_particles,
                     px, py, anc, logw, prev_logw, awork, probs)
        if r < 0:
            return r, m
        m = _strip_lv(n, gt, gsx, gsy, x0, y0, times, sx, sy)
        out_jumps[sweep] = m
        # states on the evaluation grid (right-continuous)
        j = 0
        x, y = x0, y0
        for i in range(eval_t.shape[0]):
            while j < m and times[j] <= eval_t[i]:
                x, y = sx[j], sy[j]
                j += 1
            out_x[sweep, i] = x
            out_y[sweep, i] = y
    return 0, m


class CompiledLvEngine:
    """Holds the trajectory buffers and drives whole batches of sweeps."""

    def __init__(self, problem, config, init_traj: Trajectory):
        q = problem.q
        if not isinstance(q, LotkaVolterraRates):
            raise UnsupportedModelError("engine is predator-prey specific")
        if not isinstance(config.policy_for(None), HomogeneousVirtual):
            raise UnsupportedModelError(
                "engine requires the constant-surplus augmentation")
        if config.method != "pgas":
            raise UnsupportedModelError(
                "forward-backward sampling needs a finite state space; use "
                "the particle method for this model")
        if not isinstance(problem.init, PointMassInitial):
            raise UnsupportedModelError("engine needs a known initial state")
        for ev in problem.evidence:
            if not isinstance(ev, PreyObservation):
                raise UnsupportedModelError(
                    "engine supports noisy prey-count observations only")
        self.problem = problem
        self.config = config
        self.alpha, self.beta = q.alpha, q.beta
        self.delta, self.gamma = q.delta, q.gamma
        self.theta = float(config.policy_for(None).theta)
        self.t_max = float(problem.t_max)
        obs = sorted(problem.evidence, key=lambda e: e.t)
        self.obs_t = np.array([e.t for e in obs], dtype=np.float64)
        self.obs_val = np.array([e.value for e in obs], dtype=np.int64)
        self.x0, self.y0 = (int(v) for v in problem.init.state)
        mean_grid = self.theta * self.t_max + max(init_traj.m, 64)
        self.cap = int(2 * mean_grid) + 4096
        self.times = np.zeros(self.cap)
        self.sx = np.zeros(self.cap, dtype=np.int64)
        self.sy = np.zeros(self.cap, dtype=np.int64)
        self.load_traj(init_traj)
        self._gt = np.zeros(self.cap)
        self._gsx = np.zeros(self.cap, dtype=np.int64)
        self._gsy = np.zeros(self.cap, dtype=np.int64)

    def load_traj(self, traj: Trajectory):
        if (traj.s0[0], traj.s0[1]) != (self.x0, self.y0):
            raise ConfigError("trajectory start disagrees with the model")
        m = traj.m
        if m > self.cap - 8:
            raise ConfigError("trajectory exceeds engine buffers")
        self.m = m
        self.times[:m] = traj.times
        for i, (x, y) in enumerate(traj.states):
            self.sx[i] = x
            self.sy[i] = y

    def seed(self, seed: int):
        _lv_seed(int(seed) % (2**32))

    def run_sweeps(self, n_sweeps: int, eval_times=()):
        eval_t = np.asarray(eval_times, dtype=np.float64)
        out_x = np.zeros((n_sweeps, len(eval_t)), dtype=np.int64)
        out_y = np.zeros((n_sweeps, len(eval_t)), dtype=np.int64)
        out_jumps = np.zeros(n_sweeps, dtype=np.int64)
        code, m = _run_lv(
            n_sweeps, self.m, self.times, self.sx, self.sy, self.x0,
            self.y0, self.t_max, self.alpha, self.beta, self.delta,
            self.gamma, self.theta, self.obs_t, self.obs_val,
            self.config.n_particles, self.cap, self._gt, self._gsx,
            self._gsy, eval_t, out_x, out_y, out_jumps)
        self.m = int(m)
        if code == -1:
            raise ConfigError("engine grid buffer overflow")
        if code == -2:
            raise SamplingError("particle weights collapsed during a sweep")
        return out_x, out_y, out_jumps

    def current_traj(self) -> Trajectory:
        m = self.m
        return Trajectory(
            s0=(self.x0, self.y0),
            times=tuple(float(t) for t in self.times[:m]),
            states=tuple((int(x), int(y))
                         for x, y in zip(self.sx[:m], self.sy[:m])),
            t_max=self.t_max)
