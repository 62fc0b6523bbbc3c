"""Outer samplers: trajectory update step, CTBN Gibbs sweep, chain driver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .augment import (AugmentationPolicy, HomogeneousVirtual, ScaledExit,
                      Uniformization)
from .ctbn import CtbnModel, CtbnPath, node_full_conditional
from .errors import ConfigError, PolicyViolationError
from .evidence import PointObservation, build_hmm_factors_segmented
from .rates import DenseRateSpec, RateSpec, SegmentedRates
from .simulate import simulate_gillespie
from .smc import ffbs_sample, pgas_step
from .trajectory import AugmentedTrajectory, Trajectory, strip_virtual


@dataclass(frozen=True)
class ChainConfig:
    """Sampler configuration: skeleton-update method, augmentation policy,
    run length and seeding."""

    method: str = "pgas"  # "pgas" or "ffbs"
    n_particles: int = 10
    policy: object = None  # AugmentationPolicy or {node: policy}
    iterations: int = 1000
    burn_in: int = 100
    seed: int = 0
    thinning: int = 1
    node_order: str = "fixed"  # or "random"
    engine: str = "auto"  # "auto", "reference" or "compiled"

    def __post_init__(self):
        if self.method not in ("pgas", "ffbs"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method == "pgas" and self.n_particles < 2:
            raise ConfigError("pgas needs at least 2 particles")
        if not self.iterations > self.burn_in >= 0:
            raise ConfigError("need iterations > burn_in >= 0")
        if self.thinning < 1:
            raise ConfigError("thinning interval must be >= 1")
        if self.node_order not in ("fixed", "random"):
            raise ConfigError(f"unknown node order {self.node_order!r}")

    def policy_for(self, node) -> AugmentationPolicy:
        if isinstance(self.policy, dict):
            return self.policy[node]
        return self.policy


@dataclass(frozen=True)
class MjpProblem:
    """Posterior sampling of a single hidden MJP trajectory."""

    q: RateSpec
    init: object
    t_max: float
    evidence: tuple = ()
    states: object = None  # enumerable state list, None for rule-based
    exit_bound: object = None  # user-supplied sup of exit rates, if known

    def __post_init__(self):
        if self.states is None and getattr(self.q, "states", None) is not None:
            object.__setattr__(self, "states", self.q.states)


@dataclass(frozen=True)
class CtbnProblem:
    """Node-wise Gibbs sampling for a CTBN with some nodes fully observed."""

    model: CtbnModel
    t_max: float
    evidence: dict = field(default_factory=dict)  # node -> evidence list
    observed: dict = field(default_factory=dict)  # node -> clamped Trajectory

    @property
    def hidden_nodes(self) -> tuple:
        return tuple(w for w in self.model.nodes if w not in self.observed)


def validate_ergodicity(problem, config: ChainConfig):
    """Check the augmentation-policy preconditions for ergodicity.

    Uniformization needs a rate strictly above every exit rate (exact scan
    for dense models, a user-supplied bound otherwise); homogeneous virtual
    jumps need a positive surplus everywhere.
    """
    if isinstance(problem, CtbnProblem):
        for w in problem.hidden_nodes:
            for spec in problem.model.cims[w].values():
                _validate_policy(spec, config.policy_for(w), None, node=w)
        return
    _validate_policy(problem.q, config.policy_for(None), problem.exit_bound)


def _validate_policy(q, policy, exit_bound, node=None):
    where = f" at node {node}" if node is not None else ""
    if isinstance(policy, Uniformization):
        if isinstance(q, DenseRateSpec):
            bound = q.max_exit_rate()
            offender = int(np.argmax(q.exit_rate_many(np.arange(q.n_states))))
        else:
            bound = exit_bound if exit_bound is not None else getattr(
                q, "exit_bound", None)
            offender = None
            if bound is None:
                raise ConfigError(
                    "uniformization rejected: exit rates are unbounded or "
                    f"no bound was supplied{where}")
        if not policy.lam > bound:
            raise ConfigError(
                f"uniformization rate {policy.lam} must strictly exceed the "
                f"maximal exit rate {bound}{where}"
                + (f" (state {offender})" if offender is not None else ""))
    elif isinstance(policy, HomogeneousVirtual):
        if not policy.theta > 0:
            raise ConfigError(f"theta must be positive{where}")
    elif isinstance(policy, ScaledExit):
        if isinstance(q, DenseRateSpec):
            exits = q.exit_rate_many(np.arange(q.n_states))
            if np.any(exits <= 0):
                raise ConfigError(
                    f"scaled-exit policy needs positive exit rates everywhere"
                    f"{where} (state {int(np.argmin(exits))} is absorbing)")
    else:
        raise ConfigError(f"unknown augmentation policy {policy!r}")


def resample_virtual_segmented(traj: Trajectory, segrates: SegmentedRates,
                               policy: AugmentationPolicy,
                               rng) -> AugmentedTrajectory:
    """Virtual-jump refresh under piecewise-constant rates.

    Pieces are the refinement of the path's own segments by the rate
    breakpoints; within each piece virtual times are Poisson(R - Q).
    """
    times, states = [], []
    for t0, t1, s in traj.segments():
        for a, b, spec in segrates.iter_pieces(t0, t1):
            extra = policy.total_rate(spec, s) - spec.exit_rate(s)
            if extra < 0:
                raise PolicyViolationError(s, policy.total_rate(spec, s),
                                           spec.exit_rate(s))
            if extra > 0:
                count = rng.poisson(extra * (b - a))
                draws = np.sort(rng.uniform(a, b, size=count))
                while len(draws) and (np.any(np.diff(draws) <= 0)
                                      or draws[0] <= a or draws[-1] >= b):
                    draws = np.sort(rng.uniform(a, b, size=len(draws)))
                for t in draws:
                    times.append(float(t))
                    states.append(s)
        if t1 < traj.t_max:
            times.append(t1)
            states.append(traj.state_at(t1))
    return AugmentedTrajectory(s0=traj.s0, times=tuple(times),
                               states=tuple(states), t_max=traj.t_max)


def conditional_step(traj: Trajectory, segrates: SegmentedRates,
                     policy: AugmentationPolicy, init, evidence, method: str,
                     n_particles: int, rng, states=None) -> Trajectory:
    """One virtual-jump + skeleton-update + strip cycle on a fixed prior
    process (possibly piecewise-homogeneous)."""
    aug = resample_virtual_segmented(traj, segrates, policy, rng)
    factors = build_hmm_factors_segmented(segrates, policy, init, aug.times,
                                          evidence=evidence, states=states)
    if method == "ffbs":
        skeleton = ffbs_sample(factors, rng)
    else:
        skeleton = pgas_step(factors, aug.skeleton, n_particles, rng)
    return strip_virtual(aug.with_skeleton(skeleton))


def mjp_mcmc_step(traj: Trajectory, q: RateSpec, init,
                  policy: AugmentationPolicy, evidence, method: str, rng,
                  n_particles: int = 10, states=None) -> Trajectory:
    """Single MCMC trajectory update for a homogeneous MJP.

    The potential-jump grid is held fixed inside the step; only the skeleton
    (and hence the virtual/true allocation) changes.
    """
    if states is None:
        states = getattr(q, "states", None)
    segrates = SegmentedRates.constant(q, traj.t_max)
    return conditional_step(traj, segrates, policy, init, evidence, method,
                            n_particles, rng, states=states)


def ctbn_gibbs_sweep(problem: CtbnProblem, path: CtbnPath,
                     config: ChainConfig, rng) -> CtbnPath:
    """One Gibbs pass over the hidden nodes, each against current neighbors."""
    order = list(problem.hidden_nodes)
    if config.node_order == "random":
        order = [order[i] for i in rng.permutation(len(order))]
    for w in order:
        cond = node_full_conditional(problem.model, w, path,
                                     problem.evidence.get(w, ()))
        n_states = problem.model.state_spaces[w]
        traj = conditional_step(
            path.trajs[w], cond.segrates, config.policy_for(w), cond.init,
            cond.evidence, config.method, config.n_particles, rng,
            states=list(range(n_states)))
        path = path.replace(w, traj)
    return path


# Chain driver ---------------------------------------------------------------

@dataclass
class ChainResult:
    samples: list
    records: list  # one dict per post-burn-in iteration and node/state
    metadata: dict


def _point_mass_at(evidence, t, t_max=None):
    for ev in evidence:
        if isinstance(ev, PointObservation) and ev.t == t:
            state = getattr(ev, "point_state", None)
            if state is not None:
                return state
    return None


def _initial_mjp_trajectory(problem: MjpProblem, config: ChainConfig, rng,
                            metadata):
    start = _point_mass_at(problem.evidence, 0.0)
    end = _point_mass_at(problem.evidence, problem.t_max)
    init = problem.init
    if start is not None:
        from .rates import PointMassInitial
        init = PointMassInitial(start)
    for _ in range(100):
        traj = simulate_gillespie(problem.q, init, problem.t_max, rng)
        if end is None or traj.state_at(problem.t_max) == end:
            return traj
    # Deterministic bridge fallback: constant path forced to one jump.
    metadata.setdefault("bridge_fallback", []).append("mjp")
    s0 = start if start is not None else init.sample(rng)
    if end is None or end == s0:
        return Trajectory(s0=s0, times=(), states=(), t_max=problem.t_max)
    return Trajectory(s0=s0, times=(problem.t_max / 2,), states=(end,),
                      t_max=problem.t_max)


def simulate_piecewise(segrates: SegmentedRates, s0, rng) -> Trajectory:
    """Forward draw of a piecewise-homogeneous MJP from a fixed start."""
    t, s = 0.0, s0
    times, states = [], []
    j = 0
    while t < segrates.t_max:
        spec = segrates.specs[j]
        exit_rate = spec.exit_rate(s)
        boundary = segrates.breaks[j + 1]
        if exit_rate <= 0:
            t = boundary
            j += 1
            if j >= len(segrates.specs):
                break
            continue
        t_next = t + rng.exponential(1.0 / exit_rate)
        if t_next >= boundary:
            t = boundary
            j += 1
            if j >= len(segrates.specs):
                break
            continue
        t = t_next
        u = rng.uniform() * exit_rate
        acc = 0.0
        for target in spec.targets(s):
            acc += spec.rate(s, target)
            if u < acc:
                s = target
                break
        times.append(t)
        states.append(s)
    return Trajectory(s0=s0, times=tuple(times), states=tuple(states),
                      t_max=segrates.t_max)


def _initial_ctbn_path(problem: CtbnProblem, config: ChainConfig, rng,
                       metadata) -> CtbnPath:
    from .ctbn import parent_segments

    model = problem.model
    t_max = problem.t_max
    trajs = dict(problem.observed)
    # Stand-in constant paths so parent lookups always resolve.
    init_config = model.init.sample(rng)
    for w in problem.hidden_nodes:
        start = _point_mass_at(problem.evidence.get(w, ()), 0.0)
        s0 = start if start is not None else init_config[model.node_index(w)]
        trajs.setdefault(w, Trajectory(s0=s0, times=(), states=(),
                                       t_max=t_max))
    path = CtbnPath(trajs=trajs, t_max=t_max)
    for w in problem.hidden_nodes:
        end = _point_mass_at(problem.evidence.get(w, ()), t_max)
        segrates = parent_segments(model, w, path)
        s0 = path.trajs[w].s0
        traj = None
        for _ in range(100):
            cand = simulate_piecewise(segrates, s0, rng)
            if end is None or cand.state_at(t_max) == end:
                traj = cand
                break
        if traj is None:
            metadata.setdefault("bridge_fallback", []).append(w)
            if end == s0 or end is None:
                traj = Trajectory(s0=s0, times=(), states=(), t_max=t_max)
            else:
                # random time keeps fallback jumps of different nodes distinct
                traj = Trajectory(s0=s0, times=(rng.uniform(0.0, t_max),),
                                  states=(end,), t_max=t_max)
        path = path.replace(w, traj)
    return path


def _use_compiled(problem, config: ChainConfig) -> bool:
    if config.engine == "reference":
        return False
    if config.engine not in ("auto", "compiled"):
        raise ConfigError(f"unknown engine {config.engine!r}")
    from . import engine_ctbn

    supported = engine_ctbn.supports_problem(problem, config)
    if config.engine == "compiled" and not supported:
        raise ConfigError(
            "the compiled engine covers networks with at most one parent and "
            "one child per node, tabulated rates and exact state pins; use "
            "engine='reference' for this problem")
    return supported


def _run_chain_compiled(problem, config: ChainConfig, state, metadata,
                        progress) -> ChainResult:
    """Drive the compiled sweep engine; burn-in runs as a single batch."""
    from .engine_ctbn import CompiledCtbnEngine

    engine = CompiledCtbnEngine(problem, config, state)
    engine.seed(config.seed)
    metadata["engine"] = "compiled"
    samples, records = [], []
    if config.burn_in:
        t0 = time.perf_counter()
        engine.run_sweeps(config.burn_in)
        if progress is not None:
            progress(config.burn_in - 1, None)
        metadata["burn_in_wall_s"] = time.perf_counter() - t0
    for it in range(config.burn_in, config.iterations):
        t0 = time.perf_counter()
        occ, jumps = engine.sweep()
        wall_ms = (time.perf_counter() - t0) * 1e3
        if (it - config.burn_in) % config.thinning == 0:
            samples.append(engine.current_path())
        for wi, w in enumerate(engine.nodes):
            for s in range(int(engine.kdims[wi])):
                records.append({"iteration": it, "node": w, "state": s,
                                "occupation_time": float(occ[wi, s]),
                                "jump_count": int(jumps[wi]),
                                "wall_ms": wall_ms})
        if progress is not None:
            progress(it, None)
    return ChainResult(samples=samples, records=records, metadata=metadata)


def run_chain(problem, config: ChainConfig, progress=None) -> ChainResult:
    """Drive the sampler for the configured number of iterations.

    Emits post-burn-in samples at the thinning interval and per-iteration
    sufficient-statistic records.
    """
    from .diagnostics import sufficient_stats

    validate_ergodicity(problem, config)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    metadata = {"seed": config.seed, "method": config.method,
                "iterations": config.iterations, "burn_in": config.burn_in}
    samples, records = [], []
    t_start = time.perf_counter()

    if isinstance(problem, CtbnProblem):
        state = _initial_ctbn_path(problem, config, rng, metadata)
        if _use_compiled(problem, config):
            result = _run_chain_compiled(problem, config, state, metadata,
                                         progress)
            metadata["wall_s"] = time.perf_counter() - t_start
            return result
        step = lambda s: ctbn_gibbs_sweep(problem, s, config, rng)
        describe = _describe_ctbn
        state_sets = {w: range(problem.model.state_spaces[w])
                      for w in problem.model.nodes}
    else:
        state = _initial_mjp_trajectory(problem, config, rng, metadata)
        step = lambda s: mjp_mcmc_step(
            s, problem.q, problem.init, config.policy_for(None),
            problem.evidence, config.method, rng,
            n_particles=config.n_particles, states=problem.states)
        describe = _describe_mjp
        state_sets = {None: problem.states}

    try:
        for it in range(config.iterations):
            t0 = time.perf_counter()
            state = step(state)
            wall_ms = (time.perf_counter() - t0) * 1e3
            if it >= config.burn_in:
                if (it - config.burn_in) % config.thinning == 0:
                    samples.append(state)
                records.extend(describe(state, state_sets, it, wall_ms,
                                        sufficient_stats))
            if progress is not None:
                progress(it, state)
    except Exception:
        metadata["aborted_at"] = len(records)
        raise
    metadata["wall_s"] = time.perf_counter() - t_start
    return ChainResult(samples=samples, records=records, metadata=metadata)


def _describe_mjp(traj, state_sets, it, wall_ms, sufficient_stats):
    stats = sufficient_stats(traj, state_sets[None])
    out = []
    for s, occ in stats.occupation.items():
        out.append({"iteration": it, "node": "x", "state": s,
                    "occupation_time": occ, "jump_count": stats.jump_count,
                    "wall_ms": wall_ms})
    return out


def _describe_ctbn(path, state_sets, it, wall_ms, sufficient_stats):
    out = []
    for w, traj in path.trajs.items():
        stats = sufficient_stats(traj, state_sets[w])
        for s, occ in stats.occupation.items():
            out.append({"iteration": it, "node": w, "state": s,
                        "occupation_time": occ,
                        "jump_count": stats.jump_count, "wall_ms": wall_ms})
    return out
