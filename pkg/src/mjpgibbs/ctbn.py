"""Continuous-time Bayesian networks: factorized densities and node
conditionals.

Node states are integers 0..S_w-1. Conditional intensity matrices are keyed
by the tuple of parent states (parents ordered as in the node list).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .evidence import ChildProcessEvidence
from .rates import (DenseRateSpec, FiniteInitial, PointMassInitial,
                    SegmentedRates)
from .trajectory import Trajectory


class CtbnInitial:
    """Initial distribution on the product space: per-node factors.

    Covers product distributions and point masses, which is what the presets
    need; configurations are tuples ordered as the node list.
    """

    def __init__(self, factors):
        self.factors = list(factors)

    @classmethod
    def point_mass(cls, config):
        return cls([PointMassInitial(int(s)) for s in config])

    def sample(self, rng) -> tuple:
        return tuple(int(np.atleast_1d(f.sample(rng))[0]) for f in self.factors)

    def log_pmf(self, config) -> float:
        return float(sum(f.log_pmf(s) for f, s in zip(self.factors, config)))

    def node_factor(self, idx: int):
        return self.factors[idx]


@dataclass(frozen=True)
class CtbnModel:
    """Directed (possibly cyclic) graph of interacting jump processes."""

    nodes: tuple
    edges: tuple
    state_spaces: dict  # node -> number of states
    cims: dict  # node -> {parent config tuple: DenseRateSpec}
    init: CtbnInitial

    def __post_init__(self):
        known = set(self.nodes)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ConfigError(f"edge ({a}, {b}) references unknown node")
            if a == b:
                raise ConfigError("self-loops are not allowed")
        for w in self.nodes:
            n_cfg = int(np.prod([self.state_spaces[u] for u in self.pa(w)],
                                dtype=object)) if self.pa(w) else 1
            if len(self.cims[w]) < n_cfg:
                raise ConfigError(f"node {w}: CIM missing parent configurations")

    def pa(self, w) -> tuple:
        return tuple(u for u in self.nodes if (u, w) in set(self.edges))

    def ch(self, w) -> tuple:
        return tuple(u for u in self.nodes if (w, u) in set(self.edges))

    def cim(self, w, parent_config: tuple) -> DenseRateSpec:
        try:
            return self.cims[w][tuple(parent_config)]
        except KeyError:
            raise ConfigError(
                f"node {w}: no CIM for parent configuration {parent_config}")

    def node_index(self, w) -> int:
        return self.nodes.index(w)


@dataclass(frozen=True)
class CtbnPath:
    """One trajectory per node on a common horizon."""

    trajs: dict
    t_max: float

    def __post_init__(self):
        seen = {}
        for w, traj in self.trajs.items():
            if traj.t_max != self.t_max:
                raise ConfigError(f"node {w}: horizon mismatch")
            for t in traj.times:
                if t in seen:
                    raise ConfigError(
                        f"nodes {seen[t]} and {w} jump at the same time {t}")
                seen[t] = w

    def config_at(self, nodes, t) -> tuple:
        return tuple(self.trajs[w].state_at(t) for w in nodes)

    def initial_config(self, nodes) -> tuple:
        return tuple(self.trajs[w].s0 for w in nodes)

    def replace(self, w, traj: Trajectory) -> "CtbnPath":
        trajs = dict(self.trajs)
        trajs[w] = traj
        return CtbnPath(trajs=trajs, t_max=self.t_max)


def parent_segments(model: CtbnModel, w, path: CtbnPath) -> SegmentedRates:
    """Node w's prior process: rates switch at parent jump times."""
    parents = model.pa(w)
    t_max = path.t_max
    if not parents:
        return SegmentedRates.constant(model.cim(w, ()), t_max)
    cuts = sorted({t for u in parents for t in path.trajs[u].times})
    breaks = [0.0] + cuts + [t_max]
    specs = [model.cim(w, path.config_at(parents, b0)) for b0 in breaks[:-1]]
    return SegmentedRates(breaks, specs)


def log_density_node_given_parents(model: CtbnModel, w,
                                   path: CtbnPath) -> float:
    """Log conditional path density of node w given its parents' paths."""
    segrates = parent_segments(model, w, path)
    traj = path.trajs[w]
    parent_times = set()
    for u in model.pa(w):
        parent_times.update(path.trajs[u].times)
    logp = 0.0
    for t0, t1, s in traj.segments():
        logp -= segrates.exit_integral(s, t0, t1)
    prev = traj.s0
    for t, s in zip(traj.times, traj.states):
        if t in parent_times:
            raise ConfigError(
                f"node {w} jumps exactly at a parent jump time {t}")
        r = segrates.spec_at(t).rate(prev, s)
        logp += math.log(r) if r > 0 else -np.inf
        prev = s
    return float(logp)


def log_density_ctbn(model: CtbnModel, path: CtbnPath) -> float:
    """Log joint path density: initial weight plus per-node conditionals."""
    logp = model.init.log_pmf(path.initial_config(model.nodes))
    for w in model.nodes:
        logp += log_density_node_given_parents(model, w, path)
    return float(logp)


@dataclass
class NodeConditional:
    """Full conditional of one node: prior piecewise process plus
    multiplicative likelihood terms (children and external evidence)."""

    segrates: SegmentedRates
    init: object
    evidence: list = field(default_factory=list)


def node_full_conditional(model: CtbnModel, w, path: CtbnPath,
                          external_evidence=()) -> NodeConditional:
    """Assemble the conditional inference problem for node w, others fixed."""
    segrates = parent_segments(model, w, path)
    evidence = list(external_evidence)
    for u in model.ch(w):
        evidence.append(ChildProcessEvidence(
            child=path.trajs[u],
            cim=_child_cim_builder(model, w, u, path)))
    init = model.init.node_factor(model.node_index(w))
    return NodeConditional(segrates=segrates, init=init, evidence=evidence)


def _child_cim_builder(model: CtbnModel, w, u, path: CtbnPath):
    """Child u's rates over time as a function of the candidate state of w."""
    parents = model.pa(u)
    w_pos = parents.index(w)
    co_parents = tuple(p for p in parents if p != w)
    cuts = sorted({t for p in co_parents for t in path.trajs[p].times})
    breaks = [0.0] + cuts + [path.t_max]

    def cim(w_state):
        specs = []
        for b0 in breaks[:-1]:
            config = list(path.config_at(parents, b0))
            config[w_pos] = w_state
            specs.append(model.cim(u, tuple(config)))
        if len(specs) == 1:
            return specs[0]
        return SegmentedRates(breaks, specs)

    return cim


def simulate_ctbn(model: CtbnModel, t_max: float, rng, init_config=None,
                  max_jumps: int = 10**6) -> CtbnPath:
    """Forward draw of the whole network by competing node clocks."""
    config = list(init_config if init_config is not None
                  else model.init.sample(rng))
    init_cfg = tuple(config)
    jumps = {w: ([], []) for w in model.nodes}
    t = 0.0
    for _ in range(max_jumps):
        exits = []
        for w in model.nodes:
            parent_cfg = tuple(config[model.node_index(u)]
                               for u in model.pa(w))
            spec = model.cim(w, parent_cfg)
            exits.append(spec.exit_rate(config[model.node_index(w)]))
        total = sum(exits)
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t >= t_max:
            break
        u = rng.uniform() * total
        acc = 0.0
        for wi, w in enumerate(model.nodes):
            acc += exits[wi]
            if u < acc:
                break
        parent_cfg = tuple(config[model.node_index(p)] for p in model.pa(w))
        spec = model.cim(w, parent_cfg)
        s = config[wi]
        u2 = rng.uniform() * exits[wi]
        acc2 = 0.0
        for target in spec.targets(s):
            acc2 += spec.rate(s, target)
            if u2 < acc2:
                break
        jumps[w][0].append(t)
        jumps[w][1].append(target)
        config[wi] = target
    else:
        raise ConfigError(f"network simulation exceeded {max_jumps} jumps")
    trajs = {w: Trajectory(s0=init_cfg[model.node_index(w)],
                           times=tuple(jumps[w][0]), states=tuple(jumps[w][1]),
                           t_max=t_max) for w in model.nodes}
    return CtbnPath(trajs=trajs, t_max=t_max)


# Product-space flattening (test oracle for small models) -------------------

def product_states(model: CtbnModel):
    sizes = [model.state_spaces[w] for w in model.nodes]
    return list(itertools.product(*[range(s) for s in sizes]))


def flatten_ctbn(model: CtbnModel):
    """Flatten a small CTBN to a dense MJP on the product space.

    Returns (rate spec, initial distribution, encode, decode) where encode
    maps a configuration tuple to the dense state code.
    """
    configs = product_states(model)
    code = {c: i for i, c in enumerate(configs)}
    n = len(configs)
    if n > 4096:
        raise ConfigError("product space too large to flatten")
    q = np.zeros((n, n))
    for c in configs:
        for wi, w in enumerate(model.nodes):
            parent_cfg = tuple(c[model.node_index(u)] for u in model.pa(w))
            spec = model.cim(w, parent_cfg)
            for target in spec.targets(c[wi]):
                c2 = list(c)
                c2[wi] = target
                q[code[c], code[tuple(c2)]] = spec.rate(c[wi], target)
    probs = np.array([math.exp(model.init.log_pmf(c)) for c in configs])
    return (DenseRateSpec(q), FiniteInitial(probs),
            lambda c: code[tuple(c)], lambda i: configs[i])


def flatten_path(model: CtbnModel, path: CtbnPath, encode) -> Trajectory:
    """Rewrite a CTBN path as a product-space trajectory."""
    events = sorted((t, w) for w in model.nodes for t in path.trajs[w].times)
    config = list(path.initial_config(model.nodes))
    s0 = encode(tuple(config))
    times, states = [], []
    for t, w in events:
        config[model.node_index(w)] = path.trajs[w].state_at(t)
        times.append(t)
        states.append(encode(tuple(config)))
    return Trajectory(s0=s0, times=tuple(times), states=tuple(states),
                      t_max=path.t_max)
