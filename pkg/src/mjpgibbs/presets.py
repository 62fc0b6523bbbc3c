"""Self-contained experiment presets: model, synthetic evidence, defaults.

Each preset regenerates the same model and evidence from the same seed, so
runs are reproducible end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import HomogeneousVirtual, ScaledExit, Uniformization
from .ctbn import CtbnInitial, CtbnModel, simulate_ctbn
from .errors import ConfigError
from .evidence import PointObservation
from .lv import LotkaVolterraRates, prey_observation, sample_prey_observation
from .mcmc import ChainConfig, CtbnProblem, MjpProblem
from .rates import DenseRateSpec, FiniteInitial, PointMassInitial
from .simulate import simulate_gillespie


@dataclass
class ExperimentPreset:
    """A ready-to-run inference problem with its default sampler settings."""

    name: str
    problem: object  # MjpProblem or CtbnProblem
    config: ChainConfig
    replications: int
    metadata: dict = field(default_factory=dict)


def pin_state(t: float, state) -> PointObservation:
    """Exact observation of the state at one time point."""
    ref = np.asarray(state)

    def log_lik(s) -> float:
        return 0.0 if np.array_equal(np.asarray(s), ref) else -np.inf

    def log_lik_many(states) -> np.ndarray:
        arr = np.asarray(states)
        hit = arr == ref if ref.ndim == 0 else np.all(arr == ref, axis=-1)
        return np.where(hit, 0.0, -np.inf)

    return PointObservation(t=float(t), log_lik=log_lik,
                            log_lik_many=log_lik_many,
                            point_state=state)


def _symmetric_2state(rate: float) -> DenseRateSpec:
    return DenseRateSpec(np.array([[0.0, rate], [rate, 0.0]]))


def toy_model() -> CtbnModel:
    """Two binary nodes X -> Y; Y switches 10x faster when X is in state 1."""
    return CtbnModel(
        nodes=("X", "Y"),
        edges=(("X", "Y"),),
        state_spaces={"X": 2, "Y": 2},
        cims={"X": {(): _symmetric_2state(10.0)},
              "Y": {(0,): _symmetric_2state(10.0),
                    (1,): _symmetric_2state(100.0)}},
        init=CtbnInitial([FiniteInitial([0.5, 0.5]),
                          FiniteInitial([0.5, 0.5])]),
    )


def preset_toy(method: str = "pgas", n_particles: int = 4, policy=None,
               seed: int = 0, iterations: int = 1000,
               burn_in: int = 100) -> ExperimentPreset:
    """Hidden X on [0, 1]: Y fully observed, X pinned at both ends."""
    model = toy_model()
    t_max = 1.0
    rng = np.random.default_rng(np.random.SeedSequence([101, seed]))
    truth = simulate_ctbn(model, t_max, rng)
    x = truth.trajs["X"]
    problem = CtbnProblem(
        model=model, t_max=t_max,
        evidence={"X": (pin_state(0.0, x.s0),
                        pin_state(t_max, x.state_at(t_max)))},
        observed={"Y": truth.trajs["Y"]},
    )
    config = ChainConfig(method=method, n_particles=n_particles,
                         policy=policy if policy is not None
                         else Uniformization(20.0),
                         iterations=iterations, burn_in=burn_in, seed=seed)
    return ExperimentPreset(
        name="toy", problem=problem, config=config, replications=100,
        metadata={"truth_jumps_x": x.m, "t_max": t_max})


def _chain_head_cim(n_states: int) -> DenseRateSpec:
    q = np.zeros((n_states, n_states))
    for x in range(n_states):
        q[x, (x + 1) % n_states] = 0.5
        if n_states > 2:
            for x2 in range(n_states):
                if x2 != x and x2 != (x + 1) % n_states:
                    q[x, x2] = 0.5 / (n_states - 2)
    return DenseRateSpec(q)


def _chain_node_cim(n_states: int, parent_state: int) -> DenseRateSpec:
    q = np.zeros((n_states, n_states))
    for x in range(n_states):
        if x == parent_state:
            for x2 in range(n_states):
                if x2 != x:
                    q[x, x2] = 1.0 / (n_states - 1)
        else:
            # Rate 1 toward the parent's state plus unit total mass spread
            # over the remaining states; with two states that mass collapses
            # onto the parent's state, keeping the exit rate at 2 for every
            # state-space size.
            q[x, parent_state] = 1.0 if n_states > 2 else 2.0
            if n_states > 2:
                for x2 in range(n_states):
                    if x2 != x and x2 != parent_state:
                        q[x, x2] = 1.0 / (n_states - 2)
    return DenseRateSpec(q)


def chain_model(m_nodes: int, n_states: int) -> CtbnModel:
    """Directed chain 0 -> 1 -> ... -> M-1; each node pulled toward its
    parent's current state."""
    if m_nodes < 1 or n_states < 2:
        raise ConfigError("need at least one node and two states")
    nodes = tuple(range(m_nodes))
    edges = tuple((w, w + 1) for w in range(m_nodes - 1))
    cims = {0: {(): _chain_head_cim(n_states)}}
    for w in range(1, m_nodes):
        cims[w] = {(p,): _chain_node_cim(n_states, p)
                   for p in range(n_states)}
    uniform = FiniteInitial(np.full(n_states, 1.0 / n_states))
    return CtbnModel(nodes=nodes, edges=edges,
                     state_spaces={w: n_states for w in nodes}, cims=cims,
                     init=CtbnInitial([uniform] * m_nodes))


def preset_chain(m_nodes: int = 3, n_states: int = 2, t_max: float = 5.0,
                 method: str = "pgas", n_particles: int = 10, seed: int = 0,
                 iterations: int = 1000,
                 burn_in: int = 100) -> ExperimentPreset:
    """Chain network with every node observed at the start and the end."""
    model = chain_model(m_nodes, n_states)
    rng = np.random.default_rng(np.random.SeedSequence([202, seed]))
    truth = simulate_ctbn(model, t_max, rng)
    evidence = {w: (pin_state(0.0, truth.trajs[w].s0),
                    pin_state(t_max, truth.trajs[w].state_at(t_max)))
                for w in model.nodes}
    problem = CtbnProblem(model=model, t_max=t_max, evidence=evidence)
    config = ChainConfig(method=method, n_particles=n_particles,
                         policy=ScaledExit(2.0), iterations=iterations,
                         burn_in=burn_in, seed=seed)
    return ExperimentPreset(
        name="chain", problem=problem, config=config, replications=20,
        metadata={"m_nodes": m_nodes, "n_states": n_states, "t_max": t_max})


def preset_lotka_volterra(t_max: float = 3000.0, obs_t_max: float = 1500.0,
                          n_obs: int = 50, init_state=(100, 100),
                          method: str = "pgas", n_particles: int = 100,
                          seed: int = 0, iterations: int = 1000,
                          burn_in: int = 100) -> ExperimentPreset:
    """Predator-prey process with noisy prey counts on the first half of the
    horizon and prediction on the second half."""
    q = LotkaVolterraRates()
    init = PointMassInitial(tuple(int(v) for v in init_state))
    rng = np.random.default_rng(np.random.SeedSequence([303, seed]))
    truth = simulate_gillespie(q, init, t_max, rng)
    obs_times = np.linspace(obs_t_max / n_obs, obs_t_max, n_obs)
    evidence = []
    for t in obs_times:
        x_true = truth.state_at(float(t))[0]
        evidence.append(prey_observation(
            float(t), sample_prey_observation(x_true, rng)))
    problem = MjpProblem(q=q, init=init, t_max=t_max,
                         evidence=tuple(evidence))
    config = ChainConfig(method=method, n_particles=n_particles,
                         policy=HomogeneousVirtual(30.0),
                         iterations=iterations, burn_in=burn_in, seed=seed)
    return ExperimentPreset(
        name="lotka_volterra", problem=problem, config=config, replications=1,
        metadata={"n_obs": n_obs, "obs_t_max": obs_t_max,
                  "truth": truth.to_jsonable(
                      lambda s: [int(v) for v in s]),
                  "truth_jumps": truth.m})


PRESETS = {
    "toy": preset_toy,
    "chain": preset_chain,
    "lotka_volterra": preset_lotka_volterra,
}
