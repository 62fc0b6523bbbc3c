import numpy as np
import pytest

from mjpgibbs import (ChainConfig, ConfigError, CtbnProblem, DenseRateSpec,
                      FiniteInitial, HomogeneousVirtual, LotkaVolterraRates,
                      MjpProblem, PointObservation, ScaledExit,
                      Uniformization, discretized_smoother, mjp_mcmc_step,
                      run_chain, simulate_gillespie, sufficient_stats,
                      toy_model, validate_ergodicity)
from mjpgibbs.presets import pin_state


def _obs(t, tab):
    with np.errstate(divide="ignore"):
        log_tab = np.log(np.asarray(tab, dtype=float))
    return PointObservation(
        t=t, log_lik=lambda s: log_tab[s],
        log_lik_many=lambda ss: log_tab[np.asarray(ss, dtype=int)])


@pytest.fixture
def q2():
    return DenseRateSpec(np.array([[0.0, 2.0], [3.0, 0.0]]))


def test_chain_config_validation():
    with pytest.raises(ConfigError):
        ChainConfig(method="nuts")
    with pytest.raises(ConfigError):
        ChainConfig(method="pgas", n_particles=1)
    with pytest.raises(ConfigError):
        ChainConfig(iterations=10, burn_in=10)
    with pytest.raises(ConfigError):
        ChainConfig(thinning=0)
    with pytest.raises(ConfigError):
        ChainConfig(node_order="sorted")


def test_validate_ergodicity(q2):
    prob = MjpProblem(q=q2, init=FiniteInitial([1, 1]), t_max=1.0)
    validate_ergodicity(prob, ChainConfig(policy=Uniformization(4.0)))
    with pytest.raises(ConfigError):
        validate_ergodicity(prob, ChainConfig(policy=Uniformization(3.0)))
    with pytest.raises(ConfigError):
        validate_ergodicity(prob, ChainConfig(policy=Uniformization(2.5)))
    validate_ergodicity(prob, ChainConfig(policy=HomogeneousVirtual(1.0)))
    validate_ergodicity(prob, ChainConfig(policy=ScaledExit(2.0)))


def test_validate_rejects_unbounded_uniformization():
    prob = MjpProblem(q=LotkaVolterraRates(), init=FiniteInitial([1]),
                      t_max=1.0)
    with pytest.raises(ConfigError):
        validate_ergodicity(prob, ChainConfig(policy=Uniformization(50.0)))
    # with a user-supplied bound it is allowed
    prob2 = MjpProblem(q=LotkaVolterraRates(), init=FiniteInitial([1]),
                       t_max=1.0, exit_bound=40.0)
    validate_ergodicity(prob2, ChainConfig(policy=Uniformization(50.0)))


def test_validate_scaled_exit_absorbing():
    q = DenseRateSpec(np.array([[0.0, 1.0], [0.0, 0.0]]))
    prob = MjpProblem(q=q, init=FiniteInitial([1, 1]), t_max=1.0)
    with pytest.raises(ConfigError):
        validate_ergodicity(prob, ChainConfig(policy=ScaledExit(2.0)))


def test_step_preserves_grid_and_changes_skeleton(q2):
    rng = np.random.default_rng(0)
    traj = simulate_gillespie(q2, FiniteInitial([1, 1]), 1.0, rng)
    out = mjp_mcmc_step(traj, q2, FiniteInitial([1, 1]), Uniformization(6.0),
                        (), "ffbs", rng)
    assert out.t_max == 1.0


def test_prior_recovery_no_evidence(q2):
    # Without evidence the chain's stationary law is the prior: occupation
    # means match direct simulation.
    nu = FiniteInitial([0.5, 0.5])
    prob = MjpProblem(q=q2, init=nu, t_max=1.0)
    cfg = ChainConfig(method="ffbs", policy=Uniformization(6.0),
                      iterations=2500, burn_in=200, seed=11)
    res = run_chain(prob, cfg)
    occ = np.array([sufficient_stats(s, [0, 1]).occupation[0]
                    for s in res.samples])
    rng = np.random.default_rng(1)
    direct = np.array([sufficient_stats(
        simulate_gillespie(q2, nu, 1.0, rng), [0, 1]).occupation[0]
        for _ in range(2500)])
    se = np.sqrt(np.var(occ) / (len(occ) / 10) + np.var(direct) / len(direct))
    assert abs(occ.mean() - direct.mean()) < 3 * se


@pytest.mark.parametrize("method,policy", [
    ("ffbs", Uniformization(6.0)),
    ("pgas", Uniformization(6.0)),
    ("ffbs", HomogeneousVirtual(3.0)),
    ("pgas", ScaledExit(2.0)),
])
def test_posterior_matches_smoother_oracle(q2, method, policy):
    nu = FiniteInitial([0.6, 0.4])
    evidence = (_obs(0.3, [0.9, 0.2]), _obs(0.8, [0.1, 0.7]))
    oracle = discretized_smoother(q2, nu, evidence, 1.0, h=1e-3)
    prob = MjpProblem(q=q2, init=nu, t_max=1.0, evidence=evidence)
    cfg = ChainConfig(method=method, n_particles=5, policy=policy,
                      iterations=2500, burn_in=250, seed=42)
    res = run_chain(prob, cfg)
    occ = np.array([sufficient_stats(s, [0, 1]).occupation[0]
                    for s in res.samples])
    se = occ.std() / np.sqrt(len(occ) / 10)
    assert abs(occ.mean() - oracle[0]) < 3 * se + 1e-2


def test_aperiodicity_repeated_skeletons(q2):
    # Unchanged trajectories occur with positive probability.
    nu = FiniteInitial([1, 1])
    prob = MjpProblem(q=q2, init=nu, t_max=1.0)
    cfg = ChainConfig(method="ffbs", policy=Uniformization(6.0),
                      iterations=1000, burn_in=0, seed=3)
    res = run_chain(prob, cfg)
    repeats = sum(1 for a, b in zip(res.samples, res.samples[1:]) if a == b)
    assert repeats > 0


def test_ctbn_sweep_only_updates_hidden_nodes():
    model = toy_model()
    rng = np.random.default_rng(4)
    from mjpgibbs import simulate_ctbn
    truth = simulate_ctbn(model, 1.0, rng)
    prob = CtbnProblem(model=model, t_max=1.0,
                       evidence={"X": (pin_state(0.0, truth.trajs["X"].s0),)},
                       observed={"Y": truth.trajs["Y"]})
    assert prob.hidden_nodes == ("X",)
    cfg = ChainConfig(method="ffbs", policy=Uniformization(20.0),
                      iterations=20, burn_in=5, seed=5)
    res = run_chain(prob, cfg)
    for s in res.samples:
        assert s.trajs["Y"] == truth.trajs["Y"]
        assert s.trajs["X"].s0 == truth.trajs["X"].s0


def test_ctbn_posterior_matches_flat_mjp_oracle():
    # Gibbs over the 2-node toy network agrees with sampling the flattened
    # product-space MJP directly (both hidden, shared point evidence on X).
    model = toy_model()
    from mjpgibbs import flatten_ctbn
    q_flat, nu_flat, encode, decode = flatten_ctbn(model)
    ev_x = _obs(0.5, [0.95, 0.05])
    # same evidence on the flattened chain: depends only on X component
    with np.errstate(divide="ignore"):
        flat_tab = np.log(np.array(
            [[0.95, 0.05][decode(i)[0]] for i in range(4)]))
    ev_flat = PointObservation(
        t=0.5, log_lik=lambda s: flat_tab[s],
        log_lik_many=lambda ss: flat_tab[np.asarray(ss, dtype=int)])

    prob_ctbn = CtbnProblem(model=model, t_max=1.0,
                            evidence={"X": (ev_x,)})
    cfg = ChainConfig(method="ffbs", policy=Uniformization(150.0),
                      iterations=1200, burn_in=200, seed=6)
    res_ctbn = run_chain(prob_ctbn, cfg)
    occ_ctbn = np.array([sufficient_stats(s.trajs["X"], [0, 1]).occupation[0]
                         for s in res_ctbn.samples])

    prob_flat = MjpProblem(q=q_flat, init=nu_flat, t_max=1.0,
                           evidence=(ev_flat,))
    res_flat = run_chain(prob_flat, cfg)
    occ_flat = np.array([
        sum(t1 - t0 for t0, t1, s in traj.segments() if decode(s)[0] == 0)
        for traj in res_flat.samples])
    se = np.sqrt(np.var(occ_ctbn) / (len(occ_ctbn) / 10)
                 + np.var(occ_flat) / (len(occ_flat) / 10))
    assert abs(occ_ctbn.mean() - occ_flat.mean()) < 3 * se


def test_determinism_same_seed(q2):
    nu = FiniteInitial([1, 1])
    prob = MjpProblem(q=q2, init=nu, t_max=1.0, evidence=(_obs(0.4, [0.8, 0.3]),))
    cfg = ChainConfig(method="pgas", n_particles=4,
                      policy=Uniformization(6.0), iterations=50, burn_in=10,
                      seed=9)
    a = run_chain(prob, cfg)
    b = run_chain(prob, cfg)
    assert a.samples == b.samples

    def strip_timing(records):
        return [{k: v for k, v in r.items() if k != "wall_ms"}
                for r in records]

    assert strip_timing(a.records) == strip_timing(b.records)


def test_records_schema(q2):
    prob = MjpProblem(q=q2, init=FiniteInitial([1, 1]), t_max=1.0)
    cfg = ChainConfig(method="ffbs", policy=Uniformization(6.0),
                      iterations=12, burn_in=2, seed=0)
    res = run_chain(prob, cfg)
    assert len(res.records) == 10 * 2  # (iterations - burn_in) * states
    row = res.records[0]
    assert set(row) == {"iteration", "node", "state", "occupation_time",
                        "jump_count", "wall_ms"}
    # occupation times per iteration sum to the horizon
    by_iter = {}
    for r in res.records:
        by_iter.setdefault(r["iteration"], 0.0)
        by_iter[r["iteration"]] += r["occupation_time"]
    assert all(abs(v - 1.0) < 1e-9 for v in by_iter.values())


def test_endpoint_conditioning_initialization(q2):
    # Point-mass evidence at both ends is honored from the first sample.
    nu = FiniteInitial([1, 1])
    prob = MjpProblem(q=q2, init=nu, t_max=1.0,
                      evidence=(pin_state(0.0, 1), pin_state(1.0, 0)))
    cfg = ChainConfig(method="ffbs", policy=Uniformization(6.0),
                      iterations=30, burn_in=0, seed=12)
    res = run_chain(prob, cfg)
    for s in res.samples:
        assert s.s0 == 1 and s.state_at(1.0) == 0
