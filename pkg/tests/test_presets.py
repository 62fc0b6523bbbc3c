import numpy as np
import pytest

from mjpgibbs import (ConfigError, HomogeneousVirtual, ScaledExit,
                      Uniformization, chain_model, preset_chain,
                      preset_lotka_volterra, preset_toy, run_chain, toy_model)
from mjpgibbs.presets import PRESETS, pin_state


def test_toy_model_rates():
    model = toy_model()
    assert model.cim("X", ()).rate(0, 1) == 10.0
    assert model.cim("Y", (0,)).rate(1, 0) == 10.0
    assert model.cim("Y", (1,)).rate(0, 1) == 100.0


def test_preset_toy_shape():
    p = preset_toy()
    assert p.name == "toy"
    assert p.replications == 100
    assert p.config.iterations == 1000 and p.config.burn_in == 100
    assert isinstance(p.config.policy, Uniformization)
    assert p.config.policy.lam == 20.0
    assert p.problem.hidden_nodes == ("X",)
    assert set(p.problem.observed) == {"Y"}
    obs = p.problem.evidence["X"]
    assert [o.t for o in obs] == [0.0, 1.0]


def test_preset_toy_deterministic_regeneration():
    a, b = preset_toy(seed=3), preset_toy(seed=3)
    assert a.problem.observed["Y"] == b.problem.observed["Y"]
    assert a.problem.evidence["X"][0].point_state == \
        b.problem.evidence["X"][0].point_state
    c = preset_toy(seed=4)
    assert (a.problem.observed["Y"] != c.problem.observed["Y"]
            or a.problem.evidence["X"][1].point_state
            != c.problem.evidence["X"][1].point_state)


def test_preset_toy_homogeneous_policy_runs():
    p = preset_toy(policy=HomogeneousVirtual(10.0), iterations=20, burn_in=5)
    res = run_chain(p.problem, p.config)
    assert len(res.samples) == 15


def test_chain_model_rates_s10():
    model = chain_model(3, 10)
    head = model.cim(0, ())
    assert head.rate(0, 1) == 0.5
    assert head.rate(0, 2) == pytest.approx(0.5 / 8)
    assert head.exit_rate(0) == pytest.approx(1.0)
    inner_same = model.cim(1, (4,))
    assert inner_same.rate(4, 0) == pytest.approx(1.0 / 9)
    assert inner_same.exit_rate(4) == pytest.approx(1.0)
    inner_diff = model.cim(1, (4,))
    assert inner_diff.rate(2, 4) == 1.0
    assert inner_diff.rate(2, 7) == pytest.approx(1.0 / 8)
    assert inner_diff.exit_rate(2) == pytest.approx(2.0)


def test_chain_model_rates_s2_vacuous_branches():
    model = chain_model(2, 2)
    head = model.cim(0, ())
    assert head.rate(0, 1) == 0.5
    assert head.exit_rate(0) == 0.5
    inner = model.cim(1, (0,))
    assert inner.rate(0, 1) == 1.0  # same as parent: uniform 1/(S-1)
    assert inner.rate(1, 0) == 2.0  # differs: all mass toward parent state
    assert inner.exit_rate(0) == 1.0 and inner.exit_rate(1) == 2.0
    assert model.cim(1, (1,)).rate(0, 1) == 2.0


def test_chain_model_validation():
    with pytest.raises(ConfigError):
        chain_model(0, 2)
    with pytest.raises(ConfigError):
        chain_model(3, 1)


def test_preset_chain_shape():
    p = preset_chain(3, 2, 5.0)
    assert p.replications == 20
    assert isinstance(p.config.policy, ScaledExit)
    assert p.config.n_particles == 10
    assert p.problem.hidden_nodes == (0, 1, 2)
    for w in p.problem.model.nodes:
        assert [o.t for o in p.problem.evidence[w]] == [0.0, 5.0]


def test_preset_chain_runs_both_methods():
    for method in ("pgas", "ffbs"):
        p = preset_chain(3, 2, 5.0, method=method, iterations=8, burn_in=2)
        res = run_chain(p.problem, p.config)
        assert len(res.samples) == 6


def test_preset_lv_shape():
    p = preset_lotka_volterra(t_max=300.0, obs_t_max=150.0, n_obs=10)
    assert isinstance(p.config.policy, HomogeneousVirtual)
    assert p.config.policy.theta == 30.0
    assert p.config.n_particles == 100
    assert len(p.problem.evidence) == 10
    assert p.problem.evidence[-1].t == 150.0
    assert p.problem.evidence[0].t == 15.0
    assert p.metadata["n_obs"] == 10
    # likelihood at the truth is the rule's maximum
    ob = p.problem.evidence[0]
    vals = ob.eval_many(np.array([[k, 7] for k in range(300)]))
    assert np.isfinite(vals).all()


def test_preset_registry():
    assert set(PRESETS) == {"toy", "chain", "lotka_volterra"}


def test_pin_state_scalar_and_tuple():
    p = pin_state(0.5, 2)
    assert p.log_lik(2) == 0.0 and p.log_lik(1) == -np.inf
    np.testing.assert_array_equal(p.eval_many(np.array([1, 2, 3])),
                                  [-np.inf, 0.0, -np.inf])
    pt = pin_state(0.5, (3, 4))
    np.testing.assert_array_equal(
        pt.eval_many(np.array([[3, 4], [3, 5]])), [0.0, -np.inf])
