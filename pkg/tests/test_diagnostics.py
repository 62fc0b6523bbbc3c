import numpy as np
import pytest
from scipy.linalg import expm

from mjpgibbs import (ConfigError, DenseRateSpec, FiniteInitial,
                      PointObservation, Trajectory, Uniformization,
                      build_hmm_factors, discretized_smoother, ess,
                      ess_summary, exact_skeleton_posterior, grid_summary,
                      sufficient_stats)
from mjpgibbs.errors import UnsupportedModelError


def _obs(t, tab):
    with np.errstate(divide="ignore"):
        log_tab = np.log(np.asarray(tab, dtype=float))
    return PointObservation(
        t=t, log_lik=lambda s: log_tab[s],
        log_lik_many=lambda ss: log_tab[np.asarray(ss, dtype=int)])


def test_sufficient_stats_exact():
    tr = Trajectory(s0=0, times=(0.25, 0.75), states=(1, 0), t_max=2.0)
    stats = sufficient_stats(tr, [0, 1, 2])
    assert stats.jump_count == 2
    assert stats.occupation[0] == pytest.approx(0.25 + 1.25)
    assert stats.occupation[1] == pytest.approx(0.5)
    assert stats.occupation[2] == 0.0
    assert sum(stats.occupation.values()) == pytest.approx(2.0)


def test_ess_iid_near_n():
    rng = np.random.default_rng(0)
    x = rng.normal(size=20000)
    assert ess(x) > 0.85 * len(x)


def test_ess_ar1_known_value():
    # AR(1) with coefficient phi has integrated autocorrelation
    # (1+phi)/(1-phi); ESS ~ n (1-phi)/(1+phi).
    rng = np.random.default_rng(1)
    phi = 0.7
    n = 60000
    x = np.empty(n)
    x[0] = 0.0
    eps = rng.normal(size=n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + eps[i]
    want = n * (1 - phi) / (1 + phi)
    assert ess(x) == pytest.approx(want, rel=0.15)


def test_ess_constant_series():
    value, flagged = ess(np.ones(100), return_flag=True)
    assert value == 100.0 and flagged


def test_ess_validation():
    with pytest.raises(ConfigError):
        ess([1.0, 2.0])
    with pytest.raises(ConfigError):
        ess([np.nan] * 20)


def test_ess_clipped_to_n():
    # Strong negative correlation would push the naive estimate above n.
    x = np.tile([1.0, -1.0], 200) + np.random.default_rng(2).normal(
        scale=0.01, size=400)
    assert ess(x) <= 400.0


def test_ess_thinning_monotonicity():
    # Thinning by 2 never increases total ESS beyond noise.
    rng = np.random.default_rng(3)
    phi = 0.9
    n = 40000
    x = np.empty(n)
    x[0] = 0.0
    eps = rng.normal(size=n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + eps[i]
    assert ess(x[::2]) <= ess(x) * 1.2


def test_grid_summary():
    trs = [Trajectory(s0=0, times=(0.5,), states=(1,), t_max=1.0),
           Trajectory(s0=1, times=(), states=(), t_max=1.0)]
    gs = grid_summary(trs, [0.0, 0.6, 1.0])
    np.testing.assert_allclose(gs.mean, [0.5, 1.0, 1.0])
    np.testing.assert_allclose(gs.sd, [0.5, 0.0, 0.0])


def test_exact_skeleton_posterior_flat_prior():
    # Without evidence the posterior over skeletons is the prior chain.
    q = DenseRateSpec(np.array([[0.0, 2.0], [3.0, 0.0]]))
    fac = build_hmm_factors(q, Uniformization(6.0), FiniteInitial([0.6, 0.4]),
                            [0.5], 1.0)
    post = exact_skeleton_posterior(fac)
    kernel = np.exp(fac.log_kernel_matrix(1))
    for (a, b), p in post.items():
        assert p == pytest.approx([0.6, 0.4][a] * kernel[a, b])


def test_exact_skeleton_posterior_size_guard():
    q = DenseRateSpec(np.array([[0.0, 2.0], [3.0, 0.0]]))
    fac = build_hmm_factors(q, Uniformization(6.0), FiniteInitial([1, 1]),
                            np.linspace(0.01, 0.9, 25), 1.0)
    with pytest.raises(ConfigError):
        exact_skeleton_posterior(fac)


def test_smoother_no_evidence_matches_matrix_exponential():
    # Without evidence the occupation expectation is the integral of the
    # transient distribution: int_0^T nu' exp(Qt) dt.
    q_off = np.array([[0.0, 2.0], [3.0, 0.0]])
    q = DenseRateSpec(q_off)
    gen = q_off - np.diag(q_off.sum(axis=1))
    nu = np.array([0.6, 0.4])
    grid = np.linspace(0, 1, 2001)
    probs = np.array([nu @ expm(gen * t) for t in grid])
    want = np.trapezoid(probs, grid, axis=0)
    got = discretized_smoother(q, FiniteInitial([0.6, 0.4]), (), 1.0, h=1e-3)
    np.testing.assert_allclose(got, want, atol=5e-3)
    assert got.sum() == pytest.approx(1.0, abs=1e-8)


def test_smoother_with_hard_evidence():
    # Pinning the endpoint shifts mass; compare to an exact bridge formula:
    # E[occ_0] with X(1)=0 known via numerical quadrature of
    # nu' e^{Gt} e_s e_s' e^{G(1-t)} e_0 / (nu' e^{G} e_0).
    q_off = np.array([[0.0, 2.0], [3.0, 0.0]])
    gen = q_off - np.diag(q_off.sum(axis=1))
    nu = np.array([0.6, 0.4])
    grid = np.linspace(0, 1, 2001)
    num = np.array([(nu @ expm(gen * t))[0] * expm(gen * (1 - t))[0, 0]
                    for t in grid])
    den = (nu @ expm(gen))[0]
    want = np.trapezoid(num / den, grid)
    ev = (_obs(1.0, [1.0, 0.0]),)
    got = discretized_smoother(DenseRateSpec(q_off), FiniteInitial([0.6, 0.4]),
                               ev, 1.0, h=1e-3)
    assert got[0] == pytest.approx(want, abs=5e-3)


def test_smoother_step_size_guard():
    q = DenseRateSpec(np.array([[0.0, 2000.0], [3.0, 0.0]]))
    with pytest.raises(ConfigError):
        discretized_smoother(q, FiniteInitial([1, 1]), (), 1.0, h=1e-3)


def test_smoother_rejects_child_evidence():
    q = DenseRateSpec(np.array([[0.0, 2.0], [3.0, 0.0]]))
    with pytest.raises(UnsupportedModelError):
        discretized_smoother(q, FiniteInitial([1, 1]), ("not-a-point-obs",),
                             1.0)


def test_ess_summary_from_records():
    rng = np.random.default_rng(4)
    records = []
    for it in range(200):
        for s in (0, 1):
            records.append({"iteration": it, "node": "x", "state": s,
                            "occupation_time": rng.uniform(),
                            "jump_count": int(rng.poisson(3.0)),
                            "wall_ms": 1.0})
    out = ess_summary(records)
    assert "occupation/x/0" in out["ess"]
    assert "jumps/x" in out["ess"]
    assert out["median_ess"] > 0
