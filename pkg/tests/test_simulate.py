import numpy as np
import pytest
from scipy import stats

from mjpgibbs import (DenseRateSpec, ExplosionError, FiniteInitial,
                      HomogeneousVirtual, PointMassInitial, ScaledExit,
                      Uniformization, resample_virtual, simulate_gillespie,
                      thinning_sample)
from mjpgibbs.errors import PolicyViolationError
from mjpgibbs.lv import LotkaVolterraRates


@pytest.fixture
def toy_x():
    return DenseRateSpec(np.array([[0.0, 10.0], [10.0, 0.0]]))


def test_gillespie_structure(toy_x):
    rng = np.random.default_rng(0)
    tr = simulate_gillespie(toy_x, FiniteInitial([0.5, 0.5]), 1.0, rng)
    assert tr.t_max == 1.0
    assert all(0 < t < 1.0 for t in tr.times)


def test_gillespie_absorbing_state():
    q = DenseRateSpec(np.array([[0.0, 1.0], [0.0, 0.0]]))
    rng = np.random.default_rng(0)
    tr = simulate_gillespie(q, PointMassInitial(1), 5.0, rng)
    assert tr.m == 0 and tr.s0 == 1


def test_gillespie_explosion_guard():
    q = LotkaVolterraRates(alpha=5.0)  # runaway prey growth
    rng = np.random.default_rng(0)
    with pytest.raises(ExplosionError):
        simulate_gillespie(q, PointMassInitial((100, 0)), 1000.0, rng,
                           max_jumps=500)


def test_gillespie_occupation_symmetric(toy_x):
    # Symmetric 2-state switch started from stationarity: mean time in
    # state 1 over [0,1] is 0.5.
    rng = np.random.default_rng(1)
    occ = []
    for _ in range(2000):
        tr = simulate_gillespie(toy_x, FiniteInitial([0.5, 0.5]), 1.0, rng)
        occ.append(sum(t1 - t0 for t0, t1, s in tr.segments() if s == 1))
    se = np.std(occ) / np.sqrt(len(occ))
    assert abs(np.mean(occ) - 0.5) < 3 * se


def test_thinning_policy_violation(toy_x):
    rng = np.random.default_rng(0)
    with pytest.raises(PolicyViolationError):
        thinning_sample(toy_x, Uniformization(5.0), FiniteInitial([1, 1]),
                        1.0, rng)


@pytest.mark.parametrize("policy", [Uniformization(20.0),
                                    HomogeneousVirtual(10.0),
                                    ScaledExit(2.0)])
def test_thinning_stripped_matches_gillespie(toy_x, policy):
    # Stripped thinning law equals the trajectory law: compare first-jump
    # times (KS) and jump counts (chi-square) against Gillespie.
    rng = np.random.default_rng(2)
    nu = FiniteInitial([0.5, 0.5])
    n = 4000
    first_a, first_b, count_a, count_b = [], [], [], []
    for _ in range(n):
        a = thinning_sample(toy_x, policy, nu, 1.0, rng).strip()
        b = simulate_gillespie(toy_x, nu, 1.0, rng)
        first_a.append(a.times[0] if a.m else 1.0)
        first_b.append(b.times[0] if b.m else 1.0)
        count_a.append(a.m)
        count_b.append(b.m)
    assert stats.ks_2samp(first_a, first_b).pvalue > 0.01
    top = max(max(count_a), max(count_b)) + 1
    tab_a = np.bincount(count_a, minlength=top)
    tab_b = np.bincount(count_b, minlength=top)
    keep = (tab_a + tab_b) >= 10
    merged = np.vstack([tab_a[keep], tab_b[keep]])
    assert stats.chi2_contingency(merged).pvalue > 0.01


def test_thinning_waiting_time_exponential():
    # First true jump from a fixed state with R = 2Q is Exp(Q).
    q = DenseRateSpec(np.array([[0.0, 3.0], [1.0, 0.0]]))
    rng = np.random.default_rng(3)
    nu = PointMassInitial(0)
    waits = []
    while len(waits) < 3000:
        tr = thinning_sample(q, ScaledExit(2.0), nu, 10.0, rng).strip()
        if tr.m:
            waits.append(tr.times[0])
    res = stats.kstest(waits, stats.expon(scale=1.0 / 3.0).cdf)
    assert res.pvalue > 0.01


def test_resample_virtual_counts_poisson(toy_x):
    # Per-segment virtual counts are Poisson((R - Q) * length).
    rng = np.random.default_rng(4)
    from mjpgibbs import Trajectory
    base = Trajectory(s0=0, times=(0.4,), states=(1,), t_max=1.0)
    counts = []
    for _ in range(4000):
        aug = resample_virtual(base, toy_x, HomogeneousVirtual(10.0), rng)
        seg_virtual = sum(1 for t in aug.virtual_times() if t < 0.4)
        counts.append(seg_virtual)
    # theta * 0.4 = 4 expected
    lam = 4.0
    top = max(counts) + 1
    obs = np.bincount(counts, minlength=top)
    expected = stats.poisson(lam).pmf(np.arange(top)) * len(counts)
    keep = expected >= 5
    obs_k = np.append(obs[keep], obs[~keep].sum())
    exp_k = np.append(expected[keep], expected[~keep].sum())
    assert stats.chisquare(obs_k, exp_k * obs_k.sum() / exp_k.sum()
                           ).pvalue > 0.01


def test_resample_virtual_preserves_truth(toy_x):
    from mjpgibbs import Trajectory
    base = Trajectory(s0=0, times=(0.3, 0.8), states=(1, 0), t_max=1.0)
    rng = np.random.default_rng(5)
    for _ in range(50):
        aug = resample_virtual(base, toy_x, Uniformization(25.0), rng)
        assert aug.strip() == base


def test_resample_virtual_uniformization_total_rate(toy_x):
    # Under homogeneous virtual jumps the total virtual count over [0,1]
    # is Poisson(theta) regardless of the skeleton.
    from mjpgibbs import Trajectory
    rng = np.random.default_rng(6)
    base = Trajectory(s0=0, times=(0.2, 0.5, 0.7), states=(1, 0, 1),
                      t_max=1.0)
    totals = [len(resample_virtual(base, toy_x, HomogeneousVirtual(10.0),
                                   rng).virtual_times())
              for _ in range(3000)]
    assert np.mean(totals) == pytest.approx(10.0, abs=3 * np.std(totals)
                                            / np.sqrt(len(totals)))
