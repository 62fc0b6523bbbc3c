import numpy as np
import pytest

from mjpgibbs import (ChildProcessEvidence, DenseRateSpec, FiniteInitial,
                      HomogeneousVirtual, PointObservation, ScaledExit,
                      SegmentedRates, Trajectory, Uniformization,
                      build_hmm_factors, build_hmm_factors_segmented)
from mjpgibbs.errors import (DegeneratePotentialError, UnsupportedModelError)
from mjpgibbs.evidence import locate_observation_steps


@pytest.fixture
def toy_x():
    return DenseRateSpec(np.array([[0.0, 10.0], [10.0, 0.0]]))


def _obs(t, tab):
    with np.errstate(divide="ignore"):
        log_tab = np.log(np.asarray(tab, dtype=float))
    return PointObservation(
        t=t, log_lik=lambda s: log_tab[s],
        log_lik_many=lambda ss: log_tab[np.asarray(ss, dtype=int)])


def test_locate_observation_steps():
    grid = [0.2, 0.5, 0.9]
    assert locate_observation_steps(grid, [0.0, 0.1, 0.2, 0.3, 0.9, 1.0]) == \
        [0, 0, 1, 1, 3, 3]


def test_uniformization_no_evidence_prior_chain(toy_x):
    # Constant dominating rate and no evidence: all potentials are constant,
    # so the conditional skeleton law is the prior Markov chain.
    fac = build_hmm_factors(toy_x, Uniformization(20.0),
                            FiniteInitial([0.5, 0.5]), [0.3, 0.6], 1.0)
    table = fac.potential_table()
    assert np.allclose(table, table[0, 0])
    np.testing.assert_allclose(np.exp(fac.log_kernel_matrix(1)),
                               [[0.5, 0.5], [0.5, 0.5]])


def test_state_dependent_holding_factors(toy_x):
    # With R(s) = 2Q(s) the potentials carry exp(-R(s) dt) and a log R(s)
    # next-candidate factor at interior steps.
    q = DenseRateSpec(np.array([[0.0, 1.0], [4.0, 0.0]]))
    fac = build_hmm_factors(q, ScaledExit(2.0), FiniteInitial([0.5, 0.5]),
                            [0.25], 1.0)
    table = fac.potential_table()
    # step 0 covers [0, 0.25]; R = (2, 8); interior step -> + log R
    np.testing.assert_allclose(
        table[0], [-2.0 * 0.25 + np.log(2.0), -8.0 * 0.25 + np.log(8.0)])
    # final step [0.25, 1]: survival only
    np.testing.assert_allclose(table[1], [-2.0 * 0.75, -8.0 * 0.75])


def test_point_observation_grouping(toy_x):
    fac = build_hmm_factors(toy_x, Uniformization(20.0),
                            FiniteInitial([0.5, 0.5]), [0.5], 1.0,
                            evidence=(_obs(0.2, [0.9, 0.1]),
                                      _obs(0.7, [0.3, 0.7])))
    table = fac.potential_table()
    np.testing.assert_allclose(table[0], np.log([0.9, 0.1]))
    np.testing.assert_allclose(table[1], np.log([0.3, 0.7]))


def test_observation_beyond_horizon(toy_x):
    with pytest.raises(UnsupportedModelError):
        build_hmm_factors(toy_x, Uniformization(20.0),
                          FiniteInitial([0.5, 0.5]), [0.5], 1.0,
                          evidence=(_obs(1.5, [1.0, 1.0]),)).potential_table()


def test_degenerate_potentials(toy_x):
    fac = build_hmm_factors(toy_x, Uniformization(20.0),
                            FiniteInitial([0.5, 0.5]), [0.5], 1.0,
                            evidence=(_obs(0.2, [0.0, 0.0]),))
    with pytest.raises(DegeneratePotentialError):
        fac.potential_table()


def test_child_process_interval_loglik_hand_value():
    # Parent state selects the child's switching rate; child observed fully.
    child = Trajectory(s0=0, times=(0.5,), states=(1,), t_max=1.0)
    cims = {0: DenseRateSpec(np.array([[0.0, 10.0], [10.0, 0.0]])),
            1: DenseRateSpec(np.array([[0.0, 100.0], [100.0, 0.0]]))}
    ev = ChildProcessEvidence(child, lambda p: cims[p])
    # Interval (0.4, 0.6] contains the jump; parent state 1:
    # log 100 - 100*0.2
    assert ev.interval_loglik(1, 0.4, 0.6) == pytest.approx(
        np.log(100.0) - 100.0 * 0.2)
    # parent state 0 on an interval with no jump: just survival
    assert ev.interval_loglik(0, 0.6, 1.0) == pytest.approx(-10.0 * 0.4)
    # whole-interval sum telescopes
    parts = (ev.interval_loglik(1, 0.0, 0.3) + ev.interval_loglik(1, 0.3, 0.8)
             + ev.interval_loglik(1, 0.8, 1.0))
    assert parts == pytest.approx(ev.interval_loglik(1, 0.0, 1.0))


def test_child_evidence_in_potentials():
    # Short interval with one child jump: parent state 1 is strongly favored
    # (rate-100 jump beats rate-10 jump when the child actually jumped).
    child = Trajectory(s0=0, times=(0.505,), states=(1,), t_max=1.0)
    cims = {0: DenseRateSpec(np.array([[0.0, 10.0], [10.0, 0.0]])),
            1: DenseRateSpec(np.array([[0.0, 100.0], [100.0, 0.0]]))}
    ev = ChildProcessEvidence(child, lambda p: cims[p])
    q = DenseRateSpec(np.array([[0.0, 10.0], [10.0, 0.0]]))
    fac = build_hmm_factors(q, Uniformization(20.0), FiniteInitial([0.5, 0.5]),
                            [0.5, 0.51], 1.0, evidence=(ev,))
    table = fac.potential_table()
    # step 1 covers (0.5, 0.51] and contains the child jump
    expected_diff = (np.log(100.0) - 100.0 * 0.01) - (np.log(10.0)
                                                      - 10.0 * 0.01)
    assert table[1][1] - table[1][0] == pytest.approx(expected_diff)


def test_segmented_kernels_switch_with_time():
    qa = DenseRateSpec(np.array([[0.0, 1.0], [1.0, 0.0]]))
    qb = DenseRateSpec(np.array([[0.0, 4.0], [4.0, 0.0]]))
    seg = SegmentedRates([0.0, 0.5, 1.0], [qa, qb])
    fac = build_hmm_factors_segmented(seg, Uniformization(10.0),
                                      FiniteInitial([0.5, 0.5]),
                                      [0.2, 0.7], states=[0, 1])
    k1 = np.exp(fac.log_kernel_matrix(1))  # transition at t=0.2 -> qa
    k2 = np.exp(fac.log_kernel_matrix(2))  # transition at t=0.7 -> qb
    assert k1[0, 1] == pytest.approx(0.1)
    assert k2[0, 1] == pytest.approx(0.4)


def test_holding_factors_piecewise_integration():
    qa = DenseRateSpec(np.array([[0.0, 1.0], [2.0, 0.0]]))
    qb = DenseRateSpec(np.array([[0.0, 3.0], [5.0, 0.0]]))
    seg = SegmentedRates([0.0, 0.5, 1.0], [qa, qb])
    fac = build_hmm_factors_segmented(seg, HomogeneousVirtual(2.0),
                                      FiniteInitial([0.5, 0.5]),
                                      [0.25, 0.75], states=[0, 1])
    table = fac.potential_table()
    # step 1 covers (0.25, 0.75], straddling the rate switch at 0.5:
    # state 0 integral = (1+2)*0.25 + (3+2)*0.25; end factor log R at 0.75
    want = -(3.0 * 0.25 + 5.0 * 0.25) + np.log(3.0 + 2.0)
    assert table[1][0] == pytest.approx(want)
