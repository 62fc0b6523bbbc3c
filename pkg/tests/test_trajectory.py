import numpy as np
import pytest
from hypothesis import given, strategies as st

from mjpgibbs import AugmentedTrajectory, ConfigError, Trajectory, strip_virtual


def test_trajectory_basic():
    tr = Trajectory(s0=0, times=(0.2, 0.7), states=(1, 0), t_max=1.0)
    assert tr.m == 2
    assert tr.all_states == (0, 1, 0)
    assert tr.state_at(0.0) == 0
    assert tr.state_at(0.2) == 1  # right-continuous
    assert tr.state_at(0.5) == 1
    assert tr.state_at(1.0) == 0
    assert list(tr.segments()) == [(0.0, 0.2, 0), (0.2, 0.7, 1), (0.7, 1.0, 0)]


def test_trajectory_validation():
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(0.5, 0.2), states=(1, 0), t_max=1.0)
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(1.0,), states=(1,), t_max=1.0)
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(0.0,), states=(1,), t_max=1.0)
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(0.2, 0.4), states=(1, 1), t_max=1.0)
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(0.2,), states=(0,), t_max=1.0)
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(0.2,), states=(1, 0), t_max=1.0)
    with pytest.raises(ConfigError):
        Trajectory(s0=0, times=(), states=(), t_max=0.0)


def test_state_at_out_of_range():
    tr = Trajectory(s0=0, times=(), states=(), t_max=1.0)
    with pytest.raises(ConfigError):
        tr.state_at(-0.1)
    with pytest.raises(ConfigError):
        tr.state_at(1.1)


def test_json_round_trip():
    tr = Trajectory(s0=0, times=(0.25, 0.5), states=(1, 2), t_max=2.0)
    assert Trajectory.from_jsonable(tr.to_jsonable()) == tr


def test_json_round_trip_tuple_states():
    tr = Trajectory(s0=(1, 2), times=(0.5,), states=((1, 3),), t_max=1.0)
    enc = lambda s: list(s)
    dec = lambda s: tuple(s)
    assert Trajectory.from_jsonable(tr.to_jsonable(enc), dec) == tr


def test_augmented_skeleton_and_strip():
    aug = AugmentedTrajectory(s0=0, times=(0.1, 0.4, 0.6, 0.9),
                              states=(0, 1, 1, 0), t_max=1.0)
    assert aug.n == 4
    assert aug.skeleton == (0, 0, 1, 1, 0)
    assert aug.true_jump_indices() == [1, 3]
    assert aug.virtual_times() == (0.1, 0.6)
    stripped = strip_virtual(aug)
    assert stripped == Trajectory(s0=0, times=(0.4, 0.9), states=(1, 0),
                                  t_max=1.0)


def test_augmented_allows_repeats_but_valid_times():
    with pytest.raises(ConfigError):
        AugmentedTrajectory(s0=0, times=(0.3, 0.3), states=(0, 1), t_max=1.0)


def test_with_skeleton():
    aug = AugmentedTrajectory(s0=0, times=(0.1, 0.4), states=(0, 1), t_max=1.0)
    new = aug.with_skeleton((1, 1, 0))
    assert new.s0 == 1 and new.states == (1, 0) and new.times == aug.times
    with pytest.raises(ConfigError):
        aug.with_skeleton((0, 1))


def test_augmented_json_round_trip():
    aug = AugmentedTrajectory(s0=0, times=(0.1, 0.4), states=(0, 1), t_max=1.0)
    obj = aug.to_jsonable()
    assert obj["jumps"] == [[0.4, 1]]  # stripped view
    back = AugmentedTrajectory.from_jsonable(obj)
    assert back == aug


@given(st.lists(st.floats(0.01, 0.99), min_size=0, max_size=8, unique=True),
       st.integers(0, 5))
def test_strip_preserves_state_function(times, s0):
    times = sorted(times)
    rng = np.random.default_rng(42)
    states = []
    cur = s0
    for _ in times:
        cur = (cur + rng.integers(0, 2)) % 7  # may repeat: virtual jump
        states.append(cur)
    aug = AugmentedTrajectory(s0=s0, times=tuple(times), states=tuple(states),
                              t_max=1.0)
    stripped = aug.strip()
    for t in np.linspace(0, 1, 23):
        t_aug = aug.s0
        import bisect
        j = bisect.bisect_right(aug.times, t)
        t_aug = aug.s0 if j == 0 else aug.states[j - 1]
        assert stripped.state_at(t) == t_aug
