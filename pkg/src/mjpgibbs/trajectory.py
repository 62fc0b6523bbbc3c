"""Piecewise-constant trajectory representations and JSON serialization."""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .errors import ConfigError


def _check_times(times, t_max):
    prev = 0.0
    for t in times:
        if not (prev < t < t_max):
            raise ConfigError(
                f"jump times must be strictly increasing in (0, {t_max}); got {t}"
            )
        prev = t


@dataclass(frozen=True)
class Trajectory:
    """Right-continuous path: initial state, true-jump times and post-jump states.

    Consecutive states are distinct and times lie strictly inside (0, t_max).
    """

    s0: object
    times: tuple
    states: tuple
    t_max: float

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.times) != len(self.states):
            raise ConfigError("times and states must have equal length")
        if self.t_max <= 0:
            raise ConfigError("t_max must be positive")
        _check_times(self.times, self.t_max)
        prev = self.s0
        for s in self.states:
            if s == prev:
                raise ConfigError("consecutive trajectory states must differ")
            prev = s

    @property
    def m(self) -> int:
        return len(self.times)

    @property
    def all_states(self) -> tuple:
        return (self.s0,) + self.states

    def state_at(self, t):
        """State at time t (right-continuous)."""
        if not 0 <= t <= self.t_max:
            raise ConfigError(f"time {t} outside [0, {self.t_max}]")
        j = bisect.bisect_right(self.times, t)
        return self.s0 if j == 0 else self.states[j - 1]

    def segments(self):
        """Yield (t0, t1, state) pieces partitioning [0, t_max]."""
        bounds = (0.0,) + self.times + (self.t_max,)
        states = self.all_states
        for j in range(len(states)):
            yield bounds[j], bounds[j + 1], states[j]

    def to_jsonable(self, encode=lambda s: s) -> dict:
        return {
            "s0": encode(self.s0),
            "t_max": self.t_max,
            "jumps": [[t, encode(s)] for t, s in zip(self.times, self.states)],
        }

    @classmethod
    def from_jsonable(cls, obj: dict, decode=lambda s: s) -> "Trajectory":
        jumps = obj.get("jumps", [])
        return cls(
            s0=decode(obj["s0"]),
            times=tuple(t for t, _ in jumps),
            states=tuple(decode(s) for _, s in jumps),
            t_max=float(obj["t_max"]),
        )


@dataclass(frozen=True)
class AugmentedTrajectory:
    """Potential-jump grid with redundant skeleton.

    A grid point where the skeleton repeats the previous state is a virtual
    jump; the others are the true jumps.
    """

    s0: object
    times: tuple
    states: tuple
    t_max: float

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.times) != len(self.states):
            raise ConfigError("times and states must have equal length")
        if self.t_max <= 0:
            raise ConfigError("t_max must be positive")
        _check_times(self.times, self.t_max)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def skeleton(self) -> tuple:
        return (self.s0,) + self.states

    def true_jump_indices(self):
        prev = self.s0
        idx = []
        for k, s in enumerate(self.states):
            if s != prev:
                idx.append(k)
            prev = s
        return idx

    def virtual_times(self) -> tuple:
        true = set(self.true_jump_indices())
        return tuple(t for k, t in enumerate(self.times) if k not in true)

    def strip(self) -> Trajectory:
        idx = self.true_jump_indices()
        return Trajectory(
            s0=self.s0,
            times=tuple(self.times[k] for k in idx),
            states=tuple(self.states[k] for k in idx),
            t_max=self.t_max,
        )

    def with_skeleton(self, skeleton) -> "AugmentedTrajectory":
        """Same grid, new redundant skeleton (s_0..s_n)."""
        skeleton = tuple(skeleton)
        if len(skeleton) != self.n + 1:
            raise ConfigError("skeleton length must be n+1")
        return AugmentedTrajectory(
            s0=skeleton[0], times=self.times, states=skeleton[1:], t_max=self.t_max
        )

    def to_jsonable(self, encode=lambda s: s) -> dict:
        strip = self.strip()
        out = strip.to_jsonable(encode)
        out["grid"] = [[t, encode(s)] for t, s in zip(self.times, self.states)]
        return out

    @classmethod
    def from_jsonable(cls, obj: dict, decode=lambda s: s) -> "AugmentedTrajectory":
        grid = obj["grid"]
        return cls(
            s0=decode(obj["s0"]),
            times=tuple(t for t, _ in grid),
            states=tuple(decode(s) for _, s in grid),
            t_max=float(obj["t_max"]),
        )


def strip_virtual(aug: AugmentedTrajectory) -> Trajectory:
    """Drop virtual jumps, keeping exactly the indices where the skeleton moves."""
    return aug.strip()
