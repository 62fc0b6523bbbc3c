"""Exception types shared across the package."""


class MjpGibbsError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MjpGibbsError):
    """Invalid sampler or model configuration."""


class PolicyViolationError(MjpGibbsError):
    """Virtual-jump policy does not dominate the exit rate at some state."""

    def __init__(self, state, total_rate, exit_rate):
        self.state = state
        self.total_rate = total_rate
        self.exit_rate = exit_rate
        super().__init__(
            f"augmentation rate {total_rate} < exit rate {exit_rate} "
            f"at state {state!r}"
        )


class ExplosionError(MjpGibbsError):
    """Simulated path exceeded the jump cap (likely explosive rates)."""


class WeightCollapseError(MjpGibbsError):
    """All particle weights vanished at some SMC step."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"all particle weights are zero at step {step}")


class DegeneratePotentialError(MjpGibbsError):
    """A potential is -inf at every state of some step."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"potential is zero on the whole state space at step {step}")


class UnsupportedModelError(MjpGibbsError):
    """Operation requires a finite, enumerable state space."""


class SamplingError(MjpGibbsError):
    """Runtime failure while running a chain."""
