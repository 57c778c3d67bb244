"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates an operation's preconditions (shape, range)."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range."""


class ScenarioError(ConfigError):
    """A scenario violates its geometric invariants."""


class NumericFailure(FloatingPointError):
    """Integration produced a non-finite state."""

    def __init__(self, message, *, robot=None, step=None, sample=None):
        super().__init__(message)
        self.robot = robot
        self.step = step
        self.sample = sample
