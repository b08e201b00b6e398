"""Exception types shared across the simulator.

Each exception carries a short machine-readable ``category`` used by the
CLI to map failures onto exit codes.
"""


class StarQkdError(Exception):
    """Base class for all simulator errors."""

    category = "internal-error"


class ConfigurationError(StarQkdError, ValueError):
    """A parameter value violates its physical or protocol constraints."""

    category = "configuration-error"


class AllocationError(StarQkdError, ValueError):
    """A frequency window or channel allocation is impossible."""

    category = "allocation-error"


class ScenarioError(StarQkdError, ValueError):
    """A scenario failed validation.

    ``violations`` lists every individual problem found.
    """

    category = "validation-error"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SyncFailure(StarQkdError, RuntimeError):
    """Timing synchronization could not be established."""

    category = "sync-failure"


class EmptySiftError(StarQkdError, RuntimeError):
    """An operation needed sifted bits but none were available."""

    category = "protocol-error"
