"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
contract violations (config, schema, model format) exit 2, and numeric
failures inside the simulator exit 3.
"""


class GridSentryError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(GridSentryError):
    """A config file or parameter set violates its documented contract."""


class SchemaError(GridSentryError):
    """A table, CSV file, or model file does not match the declared layout."""


class SimulationDiverged(GridSentryError):
    """The plant state became non-finite during integration."""

    def __init__(self, t: float, detail: str = ""):
        self.t = t
        msg = f"non-finite state at t={t:.6f} s"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
