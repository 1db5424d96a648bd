"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """Invalid model, scenario or run configuration."""


class TraceParseError(ValueError):
    """Malformed environment trace; message names the row and column."""


class InsufficientDataError(ValueError):
    """Calibration grid too small to fit a compensation polynomial."""


class FitError(ValueError):
    """Least-squares fit failed (singular design matrix)."""


class EngineContractError(RuntimeError):
    """Engine asked a node to step across more than one phase boundary."""
