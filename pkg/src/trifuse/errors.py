"""Exception hierarchy shared by the library and the command line."""


class TrifuseError(Exception):
    """Base class for all library errors."""


class DimensionError(TrifuseError, ValueError):
    """Operand shapes do not agree."""


class OracleScaleError(TrifuseError, ValueError):
    """A brute-force tensor would exceed the configured entry cap."""


class ConfigError(TrifuseError, ValueError):
    """Invalid hyper-parameters or run configuration."""


class DivergenceError(TrifuseError, FloatingPointError):
    """A loss or gradient became non-finite."""


class TapeError(TrifuseError, RuntimeError):
    """Backward was requested without a usable forward record."""
