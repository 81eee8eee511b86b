"""Exception hierarchy shared by every module of the package."""


class AncError(Exception):
    """Base class for all package errors."""


class ConfigError(AncError, ValueError):
    """Invalid configuration value or malformed configuration file.

    ``line`` and ``key`` are filled in when the error can be anchored to
    a location in a config file.
    """

    def __init__(self, message, key=None, line=None):
        self.message = message
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class FormatError(AncError, ValueError):
    """Malformed WAV container."""


class UnsupportedFormatError(FormatError):
    """Well-formed WAV container using a depth or encoding we do not read."""


class EmptyInputError(AncError, ValueError):
    pass


class RangeError(AncError, ValueError):
    pass


class NumericError(AncError, ArithmeticError):
    """Non-finite data or a numerically unstable filter state.

    ``block_index`` is attached by the streaming pipeline.
    """

    def __init__(self, message, block_index=None):
        self.block_index = block_index
        if block_index is not None:
            message = f"block {block_index}: {message}"
        super().__init__(message)


class InstabilityError(NumericError):
    """RLS inverse-correlation matrix lost positive definiteness."""


class UndefinedReferenceError(AncError, ValueError):
    """SNR requested against an all-zero clean reference."""


class NoConvergenceError(AncError, RuntimeError):
    pass
