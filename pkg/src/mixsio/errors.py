"""Exception and warning classes raised across the package."""


class MixsioError(Exception):
    """Base class for errors raised by mixsio."""


class InvalidRangeError(MixsioError, ValueError):
    pass


class UnsupportedDimensionError(MixsioError, ValueError):
    pass


class DimensionMismatchError(MixsioError, ValueError):
    pass


class NonFiniteValueError(MixsioError, ValueError):
    pass


class SingularInputError(MixsioError, ValueError):
    pass


class MissingMultiplierError(MixsioError, ValueError):
    pass


class SupportLeakageError(MixsioError, RuntimeError):
    pass


class ConfigError(MixsioError, ValueError):
    pass


class SupportLeakageWarning(RuntimeWarning):
    """Field is not small enough at the edge of the periodic box."""


class NonCancellingKernelWarning(RuntimeWarning):
    """Kernel lacks a vanishing spherical mean; P.V. value is a raw truncation."""
