"""Exception types shared across the package."""


class StylegramError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(StylegramError, ValueError):
    """Operands have incompatible shapes for the requested operation."""


class ConfigurationError(StylegramError, ValueError):
    """Invalid configuration: bad layer names, weights, optimizer settings, ..."""


class WeightFormatError(StylegramError, ValueError):
    """Weight or gram container file is malformed or inconsistent with the network."""


class ImageFormatError(StylegramError, ValueError):
    """Image file is malformed or uses an unsupported encoding."""


class NonFiniteError(StylegramError, ArithmeticError):
    """A loss or gradient evaluation produced NaN or Inf."""
