"""Exception hierarchy shared by all modules."""


class LieZalcmanError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(LieZalcmanError, ValueError):
    pass


class DegenerateElementError(LieZalcmanError, ValueError):
    """A group element violates its instance invariant (e.g. near-singular)."""


class RangeError(LieZalcmanError, OverflowError):
    """An exponential would leave the double-precision range."""


class InvalidFrameError(LieZalcmanError, ValueError):
    pass


class DomainError(LieZalcmanError, ValueError):
    """A point, ball or region is not contained in the family's domain."""


class DegenerateFamilyError(LieZalcmanError, ValueError):
    """All differentials vanish, so no rescaling exists."""


class ScanError(LieZalcmanError, RuntimeError):
    pass


class ConsistencyError(LieZalcmanError, RuntimeError):
    """Internal bookkeeping check failed; indicates a broken rescaling step."""


class ConfigError(LieZalcmanError, ValueError):
    pass
