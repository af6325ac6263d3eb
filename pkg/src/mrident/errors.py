"""Exception types raised across the package."""


class MridentError(Exception):
    """Base class for all package errors."""


class NotDivisible(MridentError, ValueError):
    """A length or grid size is not a multiple of the lift factor."""


class DimensionMismatch(MridentError, ValueError):
    pass


class SingularResolvent(MridentError, ArithmeticError):
    """``zI - A`` is numerically singular at the requested frequency."""


class UnstableLoop(MridentError, ArithmeticError):
    pass


class SingularSensitivity(MridentError, ArithmeticError):
    """``I + K_l P_l`` is numerically singular at some bin."""


class OffUnitCircle(MridentError, ValueError):
    pass


class OffGrid(MridentError, ValueError):
    """A frequency does not fall on the DFT bin grid of a lifted FRF."""


class WrongKind(MridentError, ValueError):
    pass


class BadIndex(MridentError, IndexError):
    pass


class NotIdentifiable(MridentError, ValueError):
    """The LPM window is too short for the number of parameters."""


class InsufficientData(MridentError, ValueError):
    pass


class SingularS(MridentError, ArithmeticError):
    pass


class ZeroInput(MridentError, ValueError):
    pass


class IngestError(MridentError, ValueError):
    """A recorded-data file is missing a column or is malformed."""


class ConfigError(MridentError, ValueError):
    pass


class IllConditionedWarning(UserWarning):
    """Emitted when some LPM or inversion bins were flagged ill-conditioned."""
