"""Exception types.  ``exit_code`` is what the CLI returns when one escapes."""


class DHYMError(Exception):
    exit_code = 2


class InputError(DHYMError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 1


class SupercriticalViolation(InputError):
    """Im(alpha + i beta)^n <= 0, so the phase is not in (0, pi)."""


class DegenerateVolume(InputError):
    """Im(alpha_s + i beta)^n == 0: the slope is undefined."""


class UnsupportedDimension(InputError):
    pass


class IllPosed(InputError):
    """The initial potential is not defined for these parameters."""


class NoRootInBracket(DHYMError):
    """No sign change of F above q; the triple looks dHYM stable."""

    exit_code = 1


class NegativeDiscriminant(DHYMError):
    pass


class DegenerateDenominator(DHYMError):
    pass


class PhaseOutOfRange(DHYMError):
    pass


class CflViolation(DHYMError):
    pass


class NotConverged(RuntimeWarning):
    """Emitted (as a warning) when a flow run stops at t_max."""
