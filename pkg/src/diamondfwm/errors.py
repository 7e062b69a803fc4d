"""Exception hierarchy shared by the library and the command-line front end."""


class DiamondFWMError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(DiamondFWMError):
    """A computation reached a pathological or unstable state.

    The CLI maps every subclass to exit code 3.
    """

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = dict(context)

    def __str__(self):
        base = super().__str__()
        if not self.context:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
        return f"{base} [{extra}]"


class SingularDenominator(NumericalError):
    """The coupling denominator D vanished relative to its T-factor scale."""


class NonFiniteState(NumericalError):
    """NaN or Inf appeared in the Maxwell-Bloch state; try a smaller time step."""


class PopulationViolation(NumericalError):
    """A population left [0, 1] or picked up an imaginary part beyond tolerance."""


class ZeroInput(DiamondFWMError, ValueError):
    """The input idler energy is too small to normalise an efficiency."""


class NoModulation(DiamondFWMError, ValueError):
    """No spectral peak stands out of the noise floor of an intensity trace."""


class ConfigError(DiamondFWMError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class BudgetExhausted(UserWarning):
    """The optimizer ran out of objective evaluations before converging."""
