"""Frequency conversion in a diamond four-level atomic ensemble.

Submodules
----------
model       atomic steady state and coupling coefficients
parametric  closed-form transfer map, spectra, dressed-state resonances
optimizer   multi-start search for the best conversion efficiency
mbsolver    time-domain Maxwell-Bloch propagation of pulses
cli         command-line front end
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExhausted,
    ConfigError,
    DiamondFWMError,
    NoModulation,
    NonFiniteState,
    NumericalError,
    PopulationViolation,
    SingularDenominator,
    ZeroInput,
)
from .model import (  # noqa: E402
    CouplingCoefficients,
    DecayRates,
    EnsembleConfig,
    ProbeConfig,
    PumpConfig,
    coefficients,
    default_rb87_rates,
    operating_point,
)
from .parametric import dressed_spectrum, efficiencies, spectrum, transfer  # noqa: E402
from .optimizer import Bounds, efficiency_vs_opd, optimize_at_opd  # noqa: E402
from .mbsolver import GridSpec, PulseShape, characteristic_scales, simulate  # noqa: E402
