"""Atomic model of the diamond four-level system in units of gamma_03.

Levels |0>, |1>, |2>, |3> are coupled by pump a (0-1), the signal (1-2),
pump b (2-3, driven from 3) and the idler (0-3).  Every frequency in this
module is measured in units of the 0-3 decay rate, so ``gamma_03 = 1`` unless
a caller deliberately rescales.  Rabi frequencies follow the half-standard
convention: ``omega_a`` is ``d E / (2 hbar)``.

The coupling coefficients are stored as dimensionless products with the
medium length (``beta_sL`` etc.), which is the only form the propagation
formulas need.  The prefactor ``N |g_i|^2 L / c`` reduces to ``opd/2`` in
these units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import SingularDenominator

__all__ = [
    "DecayRates",
    "PumpConfig",
    "ProbeConfig",
    "EnsembleConfig",
    "SteadyStateAtoms",
    "Denominators",
    "CouplingCoefficients",
    "default_rb87_rates",
    "steady_state",
    "denominators",
    "coefficients",
    "operating_point",
    "SINGULAR_RTOL",
]

# |d| below this fraction of (max |T|)^2 is treated as singular.
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class DecayRates:
    """Natural decay rates, in units of gamma_03."""

    gamma_03: float = 1.0
    gamma_01: float = 27.7 / 26.24
    gamma_12: float = 1 / 2.76
    gamma_32: float = 1 / 5.38

    def __post_init__(self):
        for name in ("gamma_03", "gamma_01", "gamma_12", "gamma_32"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def gamma_2(self) -> float:
        """Total decay rate out of level |2>."""
        return self.gamma_12 + self.gamma_32


@dataclass(frozen=True)
class PumpConfig:
    omega_a: float
    omega_b: float
    delta_1: float = 0.0
    delta_b: float = 0.0

    def __post_init__(self):
        if self.omega_a < 0 or self.omega_b < 0:
            raise ValueError("pump Rabi frequencies must be nonnegative")

    def flipped(self) -> "PumpConfig":
        """Same pumps with both detunings negated."""
        return PumpConfig(self.omega_a, self.omega_b, -self.delta_1, -self.delta_b)


@dataclass(frozen=True)
class ProbeConfig:
    """Idler detuning plus the signal detunings fixed by energy conservation.

    Build it with :meth:`matched` so that ``dw_s = dw_i - delta_1 + delta_b``
    holds by construction.
    """

    dw_i: float
    dw_s: float
    delta_2: float

    @classmethod
    def matched(cls, pump: PumpConfig, dw_i: float) -> "ProbeConfig":
        dw_s = dw_i - pump.delta_1 + pump.delta_b
        return cls(dw_i=dw_i, dw_s=dw_s, delta_2=pump.delta_1 + dw_s)


@dataclass(frozen=True)
class EnsembleConfig:
    """Optical depth and geometry of the atomic cloud.

    ``coupling_ratio`` is ``|g_s| / |g_i|``.  ``density`` (m^-3) only feeds
    physical reporting scales.
    """

    opd: float = 150.0
    length: float = 6e-3
    coupling_ratio: float = 1.0
    density: Optional[float] = None

    def __post_init__(self):
        if not self.opd > 0:
            raise ValueError("opd must be > 0")
        if not self.length > 0:
            raise ValueError("length must be > 0")
        if not self.coupling_ratio > 0:
            raise ValueError("coupling_ratio must be > 0")
        if self.density is not None and not self.density > 0:
            raise ValueError("density must be > 0 when given")

    def with_opd(self, opd: float) -> "EnsembleConfig":
        return EnsembleConfig(opd, self.length, self.coupling_ratio, self.density)


@dataclass(frozen=True)
class SteadyStateAtoms:
    sigma11_s: float
    sigma00_s: float
    sigma01_s: complex


@dataclass(frozen=True)
class Denominators:
    """Complex linewidth factors and the coupling denominator D."""

    t01: complex
    t32c: complex
    t02: complex
    t13: complex
    t12: complex
    t03: complex
    d: complex
    omega_a: float
    omega_b: float

    def recompute_d(self) -> complex:
        return _d_combination(self.t02, self.t03, self.t12, self.t13,
                              self.omega_a ** 2, self.omega_b ** 2)

    def scale(self) -> float:
        """Largest |T| among the factors that enter D."""
        return max(abs(self.t02), abs(self.t03), abs(self.t12), abs(self.t13))


@dataclass(frozen=True)
class CouplingCoefficients:
    """Self- and cross-coupling coefficients times the medium length."""

    beta_sL: complex
    alpha_iL: complex
    kappa_sL: complex
    kappa_iL: complex

    def swapped(self) -> "CouplingCoefficients":
        """Interchange the two cross couplings (down <-> up conversion)."""
        return CouplingCoefficients(self.beta_sL, self.alpha_iL, self.kappa_iL, self.kappa_sL)

    def as_tuple(self):
        return (self.beta_sL, self.alpha_iL, self.kappa_sL, self.kappa_iL)


def default_rb87_rates() -> DecayRates:
    """87Rb decay rates: gamma_03 = 1/27.7 ns, gamma_01 = 1/26.24 ns,
    gamma_12 = gamma_03/2.76, gamma_32 = gamma_03/5.38."""
    return DecayRates(gamma_03=1.0, gamma_01=27.7 / 26.24,
                      gamma_12=1 / 2.76, gamma_32=1 / 5.38)


def steady_state(pump: PumpConfig, rates: DecayRates) -> SteadyStateAtoms:
    """Zeroth-order (probe-free) populations and pump-a coherence."""
    oa2 = pump.omega_a ** 2
    s11 = oa2 / (pump.delta_1 ** 2 + rates.gamma_01 ** 2 / 4 + 2 * oa2)
    t01 = rates.gamma_01 / 2 - 1j * pump.delta_1
    s01 = 1j * pump.omega_a * (1 - 2 * s11) / t01
    return SteadyStateAtoms(sigma11_s=s11, sigma00_s=1 - s11, sigma01_s=s01)


def _d_combination(t02, t03, t12, t13, oa2, ob2):
    return (t12 * t03
            + t12 * (oa2 / t13 + ob2 / t02)
            + t03 * (oa2 / t02 + ob2 / t13)
            + (oa2 - ob2) ** 2 / (t02 * t13))


def denominators(pump: PumpConfig, probe: ProbeConfig, rates: DecayRates) -> Denominators:
    g01, g03, g2 = rates.gamma_01, rates.gamma_03, rates.gamma_2
    t01 = g01 / 2 - 1j * pump.delta_1
    t32c = (g03 + g2) / 2 + 1j * pump.delta_b
    t02 = g2 / 2 - 1j * probe.delta_2
    t13 = (g01 + g03) / 2 + 1j * pump.delta_1 - 1j * probe.dw_i
    t12 = (g01 + g2) / 2 - 1j * probe.dw_s
    t03 = g03 / 2 - 1j * probe.dw_i
    d = _d_combination(t02, t03, t12, t13, pump.omega_a ** 2, pump.omega_b ** 2)
    return Denominators(t01, t32c, t02, t13, t12, t03, d, pump.omega_a, pump.omega_b)


def coefficients(pump: PumpConfig, probe: ProbeConfig, ens: EnsembleConfig,
                 rates: DecayRates) -> CouplingCoefficients:
    """Coupling coefficient products beta_s L, alpha_i L, kappa_s L, kappa_i L.

    Raises
    ------
    SingularDenominator
        If ``|D| < SINGULAR_RTOL * (max |T|)^2``.
    """
    den = denominators(pump, probe, rates)
    if abs(den.d) < SINGULAR_RTOL * den.scale() ** 2:
        raise SingularDenominator(
            "coupling denominator vanishes",
            omega_a=pump.omega_a, omega_b=pump.omega_b, delta_1=pump.delta_1,
            delta_b=pump.delta_b, dw_i=probe.dw_i)
    atoms = steady_state(pump, rates)
    s11, s00 = atoms.sigma11_s, atoms.sigma00_s
    s01 = atoms.sigma01_s
    s01d = s01.conjugate()
    oa, ob = pump.omega_a, pump.omega_b
    oa2, ob2 = oa * oa, ob * ob
    t02, t03, t12, t13 = den.t02, den.t03, den.t12, den.t13

    # N |g_i|^2 L / c = opd * gamma_03 / 2; g_s enters through r = g_s / g_i
    pre = ens.opd * rates.gamma_03 / 2 / den.d
    r = ens.coupling_ratio

    beta = -pre * r * r * (s11 * (t03 + oa2 / t13 + ob2 / t02)
                           - 1j * oa * s01 / t02 * (t03 + (oa2 - ob2) / t13))
    kappa_s = -pre * r * (s00 * (oa * ob / t02 + oa * ob / t13)
                          + 1j * ob * s01d / t13 * (t03 + (ob2 - oa2) / t02))
    kappa_i = -pre * r * (s11 * (oa * ob / t02 + oa * ob / t13)
                          + 1j * ob * s01 / t02 * (t12 + (ob2 - oa2) / t13))
    alpha = -pre * (s00 * (t12 + oa2 / t02 + ob2 / t13)
                    - 1j * oa * s01d / t13 * (t12 + (oa2 - ob2) / t02))
    return CouplingCoefficients(complex(beta), complex(alpha), complex(kappa_s), complex(kappa_i))


def operating_point(omega_a, omega_b, delta_1, delta_b, dw_i):
    """Pump and matched probe configs for a five-parameter point."""
    pump = PumpConfig(float(omega_a), float(omega_b), float(delta_1), float(delta_b))
    return pump, ProbeConfig.matched(pump, float(dw_i))
