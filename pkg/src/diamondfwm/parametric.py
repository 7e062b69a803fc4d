"""Closed-form solution of the coupled signal/idler parametric equations.

The fields obey ``d/dz (E_s, E_i) = A (E_s, E_i)`` with the constant matrix
``A = [[beta_s, kappa_s], [kappa_i, alpha_i]]``.  Over the full medium the
exact propagator is

    exp(A L) = e^{p} [cosh(w) I + sinh(w)/w (A L - p I)],   p = (alpha_i + beta_s) L / 2

with ``w = sqrt(q^2 + kappa_s kappa_i L^2)`` and ``q = (beta_s - alpha_i) L / 2``.
Both cosh(w) and sinh(w)/w are even in w, so the square-root branch drops out.

The map is stored with the usual convention ``out = M @ in`` acting on
``(E_s, E_i)``: ``m12`` carries an input idler into the output signal
(down-conversion) and ``m21`` an input signal into the output idler.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import SingularDenominator
from .model import (
    CouplingCoefficients,
    DecayRates,
    EnsembleConfig,
    PumpConfig,
    ProbeConfig,
    coefficients,
)

__all__ = [
    "TransferRecord",
    "ConversionResult",
    "DressedSpectrum",
    "SpectrumRow",
    "SpectrumTable",
    "transfer",
    "efficiencies",
    "ideal_limit",
    "dressed_spectrum",
    "spectrum",
    "absorption_peaks",
    "SERIES_SWITCH",
]

# Below this |w| the series for cosh(w) and sinh(w)/w is used.
SERIES_SWITCH = 1e-4


@dataclass(frozen=True)
class TransferRecord:
    q: complex
    w: complex
    m11: complex
    m12: complex
    m21: complex
    m22: complex

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def apply(self, e_s0: complex, e_i0: complex):
        return (self.m11 * e_s0 + self.m12 * e_i0, self.m21 * e_s0 + self.m22 * e_i0)


@dataclass(frozen=True)
class ConversionResult:
    eta_d: float
    eta_u: float
    t_d: float
    t_u: float


@dataclass(frozen=True)
class DressedSpectrum:
    shift_a: tuple
    shift_b: tuple
    peak_positions: tuple
    window_centers: tuple
    resonant: bool

    @property
    def label(self) -> str:
        return "resonant" if self.resonant else "predicted"


@dataclass(frozen=True)
class SpectrumRow:
    dw_i: float
    coeffs: CouplingCoefficients
    result: ConversionResult


@dataclass(frozen=True)
class SpectrumTable:
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        """Column by name: ``dw_i``, a coefficient field or a result field."""
        if name == "dw_i":
            return np.array([r.dw_i for r in self.rows])
        if name in CouplingCoefficients.__dataclass_fields__:
            return np.array([getattr(r.coeffs, name) for r in self.rows])
        return np.array([getattr(r.result, name) for r in self.rows])


def _even_functions(w: complex):
    """cosh(w) and sinh(w)/w, with a short series near w = 0."""
    if abs(w) < SERIES_SWITCH:
        w2 = w * w
        return 1 + w2 / 2 + w2 * w2 / 24, 1 + w2 / 6 + w2 * w2 / 120
    return cmath.cosh(w), cmath.sinh(w) / w


def _transfer_with_branch(coeffs: CouplingCoefficients, w: complex) -> TransferRecord:
    beta, alpha, ks, ki = coeffs.as_tuple()
    q = (beta - alpha) / 2
    pref = cmath.exp((alpha + beta) / 2)
    ch, shc = _even_functions(w)
    return TransferRecord(
        q=q, w=w,
        m11=pref * (ch + q * shc),
        m12=pref * ks * shc,
        m21=pref * ki * shc,
        m22=pref * (ch - q * shc),
    )


def transfer(coeffs: CouplingCoefficients) -> TransferRecord:
    """Transfer map from ``(E_s(0), E_i(0))`` to ``(E_s(L), E_i(L))``."""
    beta, alpha, ks, ki = coeffs.as_tuple()
    q = (beta - alpha) / 2
    w = cmath.sqrt(q * q + ks * ki)
    return _transfer_with_branch(coeffs, w)


def efficiencies(coeffs: CouplingCoefficients) -> ConversionResult:
    """Down/up conversion efficiencies and the matching transmissions."""
    rec = transfer(coeffs)
    return ConversionResult(
        eta_d=abs(rec.m12) ** 2,
        eta_u=abs(rec.m21) ** 2,
        t_d=abs(rec.m22) ** 2,
        t_u=abs(rec.m11) ** 2,
    )


def ideal_limit(kappa_im: float, L_norm: float = 1.0):
    """Lossless limit with purely imaginary, equal cross couplings.

    Returns ``(eta, t) = (sin^2 x, cos^2 x)`` with ``x = kappa_im * L_norm``.
    """
    x = kappa_im * L_norm
    s = math.sin(x) ** 2
    return s, 1.0 - s


def _dressed_eigenvalues(omega, delta, sign):
    root = math.sqrt(delta * delta + 4 * omega * omega)
    return ((sign * delta + root) / 2, (sign * delta - root) / 2)


def dressed_spectrum(pump: PumpConfig) -> DressedSpectrum:
    """Dressed-state level shifts and the idler absorption resonances.

    Pump a mixes |0> with |1> (detuned by -delta_1 in the idler frame), pump b
    mixes |3> with |2> (detuned by +delta_b).  An idler resonance sits where
    ``dw_i`` cancels the sum of one eigenvalue from each dressed pair, which
    reduces to ``+-(omega_a +- omega_b)`` for resonant pumps.
    """
    oa, ob = pump.omega_a, pump.omega_b
    d1, db = pump.delta_1, pump.delta_b
    root_a = math.sqrt(d1 * d1 + 4 * oa * oa)
    root_b = math.sqrt(db * db + 4 * ob * ob)
    shift_a = (abs(d1 + root_a) / 2, abs(d1 - root_a) / 2)
    shift_b = (abs(db + root_b) / 2, abs(db - root_b) / 2)

    lam_a = _dressed_eigenvalues(oa, d1, -1)
    lam_b = _dressed_eigenvalues(ob, db, +1)
    peaks = sorted(-(la + lb) for la in lam_a for lb in lam_b)
    resonant = d1 == 0 and db == 0
    if resonant:
        # exact closed form; avoids rounding from the square roots
        s, d = oa + ob, abs(oa - ob)
        peaks = [-s, -d, d, s]
    windows = tuple((peaks[k] + peaks[k + 1]) / 2 for k in range(3))
    return DressedSpectrum(shift_a, shift_b, tuple(float(p) for p in peaks),
                           windows, resonant)


def _spectrum_row(args):
    pump, ens, rates, dw_i = args
    probe = ProbeConfig.matched(pump, dw_i)
    try:
        c = coefficients(pump, probe, ens, rates)
    except SingularDenominator as exc:
        exc.context["dw_i"] = dw_i
        raise
    return SpectrumRow(float(dw_i), c, efficiencies(c))


def spectrum(pump: PumpConfig, ens: EnsembleConfig, rates: DecayRates,
             dw_i_grid: Sequence[float], jobs: int = 1) -> SpectrumTable:
    """Coefficients and efficiencies along a strictly increasing idler grid."""
    grid = [float(x) for x in dw_i_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("dw_i grid must be strictly increasing")
    tasks = [(pump, ens, rates, x) for x in grid]
    if jobs > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_spectrum_row, tasks, chunksize=chunk))
    else:
        rows = [_spectrum_row(t) for t in tasks]
    return SpectrumTable(tuple(rows))


def absorption_peaks(table: SpectrumTable, prominence: float = 0.5) -> np.ndarray:
    """Idler detunings of the signal absorption maxima, ``-Re(beta_s L)``."""
    idx, _ = find_peaks(-np.real(table.column("beta_sL")), prominence=prominence)
    return table.column("dw_i")[idx]
