"""Time-domain Maxwell-Bloch integration in the co-moving frame.

Scaled variables
----------------
Time and length are measured in the cooperation time ``T_c`` and length
``L_c = c T_c`` (``T_c^-2 = gamma_03 c opd / (2 L)``).  Probe fields are
carried as ``E~ = g E T_c``, i.e. Rabi frequency times ``T_c``.  With that
choice the propagation equations are

    dE~_s/dz~ = i r^2 sigma_12,    dE~_i/dz~ = i sigma_03,

with ``r = |g_s| / |g_i|``, and every rate or Rabi frequency in the atomic
equations is multiplied by ``gamma_03 T_c``.

Scheme
------
The nine slow atomic variables live on ``nz + 1`` equally spaced sites.  Each
time step is an implicit-midpoint update of the atoms whose bilinear
atom-field products are resolved by fixed-point correction; after every
atomic pass the fields at the new time level are re-marched in z with the
trapezoidal rule.  Pumps depend on time only.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.signal import find_peaks

from .errors import NoModulation, NonFiniteState, PopulationViolation, ZeroInput
from .model import DecayRates, EnsembleConfig, ProbeConfig, PumpConfig

__all__ = [
    "C_LIGHT",
    "CharacteristicScales",
    "PulseShape",
    "GridSpec",
    "AtomicState",
    "SpaceTimeFields",
    "ConvergenceReport",
    "ModulationPeak",
    "characteristic_scales",
    "envelope",
    "enclosing_pump",
    "simulate",
    "pulse_efficiency",
    "tail_sensitivity",
    "steady_state_ratio",
    "convergence_report",
    "modulation_spectrum",
    "modulation_frequency",
]

C_LIGHT = 299_792_458.0
HBAR = 1.054_571_817e-34
EPS0 = 8.854_187_8128e-12

POPULATION_TOL = 1e-6
DEFAULT_GAMMA03_NS = 27.7
DEFAULT_IDLER_WAVELENGTH = 795e-9  # 5S1/2 - 5P1/2
SNAPSHOT_EVERY = 10


@dataclass(frozen=True)
class CharacteristicScales:
    t_c: float
    l_c: float
    e_c: Optional[float]
    z_extent: float
    gamma03_ns: float

    @property
    def rate_scale(self) -> float:
        """``gamma_03 T_c``: converts gamma_03 units to inverse ``T_c``."""
        return self.t_c / (self.gamma03_ns * 1e-9)

    def tau_to_ns(self, tau):
        return np.asarray(tau) * self.t_c * 1e9

    def ns_to_tau(self, t_ns):
        return np.asarray(t_ns) * 1e-9 / self.t_c


def characteristic_scales(ens: EnsembleConfig, rates: DecayRates = None,
                          gamma03_ns: float = DEFAULT_GAMMA03_NS,
                          idler_wavelength: float = DEFAULT_IDLER_WAVELENGTH) -> CharacteristicScales:
    if not (ens.opd > 0 and ens.length > 0):
        raise ValueError("opd and length must be positive")
    g03 = (rates.gamma_03 if rates is not None else 1.0) / (gamma03_ns * 1e-9)
    t_c = 1.0 / math.sqrt(g03 * C_LIGHT * ens.opd / (2 * ens.length))
    l_c = C_LIGHT * t_c
    e_c = None
    if ens.density is not None:
        omega_i = 2 * math.pi * C_LIGHT / idler_wavelength
        e_c = math.sqrt(ens.density * HBAR * omega_i / (2 * EPS0))
    return CharacteristicScales(t_c, l_c, e_c, ens.length / l_c, gamma03_ns)


@dataclass(frozen=True)
class PulseShape:
    """Temporal envelope; times in ns.

    ``ramped-square`` rises as ``(1 + sin(pi (t - t_r) / t_s)) / 2`` on
    ``(t_r - t_s/2, t_r + t_s/2)``, holds for ``hold`` ns, then falls with the
    mirror-image profile.  ``cw`` switches on at ``t = 0``.

    For the probes ``amplitude`` is the Rabi frequency ``g E`` in gamma_03
    units.  For the pumps it is a dimensionless profile factor multiplying
    ``omega_a`` / ``omega_b`` (normally 1).
    """

    kind: str = "ramped-square"
    amplitude: float = 1.0
    t_r: float = 0.0
    t_s: float = 0.0
    hold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cw", "ramped-square"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.kind == "ramped-square" and (self.t_s <= 0 or self.hold < 0):
            raise ValueError("ramped-square needs t_s > 0 and hold >= 0")

    @classmethod
    def square(cls, amplitude, t_r, t_s, duration):
        """Ramped square pulse whose half-maximum width is ``duration`` ns."""
        if duration < t_s:
            raise ValueError("duration must be at least the rise time t_s")
        return cls("ramped-square", amplitude, t_r, t_s, duration - t_s)

    @classmethod
    def cw(cls, amplitude=1.0):
        return cls("cw", amplitude)

    @property
    def fall_center(self) -> float:
        return self.t_r + self.t_s + self.hold

    @property
    def start(self) -> float:
        return 0.0 if self.kind == "cw" else self.t_r - self.t_s / 2

    @property
    def end(self) -> float:
        return math.inf if self.kind == "cw" else self.fall_center + self.t_s / 2

    @property
    def flat_top(self):
        return (self.t_r + self.t_s / 2, self.fall_center - self.t_s / 2)

    @property
    def half_max(self):
        """Interval between the half-maximum points of the rise and fall."""
        return (self.t_r, self.fall_center)


def envelope(shape: PulseShape, t):
    """Envelope value at time(s) ``t`` (ns)."""
    t = np.asarray(t, dtype=float)
    if shape.kind == "cw":
        return np.where(t >= 0, shape.amplitude, 0.0)
    a, tr, ts, tf = shape.amplitude, shape.t_r, shape.t_s, shape.fall_center
    rise = 0.5 * a * (1 + np.sin(np.pi * (t - tr) / ts))
    fall = 0.5 * a * (1 - np.sin(np.pi * (t - tf) / ts))
    out = np.where(t <= tr - ts / 2, 0.0, rise)
    out = np.where(t >= tr + ts / 2, a, out)
    out = np.where(t > tf - ts / 2, fall, out)
    return np.where(t >= tf + ts / 2, 0.0, out)


def enclosing_pump(idler: PulseShape, t_r: float, t_s: float, amplitude: float = 1.0) -> PulseShape:
    """Pump profile rising at ``(t_r, t_s)`` whose fall starts ``2 t_s`` after the idler ends."""
    hold = idler.end + 2 * t_s - (t_r + t_s / 2)
    return PulseShape("ramped-square", amplitude, t_r, t_s, max(hold, 0.0))


@dataclass(frozen=True)
class GridSpec:
    """Dimensionless steps, time window and corrector count.

    ``t_span=None`` picks the input pulse support plus a tail of
    ``max(5 * t_s, 200 T_c)``; ``tail_ns`` overrides the tail length.
    """

    dt: float = 0.5
    dz: float = 0.001
    t_span: Optional[float] = None
    corrector_iters: int = 2
    tail_ns: Optional[float] = None

    def __post_init__(self):
        if not (self.dt > 0 and self.dz > 0):
            raise ValueError("dt and dz must be positive")
        if self.corrector_iters < 0:
            raise ValueError("corrector_iters must be >= 0")
        if self.t_span is not None and not self.t_span > 0:
            raise ValueError("t_span must be positive")


@dataclass
class AtomicState:
    """Nine slow atomic variables per site; sigma_00 follows from the trace."""

    s01: np.ndarray
    s12: np.ndarray
    s02: np.ndarray
    s11: np.ndarray
    s22: np.ndarray
    s33: np.ndarray
    s13: np.ndarray
    s03: np.ndarray
    s32d: np.ndarray

    FIELDS = ("s01", "s12", "s02", "s11", "s22", "s33", "s13", "s03", "s32d")

    @classmethod
    def ground(cls, n_sites: int) -> "AtomicState":
        return cls.from_array(np.zeros((9, n_sites), dtype=complex))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "AtomicState":
        return cls(*[arr[k].copy() for k in range(9)])

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS])

    @property
    def sigma00(self) -> np.ndarray:
        return 1 - self.s11 - self.s22 - self.s33

    def population_error(self) -> float:
        """Worst excursion of the populations outside [0, 1] or off the real axis."""
        return _population_error(self.to_array())


def _population_error(S) -> float:
    pops = np.stack([S[3], S[4], S[5], 1 - S[3] - S[4] - S[5]])
    re = pops.real
    return float(max(np.abs(pops.imag).max(), (-re).max(), (re - 1).max(), 0.0))


@dataclass(frozen=True)
class SpaceTimeFields:
    """Scaled probe envelopes on the (z~, tau~) grid.

    Exit and entrance traces are kept at every time step; full z profiles are
    kept every ``SNAPSHOT_EVERY`` steps.
    """

    tau: np.ndarray
    t_ns: np.ndarray
    z: np.ndarray
    e_s_in: np.ndarray
    e_i_in: np.ndarray
    e_s_out: np.ndarray
    e_i_out: np.ndarray
    snap_tau: np.ndarray
    snap_e_s: np.ndarray
    snap_e_i: np.ndarray
    pump_a: np.ndarray
    pump_b: np.ndarray
    scales: CharacteristicScales
    coupling_ratio: float
    support_end_tau: float
    final_state: AtomicState
    max_population_error: float

    @property
    def z_extent(self) -> float:
        return float(self.z[-1])


def _window_tau(idler_in, signal_in, scales, grid):
    if grid.t_span is not None:
        return grid.t_span, grid.t_span
    probes = [p for p in (idler_in, signal_in) if p.amplitude > 0]
    if not probes:
        raise ValueError("t_span is required when both probe inputs are zero")
    if any(p.kind == "cw" for p in probes):
        raise ValueError("t_span is required for cw probe inputs")
    end_ns = max(p.end for p in probes)
    if grid.tail_ns is not None:
        tail_ns = grid.tail_ns
    else:
        tail_ns = max(5 * max(p.t_s for p in probes), 200 * scales.t_c * 1e9)
    end_tau = float(scales.ns_to_tau(end_ns))
    return end_tau + float(scales.ns_to_tau(tail_ns)), end_tau


def simulate(pump_a: PulseShape, pump_b: PulseShape, idler_in: PulseShape,
             signal_in: PulseShape, pump: PumpConfig, probe: ProbeConfig,
             ens: EnsembleConfig, rates: DecayRates, grid: GridSpec = GridSpec(),
             gamma03_ns: float = DEFAULT_GAMMA03_NS) -> SpaceTimeFields:
    """Integrate the Maxwell-Bloch system for the given pulses.

    Atoms start in |0> everywhere.  Raises :class:`NonFiniteState` on NaN/Inf
    and :class:`PopulationViolation` when a population leaves [0, 1] (or turns
    complex) by more than ``1e-6``.
    """
    scales = characteristic_scales(ens, rates, gamma03_ns)
    s = scales.rate_scale
    t_span, support_end = _window_tau(idler_in, signal_in, scales, grid)

    nz = max(1, int(round(scales.z_extent / grid.dz)))
    dz = scales.z_extent / nz
    n = nz + 1
    nt = int(math.ceil(t_span / grid.dt - 1e-9))
    dt = grid.dt
    tau = np.arange(nt + 1) * dt
    t_ns = scales.tau_to_ns(tau)
    t_mid_ns = scales.tau_to_ns(tau[:-1] + dt / 2)

    g01, g03 = rates.gamma_01 * s, rates.gamma_03 * s
    g12, g32, g2 = rates.gamma_12 * s, rates.gamma_32 * s, rates.gamma_2 * s
    d1, db = pump.delta_1 * s, pump.delta_b * s
    dwi, dws, d2 = probe.dw_i * s, probe.dw_s * s, probe.delta_2 * s
    r2 = ens.coupling_ratio ** 2

    oa_mid = pump.omega_a * s * envelope(pump_a, t_mid_ns)
    ob_mid = pump.omega_b * s * envelope(pump_b, t_mid_ns)
    ei_bc = s * envelope(idler_in, t_ns)
    es_bc = s * envelope(signal_in, t_ns)

    c01 = 1j * d1 - g01 / 2
    c12 = 1j * dws - (g01 + g2) / 2
    c02 = 1j * d2 - g2 / 2
    c13 = 1j * (dwi - d1) - (g01 + g03) / 2
    c03 = 1j * dwi - g03 / 2
    c32 = -1j * db - (g03 + g2) / 2

    def rhs(S, Es, Ei, oa, ob):
        s01, s12, s02, s11, s22, s33, s13, s03, s32d = S
        s00 = 1 - s11 - s22 - s33
        cEs, cEi = Es.conj(), Ei.conj()
        ia, ib = 1j * oa, 1j * ob
        out = np.empty_like(S)
        out[0] = c01 * s01 + ia * (s00 - s11) + 1j * s02 * cEs - 1j * s13.conj() * Ei
        out[1] = c12 * s12 - ia * s02 + 1j * (s11 - s22) * Es + ib * s13
        out[2] = c02 * s02 - ia * s12 + 1j * s01 * Es + ib * s03 - 1j * s32d.conj() * Ei
        p12 = 1j * (s12.conj() * Es - s12 * cEs)
        pa = ia * (s01.conj() - s01)
        pb = ib * (s32d - s32d.conj())
        p03 = 1j * (s03.conj() * Ei - s03 * cEi)
        out[3] = -g01 * s11 + g12 * s22 + pa - p12
        out[4] = -g2 * s22 + p12 + pb
        out[5] = -g03 * s33 + g32 * s22 - pb + p03
        out[6] = c13 * s13 - ia * s03 - 1j * s32d * Es + ib * s12 + 1j * s01.conj() * Ei
        out[7] = c03 * s03 - ia * s13 + ib * s02 + 1j * (s00 - s33) * Ei
        out[8] = c32 * s32d - 1j * s13 * cEs + ib * (s22 - s33) + 1j * s02.conj() * Ei
        return out

    def march(e0, pol, coef):
        out = np.empty(n, dtype=complex)
        out[0] = e0
        out[1:] = e0 + (1j * coef * dz / 2) * np.cumsum(pol[1:] + pol[:-1])
        return out

    S = np.zeros((9, n), dtype=complex)
    Es = march(es_bc[0], S[1], r2)
    Ei = march(ei_bc[0], S[7], 1.0)

    e_s_out = np.empty(nt + 1, dtype=complex)
    e_i_out = np.empty(nt + 1, dtype=complex)
    e_s_out[0], e_i_out[0] = Es[-1], Ei[-1]
    snaps = list(range(0, nt + 1, SNAPSHOT_EVERY))
    snap_e_s = np.empty((len(snaps), n), dtype=complex)
    snap_e_i = np.empty((len(snaps), n), dtype=complex)
    snap_e_s[0], snap_e_i[0] = Es, Ei
    worst = 0.0

    for k in range(nt):
        oa, ob = oa_mid[k], ob_mid[k]
        # explicit Euler predictor, then midpoint corrections
        S_new = S + dt * rhs(S, Es, Ei, oa, ob)
        Es_new = march(es_bc[k + 1], S_new[1], r2)
        Ei_new = march(ei_bc[k + 1], S_new[7], 1.0)
        for _ in range(grid.corrector_iters):
            S_new = S + dt * rhs(0.5 * (S + S_new), 0.5 * (Es + Es_new),
                                 0.5 * (Ei + Ei_new), oa, ob)
            Es_new = march(es_bc[k + 1], S_new[1], r2)
            Ei_new = march(ei_bc[k + 1], S_new[7], 1.0)
        S, Es, Ei = S_new, Es_new, Ei_new

        if not (np.isfinite(S).all() and np.isfinite(Es).all() and np.isfinite(Ei).all()):
            raise NonFiniteState("non-finite Maxwell-Bloch state; reduce dt",
                                 step=k + 1, tau=float(tau[k + 1]), dt=dt, dz=grid.dz)
        err = _population_error(S)
        if err > POPULATION_TOL:
            raise PopulationViolation("population left [0, 1]; increase corrector_iters or reduce dt",
                                      step=k + 1, tau=float(tau[k + 1]), error=err)
        worst = max(worst, err)

        e_s_out[k + 1], e_i_out[k + 1] = Es[-1], Ei[-1]
        if (k + 1) % SNAPSHOT_EVERY == 0:
            j = (k + 1) // SNAPSHOT_EVERY
            snap_e_s[j], snap_e_i[j] = Es, Ei

    return SpaceTimeFields(
        tau=tau, t_ns=t_ns, z=np.arange(n) * dz,
        e_s_in=es_bc.astype(complex), e_i_in=ei_bc.astype(complex),
        e_s_out=e_s_out, e_i_out=e_i_out,
        snap_tau=tau[snaps], snap_e_s=snap_e_s, snap_e_i=snap_e_i,
        pump_a=pump.omega_a * envelope(pump_a, t_ns),
        pump_b=pump.omega_b * envelope(pump_b, t_ns),
        scales=scales, coupling_ratio=ens.coupling_ratio,
        support_end_tau=support_end, final_state=AtomicState.from_array(S),
        max_population_error=worst,
    )


def _efficiency(fields: SpaceTimeFields, stop: Optional[int] = None) -> float:
    sl = slice(0, stop)
    e_in = np.trapezoid(np.abs(fields.e_i_in[sl]) ** 2, fields.tau[sl])
    if e_in < 1e-30:
        raise ZeroInput("input idler energy is zero")
    e_out = np.trapezoid(np.abs(fields.e_s_out[sl]) ** 2, fields.tau[sl])
    return float(e_out / (fields.coupling_ratio ** 2 * e_in))


def pulse_efficiency(fields: SpaceTimeFields) -> float:
    """Output signal energy over input idler energy, in photon-flux units."""
    return _efficiency(fields)


def tail_sensitivity(fields: SpaceTimeFields) -> float:
    """Change in the efficiency when the integration tail is cut in half."""
    full = _efficiency(fields)
    tail = fields.tau[-1] - fields.support_end_tau
    stop = int(np.searchsorted(fields.tau, fields.support_end_tau + tail / 2)) + 1
    return abs(full - _efficiency(fields, stop))


def steady_state_ratio(fields: SpaceTimeFields) -> float:
    """``|E_s(L)/E_i(0)|^2`` at the last time sample (cw runs)."""
    e_in = fields.e_i_in[-1]
    if abs(e_in) == 0:
        raise ZeroInput("input idler is zero at the final time")
    return float(abs(fields.e_s_out[-1] / e_in) ** 2 / fields.coupling_ratio ** 2)


@dataclass(frozen=True)
class ConvergenceReport:
    grids: tuple
    etas: tuple
    rel_change_dt: float
    rel_change_dz: float
    tolerance: float = 0.01

    @property
    def converged(self) -> bool:
        return self.rel_change_dt < self.tolerance and self.rel_change_dz < self.tolerance


def _efficiency_task(args):
    return pulse_efficiency(simulate(*args))


def convergence_report(base: GridSpec, pump_a, pump_b, idler_in, signal_in, pump, probe,
                       ens, rates, gamma03_ns: float = DEFAULT_GAMMA03_NS,
                       tolerance: float = 0.01, jobs: int = 1) -> ConvergenceReport:
    """Efficiency at ``(dt, dz)``, ``(dt/2, dz)`` and ``(dt, dz/2)``."""
    grids = (base, replace(base, dt=base.dt / 2), replace(base, dz=base.dz / 2))
    tasks = [(pump_a, pump_b, idler_in, signal_in, pump, probe, ens, rates, g, gamma03_ns)
             for g in grids]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, 3)) as pool:
            etas = list(pool.map(_efficiency_task, tasks))
    else:
        etas = [_efficiency_task(t) for t in tasks]
    ref = etas[0]
    return ConvergenceReport(grids, tuple(etas), abs(etas[1] - ref) / abs(ref),
                             abs(etas[2] - ref) / abs(ref), tolerance)


@dataclass(frozen=True)
class ModulationPeak:
    frequency: float
    amplitude: float
    floor: float
    bin_width: float

    @property
    def significant(self) -> bool:
        return self.amplitude > 10 * self.floor


def modulation_spectrum(t_ns, intensity, window=None,
                        gamma03_ns: float = DEFAULT_GAMMA03_NS) -> ModulationPeak:
    """Dominant modulation of an intensity trace, angular frequency in gamma_03 units.

    The trace is normalised by its mean and detrended with a quadratic fit,
    so ``amplitude`` is a relative modulation depth.
    """
    t = np.asarray(t_ns, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, y = t[m], y[m]
    if len(y) < 64:
        raise ValueError("need at least 64 samples for a modulation estimate")
    mean = y.mean()
    if mean <= 0:
        raise NoModulation("trace has no intensity")
    x = y / mean
    x = x - np.polyval(np.polyfit(t - t.mean(), x, 2), t - t.mean())
    taper = np.hanning(len(x))
    nfft = 16 * (1 << int(math.ceil(math.log2(len(x)))))
    spec = np.abs(np.fft.rfft(x * taper, nfft)) * 2 / taper.sum()
    dt = (t[-1] - t[0]) / (len(t) - 1)
    omega = 2 * math.pi * np.fft.rfftfreq(nfft, dt) * gamma03_ns
    bin_width = 2 * math.pi / (t[-1] - t[0]) * gamma03_ns
    band = np.flatnonzero(omega > 2 * bin_width)
    peaks, _ = find_peaks(spec[band])
    if len(peaks) == 0:
        return ModulationPeak(float("nan"), 0.0, float(np.median(spec[band])), bin_width)
    k = band[peaks[np.argmax(spec[band][peaks])]]
    a, b, c = spec[k - 1], spec[k], spec[k + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    freq = omega[k] + shift * (omega[1] - omega[0])
    floor_band = band[omega[band] <= 4 * omega[k]]
    return ModulationPeak(float(freq), float(spec[k]), float(np.median(spec[floor_band])),
                          bin_width)


def modulation_frequency(t_ns, intensity, window=None,
                         gamma03_ns: float = DEFAULT_GAMMA03_NS) -> float:
    """Angular frequency (gamma_03 units) of the strongest intensity modulation.

    Raises :class:`NoModulation` when the peak is not 10x above the spectral floor.
    """
    peak = modulation_spectrum(t_ns, intensity, window, gamma03_ns)
    if not peak.significant:
        raise NoModulation(f"no modulation peak above floor (peak {peak.amplitude:.3g}, "
                           f"floor {peak.floor:.3g})")
    return peak.frequency
