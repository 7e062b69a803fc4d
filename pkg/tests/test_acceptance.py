"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances."""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from diamondfwm.mbsolver import (
    GridSpec,
    PulseShape,
    characteristic_scales,
    convergence_report,
    enclosing_pump,
    modulation_frequency,
    pulse_efficiency,
    simulate,
    steady_state_ratio,
)
from diamondfwm.model import (
    CouplingCoefficients,
    EnsembleConfig,
    PumpConfig,
    coefficients,
    default_rb87_rates,
    operating_point,
)
from diamondfwm.optimizer import (
    Bounds,
    conversion_at,
    efficiency_vs_opd,
    optimize_at_opd,
    verify_detuning_symmetry,
)
from diamondfwm.parametric import (
    _transfer_with_branch,
    absorption_peaks,
    efficiencies,
    spectrum,
    transfer,
)

POINT = (33.0, 20.0, 39.0, 2.0, -21.0)
RATES = default_rb87_rates()
ENS = EnsembleConfig(opd=150.0, length=6e-3)
NO_SIGNAL = PulseShape.cw(0.0)
LONG_IDLER = PulseShape.square(0.1, 20, 20, 100)
SHORT_IDLER = PulseShape.square(0.1, 15, 10, 15)


@pytest.fixture(scope="module")
def optimum_150():
    t0 = time.perf_counter()
    rec = optimize_at_opd(150.0, seed=0)
    return rec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def opd_curve():
    return efficiency_vs_opd([10.0, 50.0, 150.0, 300.0], seed=0, jobs=4)


@pytest.fixture(scope="module")
def random_draws():
    rng = np.random.default_rng(2024)
    radius = 5 * np.sqrt(rng.random((1000, 4)))
    phase = np.exp(2j * np.pi * rng.random((1000, 4)))
    return [CouplingCoefficients(*row) for row in radius * phase]


def _pulse_run(idler, pump_rise, grid=GridSpec()):
    pump, probe = operating_point(*POINT)
    return simulate(enclosing_pump(idler, *pump_rise), PulseShape.cw(), idler, NO_SIGNAL,
                    pump, probe, ENS, RATES, grid)


@pytest.fixture(scope="module")
def long_pulse():
    return _pulse_run(LONG_IDLER, (10, 10))


@pytest.fixture(scope="module")
def short_pulse():
    return _pulse_run(SHORT_IDLER, (10, 5))


def test_criterion_01_optimum(optimum_150, acceptance):
    rec, elapsed = optimum_150
    ref = conversion_at(POINT, ENS, RATES).eta_d
    ok = abs(rec.eta_d - 0.92) <= 0.02 and abs(rec.eta_d - ref) <= 0.02 and elapsed <= 120
    acceptance(1, "optimum at opd 150", ok,
               f"eta_d={rec.eta_d:.4f} at {tuple(round(p, 2) for p in rec.params)}, "
               f"reference point {ref:.4f}, {elapsed:.1f} s")


def test_criterion_02_up_down(acceptance):
    r = conversion_at(POINT, ENS, RATES)
    diff = abs(r.eta_d - r.eta_u)
    acceptance(2, "eta_d vs eta_u", diff < 0.01, f"|diff|={diff:.2e}")


def test_criterion_03_ideal_conservation(acceptance):
    worst = 0.0
    for k in np.linspace(-10, 10, 100):
        r = efficiencies(CouplingCoefficients(0j, 0j, 1j * k, 1j * k))
        worst = max(worst, abs(r.eta_d + r.t_d - 1), abs(r.eta_u + r.t_u - 1))
    acceptance(3, "ideal-limit conservation", worst <= 1e-12, f"max |eta+T-1|={worst:.1e}")


def _ode(c):
    A = np.array([[c.beta_sL, c.kappa_sL], [c.kappa_iL, c.alpha_iL]])
    sol = solve_ivp(lambda z, y: (A @ y.reshape(2, 2)).ravel(), (0, 1),
                    np.eye(2, dtype=complex).ravel(), method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1].reshape(2, 2)


def test_criterion_04_ode_oracle(random_draws, acceptance):
    t0 = time.perf_counter()
    worst = max(np.abs(transfer(c).matrix() - _ode(c)).max() for c in random_draws)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed <= 30
    acceptance(4, "closed form vs ODE", ok,
               f"max dev={worst:.1e} over {len(random_draws)} draws, {elapsed:.1f} s")


def test_criterion_05_branch(random_draws, acceptance):
    worst = 0.0
    for c in random_draws:
        a = transfer(c)
        b = _transfer_with_branch(c, -a.w)
        worst = max(worst, np.abs(a.matrix() - b.matrix()).max())
    acceptance(5, "branch independence", worst <= 1e-12, f"max dev={worst:.1e}")


def _windows(table, peaks):
    dw, eta = table.column("dw_i"), table.column("eta_d")
    count = 0
    for a, b in zip(peaks, peaks[1:]):
        inside = (dw > a) & (dw < b)
        if inside.any() and eta[inside].max() > 0.1:
            count += 1
    return count


def test_criterion_06_windows(acceptance):
    t0 = time.perf_counter()
    grid = np.linspace(-100, 100, 2001)
    pump, _ = operating_point(*POINT)
    table = spectrum(pump, ENS, RATES, grid)
    peaks = absorption_peaks(table)
    windows = _windows(table, peaks)
    res = absorption_peaks(spectrum(PumpConfig(33, 20), ENS, RATES, grid))
    want = (-53, -13, 13, 53)
    match = len(res) == 4 and all(abs(g - w) <= 0.15 * abs(w) for g, w in zip(sorted(res), want))
    elapsed = time.perf_counter() - t0
    ok = len(peaks) == 4 and windows == 3 and match and elapsed <= 10
    acceptance(6, "window structure", ok,
               f"peaks {np.round(peaks, 2).tolist()}, windows {windows}, "
               f"resonant peaks {np.round(res, 2).tolist()}, {elapsed:.1f} s")


def test_criterion_07_opd_trend(opd_curve, acceptance):
    etas = [r.eta_d for r in opd_curve]
    ok = all(b >= a - 0.01 for a, b in zip(etas, etas[1:])) and etas[3] > etas[2]
    acceptance(7, "opd trend", ok,
               ", ".join(f"opd {r.opd:g}: {r.eta_d:.4f}" for r in opd_curve))


def test_criterion_08_symmetry(optimum_150, opd_curve, acceptance):
    rng = np.random.default_rng(8)
    b = Bounds()
    worst = max(verify_detuning_symmetry(tuple(rng.uniform(b.lower, b.upper)), ENS, RATES)
                for _ in range(100))
    worst_opt = max(verify_detuning_symmetry(r) for r in [optimum_150[0], *opd_curve])
    ok = worst < 1e-10 and worst_opt < 1e-10
    acceptance(8, "detuning-sign degeneracy", ok,
               f"random max {worst:.1e}, optima max {worst_opt:.1e}")


def test_criterion_09_long_pulse(long_pulse, acceptance):
    eta = pulse_efficiency(long_pulse)
    acceptance(9, "MB 100 ns pulse", abs(eta - 0.92) <= 0.03, f"eta_d={eta:.4f}")


def test_criterion_10_short_pulse(long_pulse, short_pulse, acceptance):
    eta_long = pulse_efficiency(long_pulse)
    eta_short = pulse_efficiency(short_pulse)
    intensity = np.abs(short_pulse.e_s_out) ** 2
    freq = modulation_frequency(short_pulse.t_ns, intensity, SHORT_IDLER.half_max)
    target = math.sqrt(POINT[2] ** 2 + 4 * POINT[0] ** 2)
    ok = eta_short < eta_long and abs(freq - target) <= 0.1 * target
    acceptance(10, "MB 15 ns pulse", ok,
               f"eta_d={eta_short:.4f} < {eta_long:.4f}, modulation {freq:.2f} vs {target:.2f}")


def test_criterion_11_cw_consistency(acceptance):
    pump, probe = operating_point(*POINT)
    sc = characteristic_scales(ENS, RATES)
    f = simulate(PulseShape.cw(), PulseShape.cw(), PulseShape.cw(0.1), NO_SIGNAL, pump, probe,
                 ENS, RATES, GridSpec(t_span=sc.ns_to_tau(800.0)))
    mb = steady_state_ratio(f)
    closed = efficiencies(coefficients(pump, probe, ENS, RATES)).eta_d
    rel = abs(mb - closed) / closed
    acceptance(11, "MB cw vs closed form", rel < 0.02,
               f"MB {mb:.6f}, closed form {closed:.6f}, rel {rel:.1e}")


def test_criterion_12_grid_convergence(acceptance):
    pump, probe = operating_point(*POINT)
    rep = convergence_report(GridSpec(), enclosing_pump(LONG_IDLER, 10, 10), PulseShape.cw(),
                             LONG_IDLER, NO_SIGNAL, pump, probe, ENS, RATES, jobs=3)
    ok = rep.rel_change_dt < 0.01 and rep.rel_change_dz < 0.01
    acceptance(12, "grid convergence", ok,
               f"etas {np.round(rep.etas, 6).tolist()}, dt/2 {rep.rel_change_dt:.1e}, "
               f"dz/2 {rep.rel_change_dz:.1e}")


def test_criterion_13_scales(acceptance):
    sc = characteristic_scales(ENS, RATES)
    t_ns, l_mm = sc.t_c * 1e9, sc.l_c * 1e3
    ok = abs(t_ns - 0.086) <= 0.002 and abs(l_mm - 26) <= 1
    acceptance(13, "physical scales", ok, f"T_c={t_ns:.4f} ns, L_c={l_mm:.2f} mm")
