import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from diamondfwm.model import CouplingCoefficients, EnsembleConfig, PumpConfig, coefficients
from diamondfwm.parametric import (
    SERIES_SWITCH,
    _transfer_with_branch,
    absorption_peaks,
    dressed_spectrum,
    efficiencies,
    ideal_limit,
    spectrum,
    transfer,
)

component = st.floats(-5, 5, allow_nan=False)
cplx = st.builds(complex, component, component)
coeff_sets = st.builds(CouplingCoefficients, cplx, cplx, cplx, cplx)


def ode_map(c):
    A = np.array([[c.beta_sL, c.kappa_sL], [c.kappa_iL, c.alpha_iL]])
    sol = solve_ivp(lambda z, y: (A @ y.reshape(2, 2)).ravel(), (0, 1),
                    np.eye(2, dtype=complex).ravel(), method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1].reshape(2, 2)


@settings(max_examples=60, deadline=None)
@given(coeff_sets)
def test_transfer_matches_ode(c):
    assert np.abs(transfer(c).matrix() - ode_map(c)).max() < 1e-8


@given(coeff_sets)
def test_branch_independence(c):
    a = transfer(c)
    b = _transfer_with_branch(c, -a.w)
    assert np.abs(a.matrix() - b.matrix()).max() < 1e-12 * max(1.0, np.abs(a.matrix()).max())


def test_transfer_matches_matrix_exponential_form():
    c = CouplingCoefficients(-0.3 + 0.2j, -0.1 - 0.4j, 0.2 + 1.5j, -0.1 + 1.4j)
    beta, alpha, ks, ki = c.as_tuple()
    q = (beta - alpha) / 2
    w = cmath.sqrt(q * q + ks * ki)
    # two-exponential form of the signal output for an idler input
    want = cmath.exp((alpha + beta) / 2) * ks * (cmath.exp(w) - cmath.exp(-w)) / (2 * w)
    assert transfer(c).m12 == pytest.approx(want, rel=1e-13)
    # transmission entry in its symmetric two-exponential form
    t = cmath.exp((alpha + beta) / 2) * ((w - q) * cmath.exp(w) + (w + q) * cmath.exp(-w)) / (2 * w)
    assert transfer(c).m22 == pytest.approx(t, rel=1e-13)


def test_series_switch_is_continuous():
    # w = q exactly; compare just below and above the series threshold
    for w in (0.5 * SERIES_SWITCH, 2 * SERIES_SWITCH):
        c = CouplingCoefficients(w + 0.1j, -w + 0.1j, 0j, 0j)
        m = transfer(c).matrix()
        want = np.exp(0.1j) * np.diag([np.exp(w), np.exp(-w)])
        assert np.abs(m - want).max() < 1e-14


def test_degenerate_w_zero():
    # q^2 + kappa_s kappa_i = 0 exactly: nilpotent part, exp(A) = e^p (I + N)
    c = CouplingCoefficients(1j, -1j, 1.0, 1.0)
    m = transfer(c).matrix()
    assert transfer(c).w == 0
    want = np.array([[1 + 1j, 1], [1, 1 - 1j]])
    assert np.abs(m - want).max() < 1e-15


def test_interchange_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(50):
        c = CouplingCoefficients(*(complex(*rng.normal(size=2)) for _ in range(4)))
        a, b = efficiencies(c), efficiencies(c.swapped())
        assert a.eta_d == pytest.approx(b.eta_u, rel=1e-12)
        assert a.eta_u == pytest.approx(b.eta_d, rel=1e-12)


@pytest.mark.parametrize("x", np.linspace(-7, 7, 29))
def test_ideal_limit_conservation(x):
    c = CouplingCoefficients(0j, 0j, 1j * x, 1j * x)
    r = efficiencies(c)
    eta, t = ideal_limit(x)
    assert r.eta_d + r.t_d == pytest.approx(1.0, abs=1e-12)
    assert r.eta_d == pytest.approx(eta, abs=1e-12)
    assert r.t_d == pytest.approx(t, abs=1e-12)


def test_strong_coupling_limit():
    # the simplified form holds once self-coupling is ~100x below the cross coupling
    rng = np.random.default_rng(4)
    for _ in range(500):
        k = rng.uniform(0.2, 1.0)
        ks, ki = (k * cmath.exp(1j * rng.uniform(0, 2 * np.pi)) for _ in range(2))
        beta, alpha = (k / 100 * rng.uniform() * cmath.exp(1j * rng.uniform(0, 2 * np.pi))
                       for _ in range(2))
        r = efficiencies(CouplingCoefficients(beta, alpha, ks, ki))
        approx = abs(cmath.sqrt(ks / ki) * cmath.sinh(cmath.sqrt(ks * ki))) ** 2
        assert r.eta_d == pytest.approx(approx, rel=0.02)


def test_ref_point_up_down_agree(ens, rates, ref_point):
    r = efficiencies(coefficients(*ref_point, ens, rates))
    assert abs(r.eta_d - r.eta_u) < 0.01
    assert r.eta_d == pytest.approx(0.92, abs=0.02)
    assert r.eta_d + r.t_d <= 1.0


def test_dressed_resonant_pumps():
    d = dressed_spectrum(PumpConfig(33, 20))
    assert d.peak_positions == (-53, -13, 13, 53)
    assert d.window_centers == (-33, 0, 33)
    assert d.label == "resonant"


def test_dressed_detuned_matches_eigenvalues():
    pump = PumpConfig(33, 20, 39, 2)
    d = dressed_spectrum(pump)
    # sum of eigenvalues of the two 2x2 dressed blocks
    la = np.linalg.eigvalsh([[-39.0, 33], [33, 0]])
    lb = np.linalg.eigvalsh([[2.0, 20], [20, 0]])
    want = sorted(-(a + b) for a in la for b in lb)
    assert np.allclose(d.peak_positions, want, atol=1e-12)
    assert d.label == "predicted"


def test_resonant_spectrum_peaks(rates):
    pump = PumpConfig(33, 20)
    table = spectrum(pump, EnsembleConfig(), rates, np.linspace(-100, 100, 2001))
    peaks = absorption_peaks(table)
    assert len(peaks) == 4
    for got, want in zip(sorted(peaks), (-53, -13, 13, 53)):
        assert abs(got - want) <= 0.15 * abs(want)


def test_ref_point_spectrum_windows(ens, rates, ref_point):
    pump, _ = ref_point
    table = spectrum(pump, ens, rates, np.linspace(-100, 100, 2001))
    peaks = absorption_peaks(table)
    assert len(peaks) == 4
    dw, eta = table.column("dw_i"), table.column("eta_d")
    assert dw[np.argmax(eta)] == pytest.approx(-20, abs=3)


def test_far_detuned_transmits(rates):
    table = spectrum(PumpConfig(33, 20, 39, 2), EnsembleConfig(), rates, [-500.0, 500.0])
    assert (table.column("t_d") > 0.99).all()


def test_spectrum_grid_validation(ens, rates):
    with pytest.raises(ValueError):
        spectrum(PumpConfig(1, 1), ens, rates, [0.0, 0.0])


def test_spectrum_parallel_matches_serial(ens, rates):
    pump = PumpConfig(33, 20, 39, 2)
    grid = np.linspace(-60, 60, 41)
    a = spectrum(pump, ens, rates, grid, jobs=1)
    b = spectrum(pump, ens, rates, grid, jobs=3)
    assert a == b
