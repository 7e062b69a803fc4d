"""Global maximisation of the down-conversion efficiency at fixed optical depth.

The five free parameters are ``(omega_a, omega_b, delta_1, delta_b, dw_i)``.
The landscape is smooth inside each parametric coupling window but has one
basin per window, so the search runs a bounded Nelder-Mead simplex from
several starts: one at the centre of each dressed-state window plus uniform
random starts drawn from a seeded generator.  Rabi frequencies are searched
in log coordinates because the optimal pump strength scales with the optical
depth over several decades.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import BudgetExhausted, SingularDenominator
from .model import (
    DecayRates,
    EnsembleConfig,
    PumpConfig,
    coefficients,
    default_rb87_rates,
    operating_point,
)
from .parametric import ConversionResult, dressed_spectrum, efficiencies

__all__ = [
    "PARAM_NAMES",
    "Bounds",
    "OptimumRecord",
    "conversion_at",
    "eta_d_at",
    "optimize_at_opd",
    "efficiency_vs_opd",
    "verify_detuning_symmetry",
]

PARAM_NAMES = ("omega_a", "omega_b", "delta_1", "delta_b", "dw_i")

DEFAULT_BUDGET = 40_000
DEFAULT_STARTS = 12
XATOL = 1e-6  # simplex size in bound-normalised coordinates
FATOL = 1e-9
SIMPLEX_STEP = 0.05


@dataclass(frozen=True)
class Bounds:
    """Closed search interval per parameter, in gamma_03 units."""

    omega_a: tuple = (0.1, 100.0)
    omega_b: tuple = (0.1, 100.0)
    delta_1: tuple = (-100.0, 100.0)
    delta_b: tuple = (-100.0, 100.0)
    dw_i: tuple = (-150.0, 150.0)

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"bounds for {name}: lower must be < upper")
        if self.omega_a[0] < 0 or self.omega_b[0] < 0:
            raise ValueError("Rabi frequency bounds must be nonnegative")

    @property
    def lower(self) -> np.ndarray:
        return np.array([getattr(self, n)[0] for n in PARAM_NAMES], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([getattr(self, n)[1] for n in PARAM_NAMES], dtype=float)

    def contains(self, params) -> bool:
        x = np.asarray(params, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class OptimumRecord:
    opd: float
    params: tuple
    eta_d: float
    eta_u: float
    t_d: float
    evaluations: int
    converged: bool
    starts_used: int
    seed: int
    kappa_s_im: float = float("nan")

    @property
    def flagged(self) -> bool:
        """Efficiency above unity (parametric gain); reported, never clamped."""
        return self.eta_d > 1.0

    def as_dict(self):
        d = dict(zip(PARAM_NAMES, self.params))
        d.update(opd=self.opd, eta_d=self.eta_d, eta_u=self.eta_u, t_d=self.t_d,
                 evaluations=self.evaluations, converged=self.converged,
                 starts_used=self.starts_used, seed=self.seed)
        return d


def conversion_at(params, ens: EnsembleConfig, rates: DecayRates) -> ConversionResult:
    pump, probe = operating_point(*params)
    return efficiencies(coefficients(pump, probe, ens, rates))


def eta_d_at(params, ens: EnsembleConfig, rates: DecayRates) -> float:
    """Down-conversion efficiency, or 0 at singular or non-finite points."""
    try:
        eta = conversion_at(params, ens, rates).eta_d
    except (SingularDenominator, OverflowError, ZeroDivisionError):
        return 0.0
    return eta if math.isfinite(eta) else 0.0


@dataclass
class _Search:
    """Bookkeeping for one bounded simplex run in unit-cube coordinates."""

    ens: EnsembleConfig
    rates: DecayRates
    lower: np.ndarray
    upper: np.ndarray
    evaluations: int = 0
    best_eta: float = -1.0
    best_x: np.ndarray = field(default=None)

    def __post_init__(self):
        # Rabi frequencies are searched on a log scale when their lower bound is positive
        self.logscale = np.zeros(len(self.lower), dtype=bool)
        self.logscale[:2] = self.lower[:2] > 0

    def to_params(self, u):
        u = np.clip(u, 0.0, 1.0)
        x = self.lower + u * (self.upper - self.lower)
        lg = self.logscale
        x[lg] = self.lower[lg] * (self.upper[lg] / self.lower[lg]) ** u[lg]
        return np.clip(x, self.lower, self.upper)

    def to_unit(self, x):
        x = np.clip(np.asarray(x, float), self.lower, self.upper)
        u = (x - self.lower) / (self.upper - self.lower)
        lg = self.logscale
        u[lg] = np.log(x[lg] / self.lower[lg]) / np.log(self.upper[lg] / self.lower[lg])
        return np.clip(u, 0.0, 1.0)

    def __call__(self, u):
        self.evaluations += 1
        x = self.to_params(u)
        eta = eta_d_at(x, self.ens, self.rates)
        if eta > self.best_eta:
            self.best_eta, self.best_x = eta, x
        return -eta

    def run(self, x0, maxfev: int) -> bool:
        u0 = self.to_unit(x0)
        simplex = [u0]
        for k in range(len(u0)):
            v = u0.copy()
            v[k] += SIMPLEX_STEP if v[k] + SIMPLEX_STEP <= 1 else -SIMPLEX_STEP
            simplex.append(v)
        self(u0)
        res = minimize(self, u0, method="Nelder-Mead",
                       bounds=[(0.0, 1.0)] * len(u0),
                       options=dict(maxfev=max(maxfev - 1, len(u0) + 1), xatol=XATOL,
                                    fatol=FATOL, initial_simplex=np.array(simplex)))
        return bool(res.success)


def _window_starts(bounds: Bounds, opd: float):
    """Starts at the three dressed-window centres for two pump strengths.

    One set uses a third of the upper Rabi bounds; the other uses the
    strong-coupling estimate ``omega ~ 2 opd / pi`` (where Im(kappa_s L)
    reaches pi/2), which matters at small optical depth.
    """
    lo, hi = bounds.lower, bounds.upper
    d1 = min(max(0.0, lo[2]), hi[2])
    db = min(max(0.0, lo[3]), hi[3])
    scales = [(hi[0] / 3, hi[1] / 3)]
    est = 2 * opd / math.pi
    scales.append((min(max(est, lo[0]), hi[0]), min(max(0.6 * est, lo[1]), hi[1])))
    starts = []
    for oa, ob in scales:
        centers = dressed_spectrum(PumpConfig(oa, ob, 0.0, 0.0)).window_centers
        starts.extend(np.clip([oa, ob, d1, db, c], lo, hi) for c in centers)
    return starts


def _start_points(bounds: Bounds, n_starts: int, seed: int, opd: float):
    starts = _window_starts(bounds, opd)
    rng = np.random.default_rng(seed)
    for _ in range(max(n_starts - len(starts), 0)):
        starts.append(rng.uniform(bounds.lower, bounds.upper))
    return starts[:max(n_starts, 1)]


def _prefer_negative_idler(x, bounds: Bounds, ens, rates):
    """Pick the dw_i < 0 member of the sign-flip degenerate pair when feasible."""
    if x[4] <= 0:
        return x
    flipped = np.array([x[0], x[1], -x[2], -x[3], -x[4]])
    if bounds.contains(flipped) and eta_d_at(flipped, ens, rates) >= eta_d_at(x, ens, rates) - 1e-12:
        return flipped
    return x


def _record(opd, x, search_evals, converged, starts_used, seed, ens, rates):
    res = conversion_at(x, ens, rates)
    pump, probe = operating_point(*x)
    ks = coefficients(pump, probe, ens, rates).kappa_sL
    return OptimumRecord(opd=float(opd), params=tuple(float(v) for v in x),
                         eta_d=res.eta_d, eta_u=res.eta_u, t_d=res.t_d,
                         evaluations=search_evals, converged=converged,
                         starts_used=starts_used, seed=seed, kappa_s_im=ks.imag)


def optimize_at_opd(opd: float, bounds: Bounds = Bounds(), budget: int = DEFAULT_BUDGET,
                    seed: int = 0, ens: EnsembleConfig = EnsembleConfig(),
                    rates: DecayRates = None, n_starts: int = DEFAULT_STARTS,
                    extra_starts: Sequence = ()) -> OptimumRecord:
    """Best five-parameter point for ``eta_d`` at optical depth ``opd``.

    The evaluation budget is split evenly across the starts (window starts,
    random starts, then any ``extra_starts``).  If the start that produced the
    best point stopped on its evaluation cap, a :class:`BudgetExhausted`
    warning is issued and the record carries ``converged=False``.
    """
    if not opd > 0:
        raise ValueError("opd must be > 0")
    if budget < 1000:
        raise ValueError("budget must be at least 1000 evaluations")
    rates = rates or default_rb87_rates()
    ens = ens.with_opd(opd)
    starts = _start_points(bounds, n_starts, seed, opd) + [np.asarray(s, float) for s in extra_starts]
    per_start = budget // len(starts)

    best_eta, best_x, best_conv, total = -1.0, None, False, 0
    for x0 in starts:
        search = _Search(ens, rates, bounds.lower, bounds.upper)
        conv = search.run(x0, per_start)
        total += search.evaluations
        if search.best_eta > best_eta:
            best_eta, best_x, best_conv = search.best_eta, search.best_x, conv

    if not best_conv:
        warnings.warn(f"optimizer budget exhausted at opd={opd}", BudgetExhausted, stacklevel=2)
    x = _prefer_negative_idler(best_x, bounds, ens, rates)
    return _record(opd, x, total, best_conv, len(starts), seed, ens, rates)


def _optimize_task(args):
    opd, bounds, budget, seed, ens, rates, n_starts = args
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BudgetExhausted)
        rec = optimize_at_opd(opd, bounds, budget, seed, ens, rates, n_starts)
    return rec, [str(w.message) for w in caught if issubclass(w.category, BudgetExhausted)]


def efficiency_vs_opd(opd_list: Sequence[float], bounds: Bounds = Bounds(),
                      budget: int = DEFAULT_BUDGET, seed: int = 0,
                      ens: EnsembleConfig = EnsembleConfig(), rates: DecayRates = None,
                      n_starts: int = DEFAULT_STARTS, jobs: int = 1):
    """Optimum efficiency for each optical depth in ``opd_list``.

    Every point first gets an independent window-seeded search (these may run
    in parallel).  A sequential pass then warm-starts each point from its
    predecessor's optimum and keeps whichever is better, so results do not
    depend on ``jobs``.
    """
    opds = [float(v) for v in opd_list]
    if not opds or any(v <= 0 for v in opds):
        raise ValueError("opd values must be positive")
    if any(b <= a for a, b in zip(opds, opds[1:])):
        raise ValueError("opd_list must be strictly increasing")
    rates = rates or default_rb87_rates()
    tasks = [(opd, bounds, budget, seed, ens, rates, n_starts) for opd in opds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_optimize_task, tasks))
    else:
        results = [_optimize_task(t) for t in tasks]
    for _, messages in results:
        for msg in messages:
            warnings.warn(msg, BudgetExhausted, stacklevel=2)
    records = [rec for rec, _ in results]

    per_start = budget // (max(n_starts, 1) + 1)
    for k in range(1, len(records)):
        prev, cur = records[k - 1], records[k]
        e = ens.with_opd(cur.opd)
        search = _Search(e, rates, bounds.lower, bounds.upper)
        conv = search.run(prev.params, per_start)
        if search.best_eta > cur.eta_d:
            x = _prefer_negative_idler(search.best_x, bounds, e, rates)
            records[k] = _record(cur.opd, x, cur.evaluations + search.evaluations, conv,
                                 cur.starts_used + 1, seed, e, rates)
        else:
            records[k] = OptimumRecord(**{**cur.__dict__,
                                          "evaluations": cur.evaluations + search.evaluations,
                                          "starts_used": cur.starts_used + 1})
    return records


def verify_detuning_symmetry(record, ens: EnsembleConfig = EnsembleConfig(),
                             rates: DecayRates = None) -> float:
    """``|eta_d(x) - eta_d(x with delta_1, delta_b, dw_i negated)|``.

    ``record`` may be an :class:`OptimumRecord` or a bare parameter tuple.
    """
    rates = rates or default_rb87_rates()
    if isinstance(record, OptimumRecord):
        params, ens = record.params, ens.with_opd(record.opd)
    else:
        params = tuple(record)
    oa, ob, d1, db, dw = params
    a = conversion_at((oa, ob, d1, db, dw), ens, rates).eta_d
    b = conversion_at((oa, ob, -d1, -db, -dw), ens, rates).eta_d
    return abs(a - b)
