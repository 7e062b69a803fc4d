"""Command-line front end: YAML config in, CSV table with a ``#`` header out.

Every run writes

    # tool: diamondfwm <version>
    # seed: <seed>
    # config: <resolved config as compact, key-sorted JSON>
    <csv header>
    <rows>
    # <name>,<value>        (scalar results, some scenarios)

Floats are written with 17 significant digits so a table is a faithful,
byte-stable record of the run.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .errors import BudgetExhausted, ConfigError, NoModulation, NumericalError, ZeroInput
from .mbsolver import (
    GridSpec,
    PulseShape,
    characteristic_scales,
    convergence_report,
    modulation_spectrum,
    pulse_efficiency,
    simulate,
    tail_sensitivity,
)
from .model import DecayRates, EnsembleConfig, coefficients, operating_point
from .optimizer import Bounds, efficiency_vs_opd, optimize_at_opd
from .parametric import dressed_spectrum, efficiencies, spectrum

__all__ = ["RunConfig", "OutputTable", "SCENARIOS", "parse_config", "apply_overrides",
           "run", "main"]

SCENARIOS = ("coeffs", "spectrum", "dressed", "optimize", "opd-curve", "pulse", "convergence")
PULSE_KEYS = ("pump_a", "pump_b", "idler", "signal")
COEFF_NAMES = ("beta_sL", "alpha_iL", "kappa_sL", "kappa_iL")
RESULT_NAMES = ("eta_d", "eta_u", "t_d", "t_u")
OPT_COLUMNS = ("opd", "omega_a", "omega_b", "delta_1", "delta_b", "dw_i", "eta_d", "eta_u",
               "t_d", "kappa_s_im", "evaluations", "converged", "starts_used", "seed")
SEED_MAX = 2 ** 64 - 1
PULSE_UNITS = ("t_ns in ns; *_sq columns are |g E|^2 in gamma_03^2 with each field's own g "
               "(r^2 not divided out); pumps are Rabi frequencies in gamma_03")

_RATES = DecayRates()


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description.  Frequencies in gamma_03 units, times in ns."""

    scenario: str = "coeffs"
    # operating point
    omega_a: float = 33.0
    omega_b: float = 20.0
    delta_1: float = 0.0
    delta_b: float = 0.0
    dw_i: float = 0.0
    # ensemble and atom
    opd: float = 150.0
    length: float = 6e-3
    coupling_ratio: float = 1.0
    density: Optional[float] = None
    gamma03_ns: float = 27.7
    gamma_01: float = _RATES.gamma_01
    gamma_12: float = _RATES.gamma_12
    gamma_32: float = _RATES.gamma_32
    # spectrum sweep
    dw_min: float = -60.0
    dw_max: float = 60.0
    n_points: int = 1201
    # optimizer
    bounds_omega_a: tuple = Bounds().omega_a
    bounds_omega_b: tuple = Bounds().omega_b
    bounds_delta_1: tuple = Bounds().delta_1
    bounds_delta_b: tuple = Bounds().delta_b
    bounds_dw_i: tuple = Bounds().dw_i
    budget: int = 40_000
    n_starts: int = 12
    seed: int = 0
    opd_list: tuple = (10.0, 50.0, 150.0, 300.0)
    # Maxwell-Bloch grid
    dt: float = 0.5
    dz: float = 0.001
    corrector_iters: int = 2
    t_span_ns: Optional[float] = None
    tail_ns: Optional[float] = None
    tolerance: float = 0.01
    # pulse shapes (ns); probe amplitudes are Rabi frequencies, pump amplitudes profile factors
    pump_a: PulseShape = PulseShape("ramped-square", 1.0, 10.0, 10.0, 135.0)
    pump_b: PulseShape = PulseShape.cw()
    idler: PulseShape = PulseShape.square(0.1, 20.0, 20.0, 100.0)
    signal: PulseShape = PulseShape.cw(0.0)
    out: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def ensemble(self) -> EnsembleConfig:
        return EnsembleConfig(self.opd, self.length, self.coupling_ratio, self.density)

    def rates(self) -> DecayRates:
        return DecayRates(1.0, self.gamma_01, self.gamma_12, self.gamma_32)

    def bounds(self) -> Bounds:
        return Bounds(self.bounds_omega_a, self.bounds_omega_b, self.bounds_delta_1,
                      self.bounds_delta_b, self.bounds_dw_i)

    def grid(self, t_span_tau: Optional[float] = None) -> GridSpec:
        return GridSpec(self.dt, self.dz, t_span_tau, self.corrector_iters, self.tail_ns)

    def point(self):
        return operating_point(self.omega_a, self.omega_b, self.delta_1, self.delta_b, self.dw_i)


@dataclass
class OutputTable:
    columns: tuple
    rows: list
    metadata: dict
    footer: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {value}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        for name, value in self.footer:
            buf.write(f"# {name},{_fmt(value)}\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


# ---------------------------------------------------------------- validation

def _number(v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError("expected a number")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ValueError("expected an integer")
        return int(v)
    if not math.isfinite(v):
        raise ValueError("expected a finite number")
    return float(v)


def _real(lo=-math.inf, hi=math.inf, lo_open=False, nullable=False, integer=False):
    def check(v):
        if v is None and nullable:
            return None
        x = _number(v, integer)
        if x < lo or (lo_open and x == lo) or x > hi:
            op = ">" if lo_open else ">="
            if hi == math.inf:
                raise ValueError(f"must be {op} {lo:g}")
            raise ValueError(f"must lie in [{lo:g}, {hi:g}]")
        return x
    return check


def _interval(nonneg=False):
    def check(v):
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            raise ValueError("expected a [low, high] pair")
        lo, hi = (_number(x) for x in v)
        if not lo < hi:
            raise ValueError("low must be below high")
        if nonneg and lo < 0:
            raise ValueError("low must be >= 0")
        return (lo, hi)
    return check


def _opd_list(v):
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError("expected a non-empty list")
    out = tuple(_number(x) for x in v)
    if any(x <= 0 for x in out):
        raise ValueError("every opd must be > 0")
    return out


def _scenario(v):
    if v not in SCENARIOS:
        raise ValueError(f"must be one of {', '.join(SCENARIOS)}")
    return v


def _out(v):
    if v is not None and not isinstance(v, str):
        raise ValueError("expected a path string or null")
    return v


_POS = _real(0.0, lo_open=True)
_ANY = _real()
CHECKS = {
    "scenario": _scenario,
    "omega_a": _real(0.0), "omega_b": _real(0.0),
    "delta_1": _ANY, "delta_b": _ANY, "dw_i": _ANY,
    "opd": _POS, "length": _POS, "coupling_ratio": _POS,
    "density": _real(0.0, lo_open=True, nullable=True),
    "gamma03_ns": _POS, "gamma_01": _POS, "gamma_12": _POS, "gamma_32": _POS,
    "dw_min": _ANY, "dw_max": _ANY, "n_points": _real(2, integer=True),
    "bounds_omega_a": _interval(True), "bounds_omega_b": _interval(True),
    "bounds_delta_1": _interval(), "bounds_delta_b": _interval(), "bounds_dw_i": _interval(),
    "budget": _real(1000, integer=True), "n_starts": _real(1, integer=True),
    "seed": _real(0, SEED_MAX, integer=True), "opd_list": _opd_list,
    "dt": _POS, "dz": _POS, "corrector_iters": _real(0, integer=True),
    "t_span_ns": _real(0.0, lo_open=True, nullable=True),
    "tail_ns": _real(0.0, lo_open=True, nullable=True),
    "tolerance": _POS, "out": _out,
}
assert set(CHECKS) | set(PULSE_KEYS) == {f.name for f in fields(RunConfig)}


def _pulse(v, base: PulseShape) -> PulseShape:
    if not isinstance(v, dict):
        raise ValueError("expected a mapping with kind, amplitude, t_r, t_s, hold")
    unknown = set(v) - {f.name for f in fields(PulseShape)}
    if unknown:
        raise ValueError(f"unknown pulse keys {sorted(unknown)}")
    vals = asdict(base)
    for k, x in v.items():
        vals[k] = x if k == "kind" else _number(x)
    return PulseShape(**vals)


def _resolve(data: dict, where) -> RunConfig:
    """Validate a mapping over the defaults; ``where(key)`` locates a key in messages."""
    cfg = RunConfig()
    updates = {}
    for key, value in data.items():
        if not isinstance(key, str) or (key not in CHECKS and key not in PULSE_KEYS):
            raise ConfigError(f"{where(key)}: unknown key {key!r}")
        try:
            if key in PULSE_KEYS:
                updates[key] = _pulse(value, getattr(cfg, key))
            else:
                updates[key] = CHECKS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{where(key)}: {key!r} {exc}") from None
    cfg = replace(cfg, **updates)
    if not cfg.dw_min < cfg.dw_max:
        raise ConfigError(f"{where('dw_max')}: 'dw_max' must exceed dw_min")
    return cfg


def _key_lines(text: str) -> dict:
    node = yaml.compose(text)
    if node is None or not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def parse_config(text: str) -> RunConfig:
    """Resolve a YAML (or JSON) document into a :class:`RunConfig`.

    Missing keys take their defaults; unknown keys and out-of-range values raise
    :class:`ConfigError` naming the key and its line.
    """
    try:
        data = yaml.safe_load(text)
        lines = _key_lines(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"line {mark.line + 1}" if mark is not None else "config"
        raise ConfigError(f"{loc}: malformed document ({getattr(exc, 'problem', exc)})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("line 1: config must be a key-value mapping")
    return _resolve(data, lambda k: f"line {lines[k]}" if k in lines else "config")


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``key=value`` strings; ``pulse.field=value`` edits one pulse field."""
    data = {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item}: expected key=value")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(f"--set {key}: unparseable value {raw!r}") from None
        head, dot, sub = key.partition(".")
        if dot:
            if head not in PULSE_KEYS:
                raise ConfigError(f"--set {key}: only pulse shapes take dotted keys")
            data.setdefault(head, {})[sub] = value
        else:
            data[key] = value
    merged = cfg.to_dict()
    for key, value in data.items():
        if key in PULSE_KEYS and isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return _resolve(merged, lambda k: f"--set {k}" if k in data else "config")


# ---------------------------------------------------------------- scenarios

def _coeff_cells(c):
    cells = []
    for name in COEFF_NAMES:
        z = getattr(c, name)
        cells += [z.real, z.imag]
    return cells


def _coeff_columns():
    cols = []
    for name in COEFF_NAMES:
        cols += [f"re_{name}", f"im_{name}"]
    return cols


def _run_coeffs(cfg, jobs):
    pump, probe = cfg.point()
    c = coefficients(pump, probe, cfg.ensemble(), cfg.rates())
    r = efficiencies(c)
    cols = ("omega_a", "omega_b", "delta_1", "delta_b", "dw_i", *_coeff_columns(), *RESULT_NAMES)
    row = [pump.omega_a, pump.omega_b, pump.delta_1, pump.delta_b, probe.dw_i,
           *_coeff_cells(c), *(getattr(r, k) for k in RESULT_NAMES)]
    return cols, [row], []


def _run_spectrum(cfg, jobs):
    pump, _ = cfg.point()
    grid = np.linspace(cfg.dw_min, cfg.dw_max, cfg.n_points)
    table = spectrum(pump, cfg.ensemble(), cfg.rates(), grid, jobs=jobs)
    rows = [[r.dw_i, *_coeff_cells(r.coeffs), *(getattr(r.result, k) for k in RESULT_NAMES)]
            for r in table.rows]
    return ("dw_i", *_coeff_columns(), *RESULT_NAMES), rows, []


def _run_dressed(cfg, jobs):
    pump, _ = cfg.point()
    d = dressed_spectrum(pump)
    rows = [["peak", i, p, d.label] for i, p in enumerate(d.peak_positions)]
    rows += [["window", i, w, d.label] for i, w in enumerate(d.window_centers)]
    rows += [["shift_a", i, s, d.label] for i, s in enumerate(d.shift_a)]
    rows += [["shift_b", i, s, d.label] for i, s in enumerate(d.shift_b)]
    return ("feature", "index", "value", "label"), rows, []


def _opt_row(rec):
    return [rec.opd, *rec.params, rec.eta_d, rec.eta_u, rec.t_d, rec.kappa_s_im,
            rec.evaluations, rec.converged, rec.starts_used, rec.seed]


def _run_optimize(cfg, jobs):
    rec = optimize_at_opd(cfg.opd, cfg.bounds(), cfg.budget, cfg.seed, cfg.ensemble(),
                          cfg.rates(), cfg.n_starts)
    return OPT_COLUMNS, [_opt_row(rec)], []


def _run_opd_curve(cfg, jobs):
    recs = efficiency_vs_opd(cfg.opd_list, cfg.bounds(), cfg.budget, cfg.seed, cfg.ensemble(),
                             cfg.rates(), cfg.n_starts, jobs=jobs)
    return OPT_COLUMNS, [_opt_row(r) for r in recs], []


def _pulse_args(cfg):
    pump, probe = cfg.point()
    ens = cfg.ensemble()
    t_span = None
    if cfg.t_span_ns is not None:
        t_span = float(characteristic_scales(ens, cfg.rates(), cfg.gamma03_ns).ns_to_tau(cfg.t_span_ns))
    return (cfg.pump_a, cfg.pump_b, cfg.idler, cfg.signal, pump, probe, ens, cfg.rates(),
            cfg.grid(t_span))


def _run_pulse(cfg, jobs):
    fields_ = simulate(*_pulse_args(cfg), gamma03_ns=cfg.gamma03_ns)
    s = fields_.scales.rate_scale
    i_in = np.abs(fields_.e_i_in / s) ** 2
    s_out = np.abs(fields_.e_s_out / s) ** 2
    rows = [list(r) for r in zip(fields_.t_ns, i_in, s_out, fields_.pump_a, fields_.pump_b)]
    footer = [("eta_d", pulse_efficiency(fields_)), ("tail_sensitivity", tail_sensitivity(fields_)),
              ("max_population_error", fields_.max_population_error)]
    freq, amp = math.nan, 0.0
    if cfg.idler.kind == "ramped-square":
        try:
            peak = modulation_spectrum(fields_.t_ns, s_out, cfg.idler.half_max, cfg.gamma03_ns)
            freq, amp = (peak.frequency, peak.amplitude) if peak.significant else (math.nan, peak.amplitude)
        except (ValueError, NoModulation):
            pass
    footer += [("modulation_frequency", freq), ("modulation_amplitude", amp)]
    cols = ("t_ns", "idler_in_sq", "signal_out_sq", "pump_a", "pump_b")
    return cols, rows, footer


def _run_convergence(cfg, jobs):
    *args, grid = _pulse_args(cfg)
    rep = convergence_report(grid, *args, gamma03_ns=cfg.gamma03_ns, tolerance=cfg.tolerance,
                             jobs=jobs)
    rows = [[g.dt, g.dz, eta] for g, eta in zip(rep.grids, rep.etas)]
    footer = [("rel_change_dt", rep.rel_change_dt), ("rel_change_dz", rep.rel_change_dz),
              ("converged", rep.converged)]
    return ("dt", "dz", "eta_d"), rows, footer


_RUNNERS = {
    "coeffs": _run_coeffs, "spectrum": _run_spectrum, "dressed": _run_dressed,
    "optimize": _run_optimize, "opd-curve": _run_opd_curve, "pulse": _run_pulse,
    "convergence": _run_convergence,
}


def run(cfg: RunConfig, jobs: int = 1) -> OutputTable:
    """Execute the configured scenario.  Library errors propagate unchanged."""
    if cfg.scenario in ("pulse", "convergence") and cfg.idler.amplitude <= 0:
        raise ConfigError("config: 'idler' amplitude must be > 0 for efficiency runs")
    cols, rows, footer = _RUNNERS[cfg.scenario](cfg, jobs)
    meta = {"tool": f"diamondfwm {__version__}", "seed": cfg.seed, "config": cfg.to_json()}
    if cfg.scenario == "pulse":
        meta["units"] = PULSE_UNITS
    return OutputTable(tuple(cols), rows, meta, footer)


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diamondfwm",
                                description="Diamond four-level frequency conversion toolkit.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--seed", type=int, help="optimizer seed (unsigned 64-bit)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; pulse fields as idler.hold=5")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = None
    try:
        text = ""
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"{args.config}: {exc.strerror}") from None
        cfg = parse_config(text)
        extra = list(args.overrides) + [f"scenario={args.scenario}"]
        if args.seed is not None:
            extra.append(f"seed={args.seed}")
        if args.out is not None:
            extra.append(f"out={json.dumps(args.out)}")
        cfg = apply_overrides(cfg, extra)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", BudgetExhausted)
            table = run(cfg, jobs=args.jobs)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ZeroInput as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        if exc.context:
            print("parameters: " + json.dumps(exc.context, sort_keys=True, default=str),
                  file=sys.stderr)
        print("config: " + cfg.to_json(), file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if cfg is not None:
            print("config: " + cfg.to_json(), file=sys.stderr)
        return 2

    text = table.to_csv()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0
