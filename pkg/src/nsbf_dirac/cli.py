"""Command-line front end: ``nsbf-dirac <mode> --config <file> [--out <dir>] [--coeff-dump]``.

Modes:

``solve``           evaluate the regular solution at the listed ``omegas``;
``eigs``            eigenvalues of the problem truncated to ``[0, B]``;
``verify``          identity checks of the coefficients;
``oscillator-demo`` the Dirac oscillator against its closed-form spectrum.

Exit status: 0 on success, 2 for configuration or input errors, 3 for
numerical failures.  Errors are also reported as one JSON object on stderr.
The thread count comes from ``NSBF_DIRAC_THREADS``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .evaluator import SpectralPoint, evaluate, g_via_f
from .grid import write_columns
from .nsbf import (
    DegenerateTruncationError,
    load_coefficients,
    save_coefficients,
)
from .oscillator import (
    OscillatorParams,
    exact_eigenvalues,
    exact_regular_pair,
    physical_split,
    to_physical,
)
from .pipeline import prepare
from .potential import AssumptionError, DiracProblem, load_potential_csv
from .special_functions import BesselEvaluationError
from .spectral import EigenProblem, find_eigenvalues

logger = logging.getLogger(__name__)

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main"]

MODES = ("solve", "eigs", "verify", "oscillator-demo")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__("%s: %s" % (field_name, message))
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    mode: str
    potential: dict
    kappa: float
    b: float
    n_points: int = 100001
    budget_N: int = 100
    threshold: float = 0.01
    N: int | None = None
    truncate: bool | None = None
    omegas: tuple[tuple[float, float], ...] = ()
    scan: dict | None = None
    omega1: float = 1.0
    oscillator: dict | None = None
    out_dir: str = "nsbf_out"
    coeff_cache: str | None = None

    @property
    def truncate_effective(self) -> bool:
        if self.truncate is not None:
            return self.truncate
        return self.mode in ("eigs", "oscillator-demo")


_KEYS = {f for f in RunConfig.__dataclass_fields__}
_OSC_KEYS = {"j", "epsilon", "m", "freq", "count", "states"}
_SCAN_KEYS = {"min", "max", "step"}
_BUILTINS = {"zero", "linear", "polynomial", "oscillator"}


def _number(d: dict, key: str, kind=float, positive: bool = False, minimum=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, "must be a number")
    if kind is int and int(v) != v:
        raise ConfigError(key, "must be an integer")
    v = kind(v)
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    if positive and not v > 0:
        raise ConfigError(key, "must be positive")
    if minimum is not None and v < minimum:
        raise ConfigError(key, "must be >= %s" % minimum)
    return v


def _check_potential(entry: Any) -> dict:
    if not isinstance(entry, dict):
        raise ConfigError("potential", "must be an object with 'builtin' or 'csv'")
    if ("builtin" in entry) == ("csv" in entry):
        raise ConfigError("potential", "give exactly one of 'builtin' and 'csv'")
    if "csv" in entry:
        extra = set(entry) - {"csv"}
        if extra:
            raise ConfigError("potential", "unknown keys %s" % sorted(extra))
        return dict(entry)
    name = entry["builtin"]
    if name not in _BUILTINS:
        raise ConfigError("potential.builtin", "unknown builtin %r (choose from %s)" % (name, sorted(_BUILTINS)))
    allowed = {"zero": set(), "linear": {"slope"}, "polynomial": {"coeffs"},
               "oscillator": {"epsilon", "m", "freq"}}[name]
    extra = set(entry) - {"builtin"} - allowed
    if extra:
        raise ConfigError("potential", "unknown keys %s for builtin %s" % (sorted(extra), name))
    if name == "polynomial":
        c = entry.get("coeffs")
        if not isinstance(c, list) or not c or not all(isinstance(x, (int, float)) for x in c):
            raise ConfigError("potential.coeffs", "must be a non-empty list of numbers")
    return dict(entry)


def parse_config(text: str, mode: str | None = None) -> RunConfig:
    """Parse and validate a JSON configuration; ``mode`` overrides the file's."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", "invalid JSON: %s" % exc) from None
    if not isinstance(raw, dict):
        raise ConfigError("<document>", "must be a JSON object")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    d = dict(raw)
    if mode is not None:
        d["mode"] = mode
    if "mode" not in d:
        raise ConfigError("mode", "missing")
    if d["mode"] not in MODES:
        raise ConfigError("mode", "must be one of %s" % ", ".join(MODES))
    demo = d["mode"] == "oscillator-demo"

    osc = None
    if demo or "oscillator" in d:
        osc = dict(d.get("oscillator") or {})
        extra = set(osc) - _OSC_KEYS
        if extra:
            raise ConfigError("oscillator", "unknown keys %s" % sorted(extra))
        osc.setdefault("j", 2.5)
        osc.setdefault("epsilon", -1)
        osc.setdefault("m", 1.0)
        osc.setdefault("freq", 1.0)
        osc.setdefault("count", 13)
        try:
            params = OscillatorParams(float(osc["j"]), int(osc["epsilon"]), float(osc["m"]), float(osc["freq"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError("oscillator", str(exc)) from None
        _number(osc, "count", int, minimum=1)
        if "states" in osc and not (isinstance(osc["states"], list)
                                    and all(isinstance(s, int) and s >= 0 for s in osc["states"])):
            raise ConfigError("oscillator.states", "must be a list of nonnegative integers")
        if demo:
            d.setdefault("potential", {"builtin": "oscillator", "epsilon": params.epsilon,
                                       "m": params.m, "freq": params.freq})
            d.setdefault("kappa", params.kappa)
            d.setdefault("b", 20.0)

    for key in ("potential", "kappa", "b"):
        if key not in d:
            raise ConfigError(key, "missing")
    d["potential"] = _check_potential(d["potential"])
    d["kappa"] = _number(d, "kappa", minimum=0.5)
    d["b"] = _number(d, "b", positive=True)
    if "n_points" in d:
        d["n_points"] = _number(d, "n_points", int, minimum=2)
    if "budget_N" in d:
        d["budget_N"] = _number(d, "budget_N", int, minimum=1)
    if "N" in d and d["N"] is not None:
        d["N"] = _number(d, "N", int, minimum=1)
    if "threshold" in d:
        d["threshold"] = _number(d, "threshold", positive=True)
        if d["threshold"] >= 1:
            raise ConfigError("threshold", "must be < 1")
    if "omega1" in d:
        d["omega1"] = _number(d, "omega1")
        if d["omega1"] == 0:
            raise ConfigError("omega1", "must be nonzero")
    if "truncate" in d and d["truncate"] is not None and not isinstance(d["truncate"], bool):
        raise ConfigError("truncate", "must be true, false or null")
    if "omegas" in d:
        pts = d["omegas"]
        if not isinstance(pts, list) or not all(
                isinstance(pt, list) and len(pt) == 2 and all(isinstance(x, (int, float)) for x in pt)
                for pt in pts):
            raise ConfigError("omegas", "must be a list of [omega1, omega2] pairs")
        d["omegas"] = tuple((float(a), float(b)) for a, b in pts)
    if d["mode"] == "solve" and not d.get("omegas"):
        raise ConfigError("omegas", "solve needs at least one [omega1, omega2] pair")
    if d.get("scan") is not None:
        scan = d["scan"]
        if not isinstance(scan, dict) or set(scan) - _SCAN_KEYS or not _SCAN_KEYS <= set(scan):
            raise ConfigError("scan", "must be an object with keys min, max, step")
        scan = {k: _number(scan, k) for k in _SCAN_KEYS}
        if not scan["max"] > scan["min"]:
            raise ConfigError("scan.max", "must exceed scan.min")
        if not scan["step"] > 0:
            raise ConfigError("scan.step", "must be positive")
        d["scan"] = scan
    elif d["mode"] == "eigs" and osc is None:
        raise ConfigError("scan", "eigs needs a scan range {min, max, step}")
    if "out_dir" in d and not isinstance(d["out_dir"], str):
        raise ConfigError("out_dir", "must be a string")
    if d.get("coeff_cache") is not None and not isinstance(d["coeff_cache"], str):
        raise ConfigError("coeff_cache", "must be a path string")
    d["oscillator"] = osc
    return RunConfig(**d)


def _potential_functions(spec: dict) -> tuple[Callable, Callable] | None:
    name = spec.get("builtin")
    if name is None:
        return None
    if name == "zero":
        return (lambda r: np.zeros_like(r), lambda r: np.zeros_like(r))
    if name == "linear":
        s = float(spec.get("slope", 1.0))
        return (lambda r: s * r, lambda r: s * np.ones_like(r))
    if name == "polynomial":
        c = np.asarray(spec["coeffs"], dtype=float)
        poly = np.polynomial.Polynomial(c)
        der = poly.deriv()
        return (lambda r: poly(r), lambda r: der(r) * np.ones_like(r))
    params = OscillatorParams(2.5, int(spec.get("epsilon", -1)), float(spec.get("m", 1.0)),
                              float(spec.get("freq", 1.0)))
    return params.potential, params.potential_prime


def build_problem(cfg: RunConfig) -> tuple[DiracProblem, tuple[Callable, Callable] | None]:
    fns = _potential_functions(cfg.potential)
    if fns is None:
        try:
            problem = load_potential_csv(cfg.potential["csv"], cfg.kappa)
        except (OSError, ValueError) as exc:
            raise ConfigError("potential.csv", "cannot read potential: %s" % exc) from None
        return problem, None
    return DiracProblem.from_function(fns[0], cfg.kappa, cfg.b, cfg.n_points, fns[1]), fns


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def _discrepancy_csv(out: Path, prep) -> None:
    d = prep.diagnostics
    write_columns(out / "discrepancy.csv", ("r", "e2", "abs_rQ2_over_100"), [d.r, d.e, d.target])


def _dump(out: Path, coeffs) -> None:
    # npz for reloading, one CSV per family for plotting.
    save_coefficients(out / "coeffs.npz", coeffs)
    for j in (1, 2):
        beta = coeffs.beta(j)
        write_columns(out / ("beta_j%d.csv" % j), ["r"] + ["beta_%d" % n for n in range(beta.shape[0])],
                      [coeffs.r, *beta])


def _prepared(cfg: RunConfig):
    problem, fns = build_problem(cfg)
    p, dp = fns if fns is not None else (None, None)
    return prepare(problem, cfg.budget_N, cfg.threshold, cfg.truncate_effective,
                   n_points=cfg.n_points, N=cfg.N, p=p, p_prime=dp)


def _run_solve(cfg: RunConfig, out: Path, coeff_dump: bool) -> dict:
    prep = _prepared(cfg)
    _discrepancy_csv(out, prep)
    coeffs = prep.coeffs
    if coeff_dump:
        _dump(out, coeffs)
    points = []
    for k, (w1, w2) in enumerate(cfg.omegas):
        pt = SpectralPoint(w1, w2)
        norm = "regular" if pt.lam >= 0 and w2 != 0 else "unit"
        s = evaluate(coeffs, pt, normalization=norm)
        write_columns(out / ("solution_%d.csv" % k),
                      ("r", "f", "g", "f_prime", "g_prime", "residual1", "residual2"),
                      [s.r, s.f, s.g, s.f_prime, s.g_prime, s.residual1, s.residual2])
        r1, r2 = s.sup_residuals()
        points.append({"omega1": w1, "omega2": w2, "normalization": norm,
                       "sup_residual1": r1, "sup_residual2": r2, "file": "solution_%d.csv" % k})
    return {"mode": "solve", "b": coeffs.grid.b, "N": coeffs.N, "B_selected": prep.diagnostics.B,
            "shift": coeffs.shift, "points": points}


def _run_verify(cfg: RunConfig, out: Path, coeff_dump: bool) -> tuple[dict, bool]:
    prep = _prepared(cfg)
    _discrepancy_csv(out, prep)
    coeffs = prep.coeffs
    if coeff_dump:
        _dump(out, coeffs)
    checks = {}
    for j in (1, 2):
        d = prep.family_diagnostics[j]
        inside = d.r <= prep.diagnostics.B
        checks["identity_j%d" % j] = {"passed": prep.identity_holds(j),
                                       "max_e": float(np.max(d.e[inside]))}
    if cfg.potential.get("builtin") == "zero":
        mags = max(float(np.max(np.abs(a))) for j in (1, 2) for a in (coeffs.beta(j), coeffs.gamma(j)))
        checks["zero_potential_coefficients"] = {"passed": mags <= 1e-10, "max_abs": mags}
    for pt in cfg.omegas:
        s = evaluate(coeffs, SpectralPoint(*pt), normalization="unit")
        r1, r2 = s.sup_residuals()
        checks["residuals_%g_%g" % pt] = {"sup_residual1": r1, "sup_residual2": r2}
    ok = all(c.get("passed", True) for c in checks.values())
    report = {"mode": "verify", "b": coeffs.grid.b, "N": coeffs.N, "B_selected": prep.diagnostics.B,
              "shift": coeffs.shift, "checks": checks, "passed": ok}
    return report, ok


def _eigen_setup(cfg: RunConfig, coeffs):
    osc = cfg.oscillator
    params = None
    if osc is not None:
        params = OscillatorParams(float(osc["j"]), int(osc["epsilon"]), float(osc["m"]), float(osc["freq"]))
    if cfg.scan is not None:
        lo, hi, step = cfg.scan["min"], cfg.scan["max"], cfg.scan["step"]
    else:
        # Default for the oscillator: a quarter of the gap, just below the ground state.
        first = float(exact_eigenvalues(params, 1)[0])
        step = params.gap / 4.0
        lo = first - step
        hi = float(exact_eigenvalues(params, int(osc["count"]))[-1]) + 0.5 * params.gap
    if params is not None:
        split = lambda lam, P=params: physical_split(P, lam) if lam + P.m ** 2 > 0 else SpectralPoint(1.0, lam)
    else:
        split = lambda lam, w1=cfg.omega1: SpectralPoint(w1, lam / w1)
    return EigenProblem(coeffs, (lo, hi), step, split=split), params


def _eig_rows(results, params, count=None):
    rows = []
    exact = None
    if params is not None:
        exact = exact_eigenvalues(params, max(len(results), 1) + 2)
    for k, e in enumerate(results):
        ex = float(exact[k]) if exact is not None else math.nan
        rows.append({"index": k, "exact": ex, "approximate": e.eigen_parameter,
                     "abs_error": abs(e.eigen_parameter - ex) if exact is not None else math.nan,
                     "error_estimate": e.error_estimate, "residual": e.residual,
                     "flag": ";".join(e.flags) if e.flags else "ok"})
    return rows


def _write_eigs(out: Path, rows) -> str:
    cols = ("index", "exact", "approximate", "abs_error", "error_estimate", "residual", "flag")
    with open(out / "eigs.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(row[c] if isinstance(row[c], str) else
                              ("%d" % row[c] if c == "index" else "%.17g" % row[c]) for c in cols) + "\n")
    lines = ["%5s %22s %22s %10s %10s %s" % ("n", "exact", "approximate", "abs err", "estimate", "flag")]
    for row in rows:
        lines.append("%5d %22.15f %22.15f %10.2e %10.2e %s" % (
            row["index"], row["exact"], row["approximate"], row["abs_error"], row["error_estimate"], row["flag"]))
    text = "\n".join(lines) + "\n"
    (out / "eigs.txt").write_text(text)
    return text


def _run_eigs(cfg: RunConfig, out: Path, coeff_dump: bool):
    prep = None
    if cfg.coeff_cache is not None:
        try:
            coeffs = load_coefficients(cfg.coeff_cache)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError("coeff_cache", "cannot load coefficients: %s" % exc) from None
    else:
        prep = _prepared(cfg)
        _discrepancy_csv(out, prep)
        coeffs = prep.coeffs
    if coeff_dump:
        _dump(out, coeffs)
    ep, params = _eigen_setup(cfg, coeffs)
    results = find_eigenvalues(ep, with_eigenfunctions=False)
    rows = _eig_rows(results, params)
    text = _write_eigs(out, rows)
    sys.stdout.write(text)
    summary = {"mode": cfg.mode, "B": coeffs.grid.b, "N": coeffs.N,
               "B_selected": None if prep is None else prep.diagnostics.B,
               "eigenvalues": [{k: (_finite_or_none(v) if isinstance(v, float) else v) for k, v in row.items()}
                               for row in rows]}
    return summary, coeffs


def _run_demo(cfg: RunConfig, out: Path, coeff_dump: bool) -> dict:
    summary, coeffs = _run_eigs(cfg, out, coeff_dump)
    osc = cfg.oscillator
    params = OscillatorParams(float(osc["j"]), int(osc["epsilon"]), float(osc["m"]), float(osc["freq"]))
    states = osc.get("states", [1, 10, 125] if params.epsilon == -1 else [0, 5, 20])
    errs = []
    for n in states:
        lam = float(exact_eigenvalues(params, n + 1)[-1])
        pt = physical_split(params, lam)
        s = evaluate(coeffs, pt, normalization="unit")
        f_ex, g_ex = exact_regular_pair(params, n, s.r, pt, "unit")
        g_alt, _ = g_via_f(s, coeffs.p, coeffs.kappa)
        F, G = to_physical(params, s.f, s.g)
        F_ex, G_ex = to_physical(params, f_ex, g_ex)
        F_alt, G_alt = to_physical(params, s.f, g_alt)
        alt = G_alt if params.epsilon == -1 else F_alt
        alt_ex = G_ex if params.epsilon == -1 else F_ex
        write_columns(out / ("eigenfunction_n%d.csv" % n),
                      ("r", "F_exact", "G_exact", "F", "G", "abs_err_F", "abs_err_G", "abs_err_alt"),
                      [s.r, F_ex, G_ex, F, G, np.abs(F - F_ex), np.abs(G - G_ex), np.abs(alt - alt_ex)])
        errs.append({"n": n, "lam": lam, "sup_err_F": float(np.max(np.abs(F - F_ex))),
                     "sup_err_G": float(np.max(np.abs(G - G_ex))),
                     "sup_err_alt": float(np.max(np.abs(alt - alt_ex)))})
    summary["eigenfunctions"] = errs
    summary["oscillator"] = asdict(params)
    return summary


def run(cfg: RunConfig, coeff_dump: bool = False) -> int:
    """Execute one configuration; returns the exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "solve":
        summary, ok = _run_solve(cfg, out, coeff_dump), True
    elif cfg.mode == "verify":
        summary, ok = _run_verify(cfg, out, coeff_dump)
    elif cfg.mode == "eigs":
        summary, ok = _run_eigs(cfg, out, coeff_dump)[0], True
    else:
        summary, ok = _run_demo(cfg, out, coeff_dump), True
    summary["status"] = "ok" if ok else "failed"
    _write_json(out / "summary.json", summary)
    return EXIT_OK if ok else EXIT_NUMERIC


def _error(kind: str, message: str, status: int, field_name: str | None = None) -> int:
    report = {"status": "error", "kind": kind, "message": message}
    if field_name is not None:
        report["field"] = field_name
    sys.stderr.write(json.dumps(report) + "\n")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nsbf-dirac", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--coeff-dump", action="store_true",
                        help="write coeffs.npz and beta_j1.csv, beta_j2.csv to the output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        return _error("config", "cannot read config: %s" % exc, EXIT_CONFIG, "config")
    try:
        cfg = parse_config(text, mode=args.mode)
        if args.out:
            cfg = RunConfig(**{**cfg.__dict__, "out_dir": args.out})
        return run(cfg, coeff_dump=args.coeff_dump)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG, exc.field)
    except (AssumptionError, DegenerateTruncationError, BesselEvaluationError, ArithmeticError,
            RuntimeError, ValueError) as exc:
        return _error("numeric", "%s: %s" % (type(exc).__name__, exc), EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
