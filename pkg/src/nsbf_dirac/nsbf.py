"""Coefficients of the Neumann series of Bessel functions (NSBF).

For a seed ``u ~ r**a`` of ``-u'' + (a(a-1)/r**2 + q) u = 0`` the series
coefficients obey, with ``m = 2n + a - 1``::

    beta_0  = (2a + 1) (u / r**a - 1)
    eta_n   = int_0^r (t u' + m u) t**(m-1) beta_{n-1} dt
    theta_n = int_0^r (eta_n - t**m beta_{n-1} u) / u**2 dt
    beta_n  = -(4n+2a+1)/(4n+2a-3) [beta_{n-1} + 2 (4n+2a-1) u theta_n / r**(m+1)]

and similarly for the derivative coefficients ``gamma_n``.  The f-component
of the Dirac system uses ``a = kappa`` (``j = 2``), the g-component
``a = kappa + 1`` (``j = 1``).

Everything is computed in the variable ``s = r / b``.  All powers of ``s``
are then bounded by one, and the recursion is invariant under the change of
variable (only the gamma brackets pick up ``1/b``).
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid, cumulative_integral, cumulative_integral_power_weight, extrapolate_origin
from .potential import DerivedPotentials, ParticularSolutions, Seed

logger = logging.getLogger(__name__)

__all__ = [
    "CoefficientFamily",
    "NsbfCoefficients",
    "TruncationDiagnostics",
    "DegenerateTruncationError",
    "compute_family",
    "compute_coefficients",
    "compute_beta",
    "compute_gamma",
    "alternating_sums",
    "select_truncation",
    "joint_truncation",
    "save_coefficients",
    "load_coefficients",
]

_TINY = 1e-280


class DegenerateTruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoefficientFamily:
    """``beta[n]``, ``gamma[n]`` (``n = 0..N``) of one seed on the grid.

    ``theta`` and ``eta`` hold the last step of the recursion.  ``finite``
    marks grid nodes where every coefficient stayed finite.
    """

    j: int
    a: float
    beta: np.ndarray
    gamma: np.ndarray | None
    theta: np.ndarray
    eta: np.ndarray
    finite: np.ndarray

    @property
    def N(self) -> int:
        return self.beta.shape[0] - 1

    def truncated(self, N: int) -> "CoefficientFamily":
        if N > self.N:
            raise ValueError("only %d coefficients available" % (self.N + 1))
        g = None if self.gamma is None else self.gamma[: N + 1]
        return CoefficientFamily(self.j, self.a, self.beta[: N + 1], g, self.theta, self.eta, self.finite)


def _safe_div(num, den):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        out = num / den
    small = np.abs(den) < _TINY
    if np.any(small):
        out = np.where(small, 0.0, out)
    return out


def _origin_layer(n: int, a: float, n_pts: int) -> int:
    """First node at which step ``n`` of the recursion is resolved.

    The integrands behave like ``s**K`` with ``K ~ 4n + 2a`` near the origin,
    and the cubic cell rule loses all relative accuracy on the first ~K
    nodes.  There the exact coefficients are ``O(s**(2n+2))`` and negligible,
    so they are continued from this node by their leading power.
    """
    return int(min(n_pts - 1, math.ceil(3.0 * (4.0 * n + 2.0 * a))))


def compute_family(seed: Seed, grid: Grid, N: int, with_gamma: bool = True) -> CoefficientFamily:
    """Run the recursion for one seed up to index ``N``."""
    if N < 0:
        raise ValueError("N must be >= 0")
    b = grid.b
    s = grid.r / b
    hs = grid.h / b
    a = seed.a
    U, V = seed.U, seed.V
    dtype = np.result_type(U, V, float)
    n_pts = grid.n_points

    beta = np.empty((N + 1, n_pts), dtype=dtype)
    gamma = np.empty((N + 1, n_pts), dtype=dtype) if with_gamma else None
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        beta[0] = (2.0 * a + 1.0) * (U - 1.0)
        beta[0, 0] = 0.0
        if with_gamma:
            gamma[0] = (2.0 * a + 1.0) * (seed.V_a_over_r - 0.5 * seed.Q)
            if not np.isfinite(gamma[0, 0]):
                gamma[0, 0] = extrapolate_origin(gamma[0])
        U2 = U * U
        s2a = s ** (2.0 * a)
    theta = np.zeros(n_pts, dtype=dtype)
    eta = np.zeros(n_pts, dtype=dtype)
    for n in range(1, N + 1):
        m = 2.0 * n + a - 1.0
        prev = beta[n - 1]
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            s_m = s ** m
            eta = cumulative_integral_power_weight(prev * (V + m * U), hs, m - 1.0 + a)
            integrand = _safe_div(eta - s_m * s ** a * prev * U, s2a * U2)
            integrand[0] = 0.0
            theta = cumulative_integral(integrand, hs)
            s2n = s ** (2.0 * n)
            c1 = (4.0 * n + 2.0 * a + 1.0) / (4.0 * n + 2.0 * a - 3.0)
            c2 = 4.0 * n + 2.0 * a - 1.0
            beta[n] = -c1 * (prev + 2.0 * c2 * U * _safe_div(theta, s2n))
            beta[n, 0] = 0.0
        layer = _origin_layer(n, a, n_pts)
        if layer > 1:
            ratio = np.arange(1, layer) / layer
            beta[n, 1:layer] = beta[n, layer] * ratio ** (2.0 * n + 2.0)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            if with_gamma:
                bracket = (
                    2.0 * V * _safe_div(theta, s2n * s)
                    + 2.0 * _safe_div(eta, U * s2n * s2a)
                    - _safe_div(prev, s)
                ) / b
                gamma[n] = -c1 * (gamma[n - 1] + c2 * bracket)
                gamma[n, 0] = 0.0
                if layer > 1:
                    gamma[n, 1:layer] = gamma[n, layer] * ratio ** (2.0 * n + 1.0)
    finite = np.all(np.isfinite(beta), axis=0)
    if with_gamma:
        finite &= np.all(np.isfinite(gamma), axis=0)
    if not np.all(finite):
        logger.info("j=%d: %d grid nodes overflowed in the coefficient recursion",
                    seed.j, int(np.count_nonzero(~finite)))
    # The recursion used s-powers; theta and eta are stored in the r variable.
    with np.errstate(over="ignore", invalid="ignore"):
        theta_r = theta * b ** (2.0 * N) if N > 0 else theta
        eta_r = eta * b ** (2.0 * N + 2.0 * a - 1.0) if N > 0 else eta
    return CoefficientFamily(seed.j, a, beta, gamma, theta_r, eta_r, finite)


@dataclass(frozen=True)
class NsbfCoefficients:
    """Both coefficient families of one problem, plus what evaluation needs."""

    grid: Grid
    kappa: float
    f_family: CoefficientFamily  # j = 2
    g_family: CoefficientFamily | None  # j = 1
    f0_scaled: np.ndarray
    p: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    shift: float = 0.0
    seeds: ParticularSolutions | None = None

    @property
    def N(self) -> int:
        return self.f_family.N

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def family(self, j: int) -> CoefficientFamily:
        fam = self.g_family if j == 1 else self.f_family
        if fam is None:
            raise ValueError("family j=%d was not computed" % j)
        return fam

    def beta(self, j: int) -> np.ndarray:
        return self.family(j).beta

    def gamma(self, j: int) -> np.ndarray:
        g = self.family(j).gamma
        if g is None:
            raise ValueError("gamma coefficients were not computed")
        return g

    def Q(self, j: int) -> np.ndarray:
        return self.Q1 if j == 1 else self.Q2

    def truncated(self, N: int) -> "NsbfCoefficients":
        g = None if self.g_family is None else self.g_family.truncated(N)
        return NsbfCoefficients(self.grid, self.kappa, self.f_family.truncated(N), g,
                                self.f0_scaled, self.p, self.Q1, self.Q2, self.shift, self.seeds)


_SEED_FIELDS = ("f0_scaled", "g0_scaled", "f0_v", "g0_v", "f0_v_over_r", "g0_v_over_r", "Q1", "Q2")
_FAMILY_FIELDS = ("beta", "gamma", "theta", "eta", "finite")


def save_coefficients(path, coeffs: NsbfCoefficients) -> None:
    """Write every array of ``coeffs`` (and its seeds) to an ``.npz`` file."""
    data = {"b": coeffs.grid.b, "n_points": coeffs.grid.n_points, "kappa": coeffs.kappa,
            "shift": coeffs.shift, "f0_scaled": coeffs.f0_scaled, "p": coeffs.p,
            "Q1": coeffs.Q1, "Q2": coeffs.Q2}
    for tag, fam in (("f", coeffs.f_family), ("g", coeffs.g_family)):
        if fam is None:
            continue
        data[tag + "_a"] = fam.a
        for name in _FAMILY_FIELDS:
            value = getattr(fam, name)
            if value is not None:
                data["%s_%s" % (tag, name)] = value
    if coeffs.seeds is not None:
        ps = coeffs.seeds
        for name in _SEED_FIELDS:
            data["seed_" + name] = getattr(ps, name)
        data["seed_nonvanishing"] = ps.g0_nonvanishing
        data["seed_min_modulus"] = ps.g0_min_modulus
    np.savez(path, **data)


def load_coefficients(path) -> NsbfCoefficients:
    """Inverse of :func:`save_coefficients`; the result evaluates bit-identically."""
    with np.load(path) as z:
        d = {k: z[k] for k in z.files}
    grid = Grid(float(d["b"]), int(d["n_points"]))
    kappa = float(d["kappa"])
    fams = {}
    for tag, j in (("f", 2), ("g", 1)):
        if tag + "_a" not in d:
            continue
        fams[j] = CoefficientFamily(j, float(d[tag + "_a"]), d[tag + "_beta"], d.get(tag + "_gamma"),
                                    d[tag + "_theta"], d[tag + "_eta"], d[tag + "_finite"])
    seeds = None
    if "seed_f0_scaled" in d:
        seeds = ParticularSolutions(kappa=kappa, r=grid.r,
                                    **{name: d["seed_" + name] for name in _SEED_FIELDS},
                                    g0_nonvanishing=bool(d["seed_nonvanishing"]),
                                    shift_applied=float(d["shift"]),
                                    g0_min_modulus=float(d["seed_min_modulus"]))
    return NsbfCoefficients(grid, kappa, fams[2], fams.get(1), d["f0_scaled"], d["p"], d["Q1"], d["Q2"],
                            float(d["shift"]), seeds)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NSBF_DIRAC_THREADS", "2")))
    except ValueError:
        return 1


def compute_coefficients(ps: ParticularSolutions, grid: Grid, p: np.ndarray, N: int,
                         with_gamma: bool = True, families=(1, 2)) -> NsbfCoefficients:
    """Compute the requested families; j=1 and j=2 run concurrently."""
    if ps.r.size != grid.n_points:
        raise ValueError("particular solutions live on a different grid")
    if 1 in families and not ps.g0_nonvanishing:
        raise ValueError("g0 vanishes on (0, b]; apply spectral_shift or use the f-only path")
    todo = {j: ps.seed(j) for j in families}
    if _threads() > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=len(todo)) as pool:
            futs = {j: pool.submit(compute_family, sd, grid, N, with_gamma) for j, sd in todo.items()}
            fams = {j: f.result() for j, f in futs.items()}
    else:
        fams = {j: compute_family(sd, grid, N, with_gamma) for j, sd in todo.items()}
    if 2 not in fams:
        raise ValueError("the f-family (j=2) is always required")
    return NsbfCoefficients(grid, ps.kappa, fams[2], fams.get(1), ps.f0_scaled, p,
                            ps.Q1, ps.Q2, ps.shift_applied, ps)


def compute_beta(ps: ParticularSolutions, grid: Grid, p: np.ndarray, N: int, families=(1, 2)) -> NsbfCoefficients:
    return compute_coefficients(ps, grid, p, N, with_gamma=False, families=families)


def compute_gamma(ps: ParticularSolutions, grid: Grid, p: np.ndarray, N: int, families=(1, 2)) -> NsbfCoefficients:
    return compute_coefficients(ps, grid, p, N, with_gamma=True, families=families)


def alternating_sums(beta: np.ndarray) -> np.ndarray:
    """Partial sums ``sum_{n<=N} (-1)**n beta_n`` for every ``N`` (rows)."""
    signs = (-1.0) ** np.arange(beta.shape[0])
    return np.cumsum(signs[:, None] * beta, axis=0)


@dataclass(frozen=True)
class TruncationDiagnostics:
    """Plateau error of the beta-sum identity and the chosen ``B`` and ``N``.

    ``e[i]`` is the smallest ``|sum_{n<=N} (-1)**n beta_n - r Q / 2|`` over
    ``N``; ``target = threshold * max_{t <= r} |t Q(t)|``; ``r0`` is the first node where the
    plateau is no longer below target, ``B = 0.99 * r0``.
    """

    r: np.ndarray
    e: np.ndarray
    target: np.ndarray
    best_N: np.ndarray
    r0: float
    B: float
    N_selected: int
    global_discrepancy: np.ndarray
    j: int = 2


def _plateau_index(values: np.ndarray, window: int = 5, factor: float = 0.9) -> int:
    # The discrepancy first grows (the low partial sums have not converged at
    # large r) and then falls; look for the plateau after the peak.  It is the
    # first index whose running minimum is not beaten by `factor` within
    # `window` more steps.
    vals = np.where(np.isfinite(values), values, np.inf)
    finite = np.flatnonzero(np.isfinite(vals))
    if finite.size == 0:
        return 0
    start = int(finite[np.argmax(vals[finite])])
    run = np.minimum.accumulate(vals[start:])
    for k in range(run.size):
        ahead = run[k + 1 : k + 1 + window]
        if ahead.size < window:
            return start + int(np.argmin(vals[start:]))
        if not np.any(ahead < factor * run[k]):
            return start + k
    return vals.size - 1


def select_truncation(coeffs: NsbfCoefficients, budget_N: int | None = None, j: int = 2,
                      threshold: float = 0.01, shrink: float = 0.99,
                      floor: float = 1e-12, B_cap: float | None = None) -> TruncationDiagnostics:
    """Choose ``B`` and ``N`` from the identity ``sum (-1)**n beta_n = r Q / 2``.

    Nodes where the identity is already satisfied to ``floor * (1 + |r Q|)``
    always pass, so a vanishing ``r Q`` does not stop the scan by itself.
    ``B_cap`` bounds ``B`` from above (``N`` is then chosen on ``[0, B_cap]``).
    """
    fam = coeffs.family(j)
    beta = fam.beta if budget_N is None else fam.beta[: budget_N + 1]
    r = coeffs.grid.r
    rq2 = 0.5 * r * coeffs.Q(j)
    rq2[0] = 0.0
    with np.errstate(invalid="ignore", over="ignore"):
        dev = np.abs(alternating_sums(beta) - rq2[None, :])
    dev[~np.isfinite(dev)] = np.inf
    e = dev.min(axis=0)
    best = dev.argmin(axis=0)
    # Relative to the running maximum of |r Q|, so an isolated zero of Q
    # does not end the interval.
    scale = np.maximum.accumulate(np.abs(2.0 * rq2))
    target = threshold * scale
    good = (e < target) | (e <= floor * (1.0 + scale))
    good[0] = True
    bad = np.flatnonzero(~good)
    if bad.size == 0:
        r0 = float(r[-1])
    else:
        if bad[0] <= 1:
            raise DegenerateTruncationError(
                "identity check fails at the first grid cell; use a smaller b or a finer grid"
            )
        r0 = float(r[bad[0]])
    B = shrink * r0
    if B_cap is not None:
        B = min(B, B_cap)
    inside = r <= B
    with np.errstate(invalid="ignore"):
        glob = np.max(np.where(inside[None, :], dev, 0.0), axis=1)
    N_sel = _plateau_index(glob)
    return TruncationDiagnostics(r=r, e=e, target=target, best_N=best, r0=r0, B=B,
                                 N_selected=N_sel, global_discrepancy=glob, j=j)


def joint_truncation(coeffs: NsbfCoefficients, budget_N: int | None = None,
                     threshold: float = 0.01) -> TruncationDiagnostics:
    """``B`` where the identity holds for every computed family, ``N`` the larger plateau.

    The returned diagnostics are those of ``j = 2`` on the common ``B``.
    """
    fams = [j for j in (2, 1) if j == 2 or coeffs.g_family is not None]
    first = [select_truncation(coeffs, budget_N, j, threshold) for j in fams]
    B = min(d.B for d in first)
    capped = [select_truncation(coeffs, budget_N, j, threshold, B_cap=B) for j in fams]
    return replace(capped[0], N_selected=max(d.N_selected for d in capped))
