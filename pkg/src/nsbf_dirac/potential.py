"""Problem data for the radial Dirac system and its zero-energy seeds.

The system is::

    f' - (kappa/r) f + p f =  omega1 g
    g' + (kappa/r) g - p g = -omega2 f

Both components obey perturbed Bessel equations with potentials
``q1 = p' - 2 kappa p / r + p**2`` (for g) and ``q2 = -p' - 2 kappa p / r + p**2``
(for f).  Their regular zero-energy solutions ``f0 ~ r**kappa`` and
``g0 ~ r**(kappa+1)`` seed the coefficient recursion in :mod:`nsbf_dirac.nsbf`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .grid import (
    Grid,
    cumulative_integral,
    cumulative_integral_power_weight,
    extrapolate_origin,
    finite_difference,
    grid_from_samples,
)

logger = logging.getLogger(__name__)

__all__ = [
    "AssumptionError",
    "DiracProblem",
    "DerivedPotentials",
    "ParticularSolutions",
    "Seed",
    "derive_potentials",
    "particular_solutions",
    "spectral_shift",
    "load_potential_csv",
]


class AssumptionError(RuntimeError):
    """No non-vanishing seed for the g-equation could be constructed."""


@dataclass(frozen=True)
class DiracProblem:
    """Potential samples ``p``, ``p'`` on a uniform grid and the constant kappa."""

    grid: Grid
    kappa: float
    p: np.ndarray
    p_prime: np.ndarray

    def __post_init__(self):
        if not self.kappa >= 0.5:
            raise ValueError("kappa must be >= 1/2")
        for name in ("p", "p_prime"):
            v = np.asarray(getattr(self, name))
            if v.shape != (self.grid.n_points,):
                raise ValueError("%s must have one value per grid node" % name)
            if not np.all(np.isfinite(v)):
                raise ValueError("%s must be finite" % name)
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.p) and bool(np.any(self.p.imag != 0))

    @classmethod
    def from_function(cls, p: Callable, kappa: float, b: float, n_points: int,
                      p_prime: Callable | None = None) -> "DiracProblem":
        grid = Grid(b, n_points)
        pv = np.asarray(p(grid.r)) * np.ones(grid.n_points)
        if p_prime is None:
            dp = finite_difference(pv, grid.h)
        else:
            dp = np.asarray(p_prime(grid.r)) * np.ones(grid.n_points)
        return cls(grid, kappa, pv, dp)

    @classmethod
    def from_samples(cls, r, p, kappa: float, p_prime=None) -> "DiracProblem":
        grid = grid_from_samples(r)
        p = np.asarray(p)
        dp = finite_difference(p, grid.h) if p_prime is None else np.asarray(p_prime)
        return cls(grid, kappa, p, dp)

    def restricted(self, b_new: float, n_points: int | None = None,
                   p: Callable | None = None, p_prime: Callable | None = None) -> "DiracProblem":
        """The same problem on ``[0, b_new]``.

        With callables the potential is resampled exactly; otherwise it is
        interpolated from the current samples with a cubic spline.
        """
        n = self.grid.n_points if n_points is None else n_points
        if p is not None:
            return DiracProblem.from_function(p, self.kappa, b_new, n, p_prime)
        grid = Grid(b_new, n)
        if b_new > self.grid.b * (1 + 1e-12):
            raise ValueError("cannot extend the potential beyond the sampled interval")
        pv = CubicSpline(self.r, self.p)(grid.r)
        dpv = CubicSpline(self.r, self.p_prime)(grid.r)
        return DiracProblem(grid, self.kappa, pv, dpv)


def load_potential_csv(path, kappa: float) -> DiracProblem:
    """Read ``r, p[, p']`` columns (one header row) into a problem."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] not in (2, 3):
        raise ValueError("potential CSV needs columns r, p and optionally p'")
    dp = data[:, 2] if data.shape[1] == 3 else None
    return DiracProblem.from_samples(data[:, 0], data[:, 1], kappa, dp)


@dataclass(frozen=True)
class DerivedPotentials:
    """``q1, q2`` and their primitives ``Q1, Q2``; ``P`` is the primitive of ``p``."""

    P: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    singular_at_origin: bool

    def Q(self, j: int) -> np.ndarray:
        return self.Q1 if j == 1 else self.Q2

    def q(self, j: int) -> np.ndarray:
        return self.q1 if j == 1 else self.q2


def _regular_at_origin(problem: DiracProblem) -> bool:
    scale = max(1.0, float(np.max(np.abs(problem.p))))
    return abs(problem.p[0]) <= 1e-13 * scale


def derive_potentials(problem: DiracProblem) -> DerivedPotentials:
    r, h, kappa = problem.r, problem.grid.h, problem.kappa
    p, dp = problem.p, problem.p_prime
    regular = _regular_at_origin(problem)
    p0 = p[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        p_over_r = p / r
        # (p - p(0)) / r stays bounded in either case.
        dp_over_r = (p - p0) / r
    dp_over_r[0] = dp[0]
    p_over_r[0] = dp[0] if regular else np.nan

    P = cumulative_integral(p, h)
    int_p2 = cumulative_integral(p * p, h)
    int_dpr = cumulative_integral(dp_over_r, h)
    if regular:
        int_por = int_dpr
    else:
        logger.warning("p(0) != 0: q1, q2 have a 1/r singularity at the origin")
        with np.errstate(divide="ignore"):
            int_por = p0 * np.log(r) + int_dpr
        int_por[0] = np.nan

    q1 = dp - 2.0 * kappa * p_over_r + p * p
    q2 = -dp - 2.0 * kappa * p_over_r + p * p
    Q1 = (p - p0) - 2.0 * kappa * int_por + int_p2
    Q2 = -(p - p0) - 2.0 * kappa * int_por + int_p2
    return DerivedPotentials(P=P, q1=q1, q2=q2, Q1=Q1, Q2=Q2, singular_at_origin=not regular)


@dataclass(frozen=True)
class Seed:
    """Normalized data of one seed ``u`` with ``u ~ r**a`` at the origin.

    ``U = u / r**a``, ``V = r**(1-a) u'`` and ``V_a_over_r = (V - a) / r``.
    ``Q`` is the primitive of the potential of the equation ``u`` solves.
    """

    j: int
    a: float
    U: np.ndarray
    V: np.ndarray
    V_a_over_r: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True)
class ParticularSolutions:
    """Regular zero-energy solutions ``f0 ~ r**kappa`` and ``g0 ~ r**(kappa+1)``."""

    kappa: float
    r: np.ndarray
    f0_scaled: np.ndarray  # f0 / r**kappa
    g0_scaled: np.ndarray  # g0 / r**(kappa+1)
    f0_v: np.ndarray  # r**(1-kappa) f0'
    g0_v: np.ndarray  # r**(-kappa) g0'
    f0_v_over_r: np.ndarray
    g0_v_over_r: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    g0_nonvanishing: bool
    shift_applied: float = 0.0
    g0_min_modulus: float = field(default=float("nan"))

    @property
    def f0(self) -> np.ndarray:
        return self.r ** self.kappa * self.f0_scaled

    @property
    def g0(self) -> np.ndarray:
        return self.r ** (self.kappa + 1) * self.g0_scaled

    @property
    def f0_prime(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.r ** (self.kappa - 1) * self.f0_v

    @property
    def g0_prime(self) -> np.ndarray:
        return self.r ** self.kappa * self.g0_v

    def seed(self, j: int) -> Seed:
        if j == 1:
            return Seed(1, self.kappa + 1.0, self.g0_scaled, self.g0_v, self.g0_v_over_r, self.Q1)
        if j == 2:
            return Seed(2, self.kappa, self.f0_scaled, self.f0_v, self.f0_v_over_r, self.Q2)
        raise ValueError("j must be 1 or 2")


def _min_modulus(U: np.ndarray, rdU: np.ndarray) -> float:
    # |U| against the local scale |U| + r|U'|: small only near an actual zero.
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.abs(U[1:]) / (np.abs(U[1:]) + np.abs(rdU[1:]))
    ratio = np.where(np.isfinite(ratio), ratio, 0.0)
    return float(np.min(ratio)) if ratio.size else 1.0


def _nonvanishing(U: np.ndarray, rdU: np.ndarray, tol: float = 1e-8) -> bool:
    if not np.all(np.isfinite(U)):
        return False
    if not np.iscomplexobj(U) or not np.any(U.imag != 0):
        if np.any(np.real(U[1:]) <= 0):
            return False
    return _min_modulus(U, rdU) > tol


def particular_solutions(problem: DiracProblem, dp: DerivedPotentials | None = None,
                         require_nonvanishing: bool = False) -> ParticularSolutions:
    """Build ``f0, g0`` from the closed forms and check that ``g0`` has no zero.

    ``f0 = r**kappa exp(-P)`` and
    ``g0 = (2 kappa + 1) r**(-kappa) exp(P) int_0^r t**(2 kappa) exp(-2 P) dt``.
    """
    if dp is None:
        dp = derive_potentials(problem)
    r, h, kappa, p = problem.r, problem.grid.h, problem.kappa, problem.p
    P = dp.P
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        E = np.exp(-P)
        # r**(-2 kappa - 1) int_0^r t**(2 kappa) exp(-2P) dt, weight handled exactly
        moment = cumulative_integral_power_weight(np.exp(-2.0 * P), h, 2.0 * kappa)
        M = (2.0 * kappa + 1.0) * np.exp(P) * moment / r ** (2.0 * kappa + 1.0)
        M[0] = 1.0
        # Where P is small, M - 1 cancels; there split exp(-2P) = 1 + expm1(-2P).
        moment_d = cumulative_integral_power_weight(np.expm1(-2.0 * P), h, 2.0 * kappa)
        D = (2.0 * kappa + 1.0) * moment_d / r ** (2.0 * kappa + 1.0)
        D[0] = 0.0
        M_minus_1 = np.where(np.abs(P) < 0.5, np.expm1(P) * (1.0 + D) + D, M - 1.0)
        M = np.where(np.abs(P) < 0.5, 1.0 + M_minus_1, M)
        f0_v = (kappa - r * p) * E
        g0_v = (r * p - kappa) * M + (2.0 * kappa + 1.0) * E
        f0_var = kappa * np.expm1(-P) / r - p * E
        g0_var = p * M + ((2.0 * kappa + 1.0) * np.expm1(-P) - kappa * M_minus_1) / r
    f0_var[0] = extrapolate_origin(f0_var)
    g0_var[0] = extrapolate_origin(g0_var)
    rdM = g0_v - (kappa + 1.0) * M
    ok = _nonvanishing(M, rdM)
    if not ok:
        logger.warning("g0 vanishes or degenerates on (0, b]; assumption (A) fails")
    if require_nonvanishing and not ok:
        raise AssumptionError("g0 vanishes on (0, b]")
    return ParticularSolutions(
        kappa=kappa, r=r, f0_scaled=E, g0_scaled=M, f0_v=f0_v, g0_v=g0_v,
        f0_v_over_r=f0_var, g0_v_over_r=g0_var, Q1=dp.Q1, Q2=dp.Q2,
        g0_nonvanishing=ok, shift_applied=0.0, g0_min_modulus=_min_modulus(M, rdM),
    )


def _shifted_g_seed(problem: DiracProblem, dp: DerivedPotentials, c: float):
    """Regular solution of ``-g'' + (kappa(kappa+1)/r**2 + q1 + c) g = 0`` as ``M = g / r**(kappa+1)``.

    ``M'' + 2 (kappa + 1) M' / r = (q1 + c) M`` is integrated from a small
    radius with its two-term Frobenius start.
    """
    r, kappa = problem.r, problem.kappa
    q = dp.q1 + c
    if dp.singular_at_origin:
        raise AssumptionError("spectral shift needs p(0) = 0")
    qs = CubicSpline(r, q)
    a2 = q[0] / (2.0 * (2.0 * kappa + 3.0))
    r0 = min(1e-6, 0.5 * problem.grid.h)

    def rhs(t, y):
        return [y[1], qs(t) * y[0] - 2.0 * (kappa + 1.0) * y[1] / t]

    y0 = np.array([1.0 + a2 * r0 ** 2, 2.0 * a2 * r0], dtype=complex)
    sol = solve_ivp(rhs, (r0, r[-1]), y0, method="DOP853", t_eval=r[1:],
                    rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise AssumptionError("shifted seed integration failed: %s" % sol.message)
    M = np.empty(r.size, dtype=complex)
    dM = np.empty(r.size, dtype=complex)
    M[0], dM[0] = 1.0, 0.0
    M[1:], dM[1:] = sol.y[0], sol.y[1]
    if not problem.is_complex:
        M, dM = M.real, dM.real
    return M, dM


def spectral_shift(problem: DiracProblem, dp: DerivedPotentials | None = None,
                   ps: ParticularSolutions | None = None,
                   ladder: tuple[float, ...] | None = None) -> ParticularSolutions:
    """Return seeds for which the g-equation seed does not vanish on (0, b].

    If ``g0`` from the closed form is fine the input is returned with shift 0.
    Otherwise constants ``c`` from a ladder ``1, -1, 2, -2, 4, ...`` are tried:
    the g-seed then solves the equation with ``q1 + c``, and callers must
    evaluate the g-series at ``omega**2 + c``.
    """
    if dp is None:
        dp = derive_potentials(problem)
    if ps is None:
        ps = particular_solutions(problem, dp)
    if ps.g0_nonvanishing:
        return ps
    if ladder is None:
        ladder = tuple(s * 2.0 ** k for k in range(0, 12) for s in (1.0, -1.0))
    r, kappa, p = problem.r, problem.kappa, problem.p
    for c in ladder:
        M, dM = _shifted_g_seed(problem, dp, c)
        if not _nonvanishing(M, r * dM):
            continue
        V = (kappa + 1.0) * M + r * dM
        with np.errstate(divide="ignore", invalid="ignore"):
            var = ((kappa + 1.0) * (M - 1.0)) / r + dM
        var[0] = extrapolate_origin(var)
        logger.info("assumption (A) restored with spectral shift c=%g", c)
        return ParticularSolutions(
            kappa=kappa, r=r, f0_scaled=ps.f0_scaled, g0_scaled=M, f0_v=ps.f0_v, g0_v=V,
            f0_v_over_r=ps.f0_v_over_r, g0_v_over_r=var, Q1=dp.Q1 + c * r, Q2=dp.Q2,
            g0_nonvanishing=True, shift_applied=c, g0_min_modulus=_min_modulus(M, r * dM),
        )
    raise AssumptionError("no spectral shift on the ladder gives a non-vanishing seed")


def leading_origin_limit(kappa: float, value_at_one: float) -> float:
    """Value at ``r = 0`` of ``C r**(kappa - 1)``: 0, ``C`` or ``inf``."""
    if kappa > 1:
        return 0.0
    if kappa == 1:
        return value_at_one
    return math.inf
