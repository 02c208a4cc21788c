"""Evaluation of the truncated series for the regular solution.

For a seed of power ``a`` (``a = kappa`` for f, ``a = kappa + 1`` for g) the
series are assembled in the normalized form::

    S_a(r)  = [w r j_{a-1}(w r) + sum_n beta_n(r) j_{a+2n}(w r)] / w**a
    S_a'(r) = [w**2 r j_{a-2}(w r) + (r Q / 2 - a + 1) w j_{a-1}(w r)
               + sum_n gamma_n(r) j_{a+2n}(w r)] / w**a

which stays finite as ``w -> 0`` (it tends to ``d(a-1) u_a``) and, through
``j_nu(i y) = i**nu i_nu(y)``, has a real continuation to ``w**2 < 0``.
The regular solution is then::

    f = -(w**(kappa+1) / omega2) S_kappa,     g = w**(kappa+1) S_{kappa+1}

and the "unit" normalization divides both by the leading coefficient of f,
so that ``f ~ r**kappa`` at the origin for every ``w**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nsbf import NsbfCoefficients
from .potential import leading_origin_limit
from .special_functions import (
    BesselOrderSet,
    d_constant,
    modified_spherical_bessel_batch,
    spherical_bessel_batch,
)

__all__ = [
    "SpectralPoint",
    "SolutionSample",
    "evaluate",
    "g_via_f",
    "residuals",
    "unit_f_at",
    "leading_coefficients",
]

_CHUNK = 4096
_ZERO_LAMBDA = 1e-200


@dataclass(frozen=True)
class SpectralPoint:
    """Coupling constants ``omega1, omega2``; ``omega**2 = omega1 * omega2``."""

    omega1: float
    omega2: float

    @property
    def lam(self) -> float:
        return float(self.omega1 * self.omega2)

    @property
    def omega(self) -> float:
        if self.lam < 0:
            raise ValueError("omega**2 = %g < 0: imaginary omega has no regular normalization" % self.lam)
        return math.sqrt(self.lam)

    @classmethod
    def symmetric(cls, omega: float) -> "SpectralPoint":
        return cls(omega, omega)


@dataclass(frozen=True)
class SolutionSample:
    """Solution pair on the coefficient grid (or a subset of its nodes)."""

    r: np.ndarray
    f: np.ndarray
    g: np.ndarray
    f_prime: np.ndarray | None
    g_prime: np.ndarray | None
    residual1: np.ndarray | None
    residual2: np.ndarray | None
    point: SpectralPoint
    normalization: str
    indices: np.ndarray

    def sup_residuals(self, r_min: float = 0.0) -> tuple[float, float]:
        if self.residual1 is None:
            raise ValueError("residuals need the derivative series")
        keep = self.r >= r_min
        return float(np.max(np.abs(self.residual1[keep]))), float(np.max(np.abs(self.residual2[keep])))


def leading_coefficients(kappa: float, point: SpectralPoint) -> tuple[float, float]:
    """``(C_f, C_g)`` with ``f ~ C_f r**kappa`` and ``g ~ C_g r**(kappa+1)`` at the origin."""
    w = point.omega
    return (-(w ** (kappa + 1.0)) / point.omega2 * d_constant(kappa - 1.0),
            w ** (kappa + 1.0) * d_constant(kappa))


def _normalized_series(coeffs: NsbfCoefficients, j: int, lam: float, idx: np.ndarray,
                       derivative: bool) -> tuple[np.ndarray, np.ndarray | None]:
    fam = coeffs.family(j)
    a = fam.a
    r = coeffs.r[idx]
    beta = fam.beta[:, idx]
    gamma = None
    if derivative:
        gamma = coeffs.gamma(j)[:, idx]
    n_terms = beta.shape[0]
    Q = coeffs.Q(j)[idx]
    val = np.zeros(r.size, dtype=beta.dtype)
    der = np.zeros(r.size, dtype=beta.dtype) if derivative else None

    origin = r == 0.0
    pos = np.flatnonzero(~origin)
    if np.any(origin):
        # S_a ~ d(a-1) r**a for every omega.
        val[origin] = 0.0
        if derivative:
            der[origin] = leading_origin_limit(a, a * d_constant(a - 1.0))

    if abs(lam) < _ZERO_LAMBDA:
        seed = coeffs.seeds.seed(j) if coeffs.seeds is not None else None
        if seed is None:
            raise ValueError("omega = 0 needs the particular solutions")
        da = d_constant(a - 1.0)
        rp = r[pos]
        val[pos] = da * rp ** a * seed.U[idx][pos]
        if derivative:
            der[pos] = da * rp ** (a - 1.0) * seed.V[idx][pos]
        return val, der

    modified = lam < 0
    w = math.sqrt(abs(lam))
    base = a - 2.0
    orders = BesselOrderSet(base, 2 * n_terms + 1)
    batch = modified_spherical_bessel_batch if modified else spherical_bessel_batch
    sign = (-1.0) ** np.arange(n_terms) if modified else np.ones(n_terms)
    w2 = w * w  # +w**2 in both cases, see the module docstring
    wa = w ** a
    for start in range(0, pos.size, _CHUNK):
        sl = pos[start : start + _CHUNK]
        rr = r[sl]
        J = batch(orders, w * rr)
        series = J[2::2][:n_terms]  # orders a + 2n
        sv = w * rr * J[1] + np.einsum("n,nr,nr->r", sign, beta[:, sl], series)
        val[sl] = sv / wa
        if derivative:
            sd = (w2 * rr * J[0] + (0.5 * rr * Q[sl] - a + 1.0) * w * J[1]
                  + np.einsum("n,nr,nr->r", sign, gamma[:, sl], series))
            der[sl] = sd / wa
    return val, der


def unit_f_at(coeffs: NsbfCoefficients, lam: float, index: int = -1) -> float:
    """``f / C_f`` at one node for spectral parameter ``lam = omega**2`` (any sign).

    This equals ``f0`` at ``lam = 0`` and is analytic in ``lam``; its zeros
    in ``lam`` are the zeros of ``f(r_index)``.
    """
    idx = np.array([index % coeffs.grid.n_points])
    val, _ = _normalized_series(coeffs, 2, lam, idx, derivative=False)
    return float(np.real(val[0])) / d_constant(coeffs.kappa - 1.0)


def evaluate(coeffs: NsbfCoefficients, point: SpectralPoint, normalization: str = "regular",
             derivatives: bool = True, indices=None) -> SolutionSample:
    """Evaluate ``f, g`` (and ``f', g'`` plus residuals) on the coefficient grid.

    ``normalization="regular"``: the regular solution with the asymptotics
    ``f ~ -(w**(kappa+1)/omega2) d(kappa-1) r**kappa``,
    ``g ~ w**(kappa+1) d(kappa) r**(kappa+1)``.  Needs ``w**2 >= 0`` and
    ``omega2 != 0``.

    ``normalization="unit"``: the same pair divided by the leading
    coefficient of f; defined for any real ``w**2`` and for ``omega2 = 0``.
    """
    if normalization not in ("regular", "unit"):
        raise ValueError("normalization must be 'regular' or 'unit'")
    if derivatives and (coeffs.f_family.gamma is None or coeffs.g_family is None
                        or coeffs.g_family.gamma is None):
        raise ValueError("derivatives need gamma coefficients of both families")
    kappa = coeffs.kappa
    idx = np.arange(coeffs.grid.n_points) if indices is None else np.asarray(indices, dtype=int)
    r = coeffs.r[idx]
    lam = point.lam
    Sf, dSf = _normalized_series(coeffs, 2, lam, idx, derivatives)
    # A shifted g-family represents g / w~**(kappa+1) with w~**2 = w**2 + c,
    # which is also g / w**(kappa+1): the same normalized function.
    Sg, dSg = _normalized_series(coeffs, 1, lam + coeffs.shift, idx, derivatives)
    dk = d_constant(kappa - 1.0)
    if normalization == "regular":
        if point.omega2 == 0:
            raise ValueError("omega2 = 0: the regular normalization divides by omega2")
        wk = point.omega ** (kappa + 1.0)
        cf, cg = -wk / point.omega2, wk
    else:
        cf, cg = 1.0 / dk, -point.omega2 / dk
    f, g = cf * Sf, cg * Sg
    fp = gp = res1 = res2 = None
    if derivatives:
        fp, gp = cf * dSf, cg * dSg
        res1, res2 = _residuals(r, f, g, fp, gp, coeffs.p[idx], kappa, point)
    return SolutionSample(r=r, f=f, g=g, f_prime=fp, g_prime=gp, residual1=res1, residual2=res2,
                          point=point, normalization=normalization, indices=idx)


def _residuals(r, f, g, fp, gp, p, kappa, point):
    with np.errstate(divide="ignore", invalid="ignore"):
        res1 = fp - kappa * f / r + p * f - point.omega1 * g
        res2 = gp + kappa * g / r - p * g + point.omega2 * f
    # f' - kappa f / r and g' + kappa g / r both vanish at the origin.
    at0 = r == 0.0
    res1[at0] = 0.0
    res2[at0] = 0.0
    return res1, res2


def residuals(sample: SolutionSample, p: np.ndarray, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of both equations of the system for a sample with derivatives.

    ``p`` holds the potential at the sample nodes.
    """
    if sample.f_prime is None:
        raise ValueError("residuals need f' and g'")
    return _residuals(sample.r, sample.f, sample.g, sample.f_prime, sample.g_prime,
                      np.asarray(p), kappa, sample.point)


def g_via_f(sample: SolutionSample, p: np.ndarray, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Recover ``g, g'`` from ``f, f'`` through the first equation of the system.

    ``g = (f' - kappa f / r + p f) / omega1`` and ``g' = -omega2 f - kappa g / r + p g``;
    both vanish at the origin.
    """
    if sample.f_prime is None:
        raise ValueError("g_via_f needs f'")
    w1, w2 = sample.point.omega1, sample.point.omega2
    if w1 == 0:
        raise ValueError("omega1 = 0: g cannot be recovered from f")
    r, f, fp = sample.r, sample.f, sample.f_prime
    p = np.asarray(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (fp - kappa * f / r + p * f) / w1
        gp = -w2 * f - kappa * g / r + p * g
    at0 = r == 0.0
    g[at0] = 0.0
    gp[at0] = 0.0
    return g, gp
