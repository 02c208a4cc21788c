"""Spherical Bessel functions of real order, Gamma, Laguerre polynomials.

The spherical Bessel batch evaluates ``j_nu(x)`` for a run of orders
``nu0, nu0 + 1, ..., nu0 + count - 1`` at once.  Ratios
``j_nu / j_{nu-1}`` come from a backward continued fraction, which is stable
for every order; the run is then pinned to absolute values by two anchors at
the lowest orders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sps

__all__ = [
    "BesselEvaluationError",
    "BesselOrderSet",
    "spherical_bessel_batch",
    "modified_spherical_bessel_batch",
    "spherical_jn",
    "gamma",
    "d_constant",
    "laguerre",
]


class BesselEvaluationError(ArithmeticError):
    """Raised when a Bessel batch cannot be evaluated to a finite value."""


@dataclass(frozen=True)
class BesselOrderSet:
    """Orders ``base_order + k`` for ``k = 0 .. count - 1``."""

    base_order: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.base_order < -2.0:
            raise ValueError("orders below -2 are not supported")

    @classmethod
    def spanning(cls, base_order: float, max_order: float) -> "BesselOrderSet":
        span = max_order - base_order
        count = int(round(span))
        if count < 0 or abs(span - count) > 1e-9:
            raise ValueError("max_order - base_order must be a nonnegative integer")
        return cls(base_order, count + 1)

    @property
    def max_order(self) -> float:
        return self.base_order + self.count - 1

    @property
    def orders(self) -> np.ndarray:
        return self.base_order + np.arange(self.count)


def _anchor(nu, x):
    # j_nu(x) = sqrt(pi / 2x) J_{nu+1/2}(x)
    return np.sqrt(np.pi / (2.0 * x)) * sps.jv(nu + 0.5, x)


def _start_order(max_order: float, xmax: float) -> int:
    # Past the turning point j_nu decays like exp(-c t^{3/2}), t = (nu - x)/(x/2)^{1/3}.
    return int(math.ceil(max(max_order, xmax) + 30.0 + 20.0 * (0.5 * xmax) ** (1.0 / 3.0)))


def spherical_bessel_batch(orders: BesselOrderSet, x) -> np.ndarray:
    """Return ``j_nu(x)`` for all ``nu`` in ``orders``; shape ``(count, len(x))``.

    ``x`` must be real and nonnegative.  At ``x = 0`` the analytic limit is
    returned (1 for ``nu = 0``, 0 for ``nu > 0``); a negative order in the
    batch at ``x = 0`` raises ``ValueError``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        x = x.ravel()
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise ValueError("x must be finite and nonnegative")
    nu0 = float(orders.base_order)
    count = orders.count
    out = np.zeros((count, x.size))

    zero = x == 0.0
    if np.any(zero):
        if nu0 < 0.0:
            raise ValueError("j_nu(0) is infinite for negative order nu=%g" % nu0)
        for k in range(count):
            if nu0 + k == 0.0:
                out[k, zero] = 1.0

    pos = ~zero
    if not np.any(pos):
        return out
    xp = x[pos]

    # Anchor at a low order, where the library J_nu is accurate to a few ulps,
    # and carry the scale up through the ratio chain.
    shift = max(0, int(math.floor(nu0 + 0.5)))
    nua = nu0 - shift
    total = count + shift
    top = _start_order(nua + total - 1, float(xp.max()))
    n_steps = int(round(top - nua))
    # ratio[k - 1] = j_{nua+k} / j_{nua+k-1}, k = 1 .. total-1
    ratio = np.empty((max(total - 1, 1), xp.size))
    rho = np.zeros_like(xp)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        for k in range(n_steps, 0, -1):
            rho = 1.0 / ((2.0 * (nua + k) + 1.0) / xp - rho)
            if k < total:
                ratio[k - 1] = rho
        a0 = _anchor(nua, xp)
        a1 = _anchor(nua + 1.0, xp)
        # rho now holds j_{nua+1} / j_{nua}; lean on whichever anchor is larger.
        cur = np.where(np.abs(a0) >= np.abs(a1), a0, a1 / rho)
        vals = np.empty((count, xp.size))
        for k in range(total):
            if k > 0:
                cur = cur * ratio[k - 1]
            if k == 1:
                cur = np.where(np.abs(a1) > np.abs(a0), a1, cur)
            if k >= shift:
                vals[k - shift] = cur
    if not np.all(np.isfinite(vals)):
        raise BesselEvaluationError(
            "non-finite spherical Bessel value for orders %g..%g" % (nu0, orders.max_order)
        )
    out[:, pos] = vals
    return out


def modified_spherical_bessel_batch(orders: BesselOrderSet, x) -> np.ndarray:
    """Return ``i_nu(x) = sqrt(pi / 2x) I_{nu+1/2}(x)`` for all orders.

    ``j_nu(i y) = i**nu i_nu(y)``, so this batch continues the series in
    :mod:`nsbf_dirac.evaluator` to imaginary frequency.  The ratios
    ``i_nu / i_{nu-1}`` are positive and come from the backward continued
    fraction; one anchor at the lowest order fixes the scale.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise ValueError("x must be finite and nonnegative")
    nu0 = float(orders.base_order)
    count = orders.count
    out = np.zeros((count, x.size))
    zero = x == 0.0
    if np.any(zero):
        if nu0 < 0.0:
            raise ValueError("i_nu(0) is infinite for negative order nu=%g" % nu0)
        for k in range(count):
            if nu0 + k == 0.0:
                out[k, zero] = 1.0
    pos = ~zero
    if not np.any(pos):
        return out
    xp = x[pos]
    top = _start_order(nu0 + count - 1, float(xp.max()))
    n_steps = int(round(top - nu0))
    ratio = np.empty((max(count - 1, 1), xp.size))
    rho = np.zeros_like(xp)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        for k in range(n_steps, 0, -1):
            rho = 1.0 / ((2.0 * (nu0 + k) + 1.0) / xp + rho)
            if k < count:
                ratio[k - 1] = rho
        cur = np.sqrt(np.pi / (2.0 * xp)) * sps.ive(nu0 + 0.5, xp) * np.exp(xp)
        vals = np.empty((count, xp.size))
        vals[0] = cur
        for k in range(1, count):
            cur = cur * ratio[k - 1]
            vals[k] = cur
    if not np.all(np.isfinite(vals)):
        raise BesselEvaluationError(
            "non-finite modified spherical Bessel value for orders %g..%g" % (nu0, orders.max_order)
        )
    out[:, pos] = vals
    return out


def spherical_jn(nu: float, x) -> np.ndarray:
    """Single-order convenience wrapper around :func:`spherical_bessel_batch`."""
    return spherical_bessel_batch(BesselOrderSet(nu, 1), x)[0]


def gamma(x: float) -> float:
    """Gamma function for real ``x``; raises ``ValueError`` at the poles."""
    if x <= 0 and float(x).is_integer():
        raise ValueError("Gamma has a pole at x=%g" % x)
    return math.gamma(x)


def d_constant(kappa: float) -> float:
    """Small-argument constant ``sqrt(pi) / (2**(kappa+1) Gamma(kappa + 3/2))``.

    ``j_kappa(x) ~ d_constant(kappa) * x**kappa`` as ``x -> 0``.
    """
    if kappa + 1.5 <= 0:
        raise ValueError("d_constant requires kappa > -3/2")
    log_d = 0.5 * math.log(math.pi) - (kappa + 1.0) * math.log(2.0) - math.lgamma(kappa + 1.5)
    return math.exp(log_d)


def laguerre(n: int, s: float, x):
    """Associated Laguerre polynomial ``L_n^s(x)`` by the three-term recurrence.

    ``n = -1`` is accepted and returns the zero polynomial.
    """
    if n < -1 or int(n) != n:
        raise ValueError("n must be an integer >= -1")
    x = np.asarray(x, dtype=float)
    if n == -1:
        return np.zeros_like(x)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 + s - x) * cur - (k + s) * prev) / (k + 1)
    return cur
