"""Closed-form Dirac oscillator: spectrum, eigenfunctions and the map to the solver.

The radial components solve::

    -G' + (eps (j + 1/2) / r + m w r) G = (E - m) F
     F' + (eps (j + 1/2) / r + m w r) F = (E + m) G

with ``l = j + eps/2`` and ``w`` the oscillator frequency.  With
``kappa = j + 1/2`` and ``lam = E**2 - m**2`` this is the solver's system

    eps = -1:  f = F,  g = G,   p =  m w r,  omega1 = E + m,  omega2 = E - m
    eps = +1:  f = G,  g = -F,  p = -m w r,  omega1 = E - m,  omega2 = E + m

so ``f ~ r**kappa`` is always the component with the lower power at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evaluator import SpectralPoint
from .potential import DiracProblem
from .special_functions import laguerre

__all__ = [
    "OscillatorParams",
    "exact_eigenvalues",
    "exact_eigenfunction",
    "exact_regular_pair",
    "dirac_problem",
    "physical_split",
    "to_physical",
    "physical_residuals",
]


@dataclass(frozen=True)
class OscillatorParams:
    """Total angular momentum ``j`` (half-integer), ``epsilon = +-1``, mass, frequency."""

    j_total: float = 2.5
    epsilon: int = -1
    m: float = 1.0
    freq: float = 1.0

    def __post_init__(self):
        if self.epsilon not in (-1, 1):
            raise ValueError("epsilon must be +1 or -1")
        if not (self.j_total >= 0.5 and (self.j_total - 0.5).is_integer()):
            raise ValueError("j_total must be a half-integer >= 1/2")
        if not (self.m > 0 and self.freq > 0):
            raise ValueError("m and freq must be positive")

    @property
    def l(self) -> int:
        return int(round(self.j_total + 0.5 * self.epsilon))

    @property
    def kappa(self) -> float:
        """The solver's ``kappa = j + 1/2`` (the oscillator's ``|kappa_eff|``)."""
        return self.j_total + 0.5

    @property
    def kappa_eff(self) -> int:
        return int(round(self.epsilon * (self.j_total + 0.5)))

    @property
    def mw(self) -> float:
        return self.m * self.freq

    @property
    def gap(self) -> float:
        """Spacing ``4 m w`` of consecutive values of ``E**2 - m**2``."""
        return 4.0 * self.mw

    def potential(self, r):
        return -self.epsilon * self.mw * np.asarray(r, dtype=float)

    def potential_prime(self, r):
        return -self.epsilon * self.mw * np.ones_like(np.asarray(r, dtype=float))


def exact_eigenvalues(params: OscillatorParams, count: int, branch: str = "positive") -> np.ndarray:
    """``E**2 - m**2 = m w (2 (2n + l + 1) + eps (2j + 1))`` for ``n = 0 .. count-1``.

    The negative-energy branch has ``2n + l + 2`` in place of ``2n + l + 1``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if branch not in ("positive", "negative"):
        raise ValueError("branch must be 'positive' or 'negative'")
    shift = 1 if branch == "positive" else 2
    n = np.arange(count)
    big_n = 2 * n + params.l
    return params.mw * (2.0 * (big_n + shift) + params.epsilon * (2.0 * params.j_total + 1.0))


def _energy(params: OscillatorParams, n: int) -> float:
    lam = float(exact_eigenvalues(params, n + 1)[-1])
    return math.sqrt(lam + params.m ** 2)


def exact_eigenfunction(params: OscillatorParams, n: int, r) -> tuple[np.ndarray, np.ndarray]:
    """``(F, G)`` of the ``n``-th positive-energy state with ``A_F = 1``.

    ``F = (r sqrt(mw))**(l+1) exp(-mw r**2/2) L_n^{l+1/2}(mw r**2)`` and ``G``
    the matching small component; its amplitude follows from the system:
    ``A_G = -2 sqrt(mw) / (E + m)`` for ``eps = -1`` and
    ``A_G = (E - m) / (2 sqrt(mw))`` for ``eps = +1``.  For ``eps = -1, n = 0``
    the Laguerre index of ``G`` is ``-1`` and ``G`` vanishes identically.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    r = np.asarray(r, dtype=float)
    l, eps, mw = params.l, params.epsilon, params.mw
    x = r * math.sqrt(mw)
    env = np.exp(-0.5 * x * x)
    E = _energy(params, n)
    F = x ** (l + 1) * env * laguerre(n, l + 0.5, x * x)
    # Laguerre index n + eps/2 - 1/2 in integer arithmetic.
    k = n if eps == 1 else n - 1
    amp = -2.0 * math.sqrt(mw) / (E + params.m) if eps == -1 else (E - params.m) / (2.0 * math.sqrt(mw))
    G = amp * x ** (l + 1 - eps) * env * laguerre(k, l - eps + 0.5, x * x)
    return F, G


def physical_split(params: OscillatorParams, lam: float) -> SpectralPoint:
    """``(omega1, omega2)`` of the solver for ``E**2 - m**2 = lam`` (``E > 0``)."""
    E = math.sqrt(lam + params.m ** 2)
    if params.epsilon == -1:
        return SpectralPoint(E + params.m, E - params.m)
    return SpectralPoint(E - params.m, E + params.m)


def to_physical(params: OscillatorParams, f, g) -> tuple[np.ndarray, np.ndarray]:
    """``(F, G)`` from a solver pair evaluated at :func:`physical_split`."""
    f, g = np.asarray(f), np.asarray(g)
    if params.epsilon == -1:
        return f, g
    return -g, f


def exact_regular_pair(params: OscillatorParams, n: int, r, point: SpectralPoint | None = None,
                       normalization: str = "unit") -> tuple[np.ndarray, np.ndarray]:
    """Exact eigenpair in the solver's variables at the split ``point``.

    ``normalization="unit"`` scales ``f ~ r**kappa``; ``"regular"`` further
    multiplies by ``C_f = -(omega**(kappa+1) / omega2) d(kappa-1)``.  Under a
    change of split at fixed ``omega**2`` the component ``g`` scales with
    ``1 / omega1``.
    """
    from .evaluator import leading_coefficients

    lam = float(exact_eigenvalues(params, n + 1)[-1])
    phys = physical_split(params, lam)
    point = phys if point is None else point
    if abs(point.lam - lam) > 1e-12 * max(1.0, abs(lam)):
        raise ValueError("point does not lie at the eigenvalue E**2 - m**2 = %g" % lam)
    F, G = exact_eigenfunction(params, n, r)
    f, g = (F, G) if params.epsilon == -1 else (G, -F)
    # Leading coefficient of f: (sqrt(mw))**kappa * L(0) * A
    kappa, l, eps = params.kappa, params.l, params.epsilon
    if eps == -1:
        lead = math.sqrt(params.mw) ** kappa * float(laguerre(n, l + 0.5, 0.0))
    else:
        amp = (math.sqrt(lam + params.m ** 2) - params.m) / (2.0 * math.sqrt(params.mw))
        lead = amp * math.sqrt(params.mw) ** kappa * float(laguerre(n, l - eps + 0.5, 0.0))
    f = f / lead
    g = g / lead * (phys.omega1 / point.omega1)
    if normalization == "regular":
        cf, _ = leading_coefficients(kappa, point)
        f, g = cf * f, cf * g
    elif normalization != "unit":
        raise ValueError("normalization must be 'unit' or 'regular'")
    return f, g


def dirac_problem(params: OscillatorParams, b: float, n_points: int) -> DiracProblem:
    """The solver's problem on ``[0, b]`` with ``p = -eps m w r`` sampled exactly."""
    return DiracProblem.from_function(params.potential, params.kappa, b, n_points,
                                      params.potential_prime)


def physical_residuals(params: OscillatorParams, E: float, r, F, G, dF, dG) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of both physical equations; zero at ``r = 0`` by convention."""
    r = np.asarray(r, dtype=float)
    ke = params.kappa_eff
    with np.errstate(divide="ignore", invalid="ignore"):
        c = ke / r + params.mw * r
        r1 = -dG + c * G - (E - params.m) * F
        r2 = dF + c * F - (E + params.m) * G
    r1[r == 0] = 0.0
    r2[r == 0] = 0.0
    return r1, r2
