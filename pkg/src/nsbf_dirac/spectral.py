"""Eigenvalues of the problem truncated to ``[0, B]`` with ``f(B) = 0``.

The scan parameter is ``lam = omega**2 = omega1 * omega2``.  The dispersion
function is ``Phi(lam) = f(B; lam) / C_f(lam)``, the regular ``f`` divided by
its leading coefficient at the origin.  Its zeros are the zeros of ``f(B)``,
it depends on ``lam`` only, is analytic in ``lam`` and stays defined for
``lam <= 0`` (where it equals ``f0(B)`` at ``lam = 0``).  A split of ``lam``
into ``omega1, omega2`` is only needed to build eigenfunctions.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .evaluator import SolutionSample, SpectralPoint, evaluate, unit_f_at
from .nsbf import NsbfCoefficients, _threads

logger = logging.getLogger(__name__)

__all__ = ["EigenProblem", "EigenResult", "dispersion", "dispersion_scan", "find_eigenvalues",
           "default_split"]

# Root tolerance: |d lam| <= XTOL * (1 + |lam|).
XTOL = 1e-13


def default_split(lam: float) -> SpectralPoint:
    """``omega1 = 1, omega2 = lam``; valid for every real ``lam``."""
    return SpectralPoint(1.0, float(lam))


@dataclass(frozen=True)
class EigenProblem:
    """Coefficients on ``[0, B]`` (``B`` is the last grid node) and the scan setup.

    ``split`` maps ``lam`` to the spectral point used for eigenfunctions.
    An eigenvalue is flagged low-confidence when dropping the last series
    term moves it by more than ``flag_tol * (1 + |lam|)``.
    """

    coeffs: NsbfCoefficients
    scan_range: tuple[float, float]
    scan_step: float
    split: Callable[[float], SpectralPoint] = default_split
    flag_tol: float = 1e-6

    def __post_init__(self):
        lo, hi = self.scan_range
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ValueError("scan_range must be a finite interval [lo, hi] with hi > lo")
        if not self.scan_step > 0:
            raise ValueError("scan_step must be positive")
        if self.coeffs.N < 1:
            raise ValueError("the error estimate needs at least two series terms (N >= 1)")

    @property
    def B(self) -> float:
        return float(self.coeffs.grid.b)


@dataclass(frozen=True)
class EigenResult:
    """One eigenvalue ``lam = omega**2`` of the truncated problem.

    ``error_estimate`` is the shift of the root when the series is cut one
    term earlier.  ``residual`` is the sup norm of both residuals of the
    eigenfunction over ``[0, B]`` divided by ``max(|f|, |g|)``; near ``B`` it
    is dominated by the rounding level of the growing solution, so it is a
    report, not a flag.  ``flags`` lists the reasons for low confidence.
    """

    eigen_parameter: float
    dispersion_residual: float
    error_estimate: float
    iterations: int
    bracket: tuple[float, float]
    residual: float = math.nan
    eigenfunction: SolutionSample | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def low_confidence(self) -> bool:
        return bool(self.flags)


def dispersion(ep: EigenProblem | NsbfCoefficients, lam: float) -> float:
    """``Phi(lam) = f(B) / C_f`` at ``omega**2 = lam``."""
    coeffs = ep.coeffs if isinstance(ep, EigenProblem) else ep
    return unit_f_at(coeffs, float(lam), index=-1)


def dispersion_scan(ep: EigenProblem) -> tuple[np.ndarray, np.ndarray]:
    """``Phi`` on the scan lattice (both endpoints included)."""
    lo, hi = ep.scan_range
    n = int(math.ceil((hi - lo) / ep.scan_step - 1e-9))
    lams = lo + ep.scan_step * np.arange(n + 1)
    lams[-1] = min(lams[-1], hi)
    vals = np.array([dispersion(ep, lam) for lam in lams])
    return lams, vals


def _root(coeffs: NsbfCoefficients, a: float, b: float, fa: float, fb: float) -> tuple[float, int]:
    if fa == 0.0:
        return a, 0
    if fb == 0.0:
        return b, 0
    xtol = XTOL * (1.0 + max(abs(a), abs(b)))
    root, info = brentq(lambda x: dispersion(coeffs, x), a, b, xtol=xtol,
                        rtol=4 * np.finfo(float).eps, maxiter=200, full_output=True, disp=False)
    if not info.converged:
        raise RuntimeError("root refinement did not converge")
    return float(root), int(info.iterations)


def _shifted_root(coeffs: NsbfCoefficients, lam: float, step: float, max_widen: int = 4) -> float:
    # Root of Phi for `coeffs` nearest to `lam`, searched in widening brackets.
    for k in range(max_widen):
        a, b = lam - step * 2.0 ** k, lam + step * 2.0 ** k
        fa, fb = dispersion(coeffs, a), dispersion(coeffs, b)
        if fa == 0.0 or fb == 0.0 or np.sign(fa) != np.sign(fb):
            return _root(coeffs, a, b, fa, fb)[0]
    return math.nan


def _result(ep: EigenProblem, lam: float, its: int, bracket, with_eigenfunction: bool) -> EigenResult:
    phi = dispersion(ep, lam)
    flags = []
    half = 0.5 * (bracket[1] - bracket[0])
    alt = _shifted_root(ep.coeffs.truncated(ep.coeffs.N - 1), lam, max(half, ep.scan_step / 4))
    est = abs(alt - lam) if np.isfinite(alt) else math.inf
    if not est <= ep.flag_tol * (1.0 + abs(lam)):
        flags.append("truncation")
    res = math.nan
    sample = None
    if with_eigenfunction:
        sample = evaluate(ep.coeffs, ep.split(lam), normalization="unit")
        amp = max(float(np.max(np.abs(sample.f))), float(np.max(np.abs(sample.g))))
        r1, r2 = sample.sup_residuals()
        res = max(r1, r2) / amp if amp > 0 else math.inf
    return EigenResult(eigen_parameter=lam, dispersion_residual=abs(phi), error_estimate=est,
                       iterations=its, bracket=bracket, residual=res, eigenfunction=sample,
                       flags=tuple(flags))


def find_eigenvalues(ep: EigenProblem, with_eigenfunctions: bool = True) -> list[EigenResult]:
    """Scan ``Phi`` over the lattice, bracket sign changes and refine each root.

    Roots are refined by Brent's method to ``|d lam| <= XTOL (1 + |lam|)``;
    brackets are processed concurrently and the results sorted ascending.
    Empty list when ``Phi`` has no sign change on the scan range.
    """
    lams, vals = dispersion_scan(ep)
    brackets = []
    for i in range(lams.size - 1):
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0 and i > 0:
            continue  # already the right end of the previous bracket
        if fa == 0.0 or fb == 0.0 or np.sign(fa) != np.sign(fb):
            brackets.append((float(lams[i]), float(lams[i + 1]), fa, fb))

    def work(item):
        a, b, fa, fb = item
        root, its = _root(ep.coeffs, a, b, fa, fb)
        return _result(ep, root, its, (a, b), with_eigenfunctions)

    if _threads() > 1 and len(brackets) > 1:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            out = list(pool.map(work, brackets))
    else:
        out = [work(b) for b in brackets]
    out.sort(key=lambda e: e.eigen_parameter)
    return out
