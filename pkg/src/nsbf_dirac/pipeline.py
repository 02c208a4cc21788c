"""End-to-end preparation: seeds, coefficient budget, choice of ``B`` and ``N``.

Steps:

1. particular solutions on ``[0, b]`` and the non-vanishing check (with the
   spectral-shift fallback);
2. ``budget_N`` beta coefficients of both families and the identity
   diagnostics, which fix the truncation radius ``B`` (where both identities
   hold) and the number of terms ``N``;
3. the coefficients actually used (beta and gamma, ``N`` terms) on the
   working interval: ``[0, B]`` with ``n_points`` nodes when truncating,
   otherwise the original grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .nsbf import (
    NsbfCoefficients,
    TruncationDiagnostics,
    compute_beta,
    compute_gamma,
    joint_truncation,
    select_truncation,
)
from .potential import DiracProblem, derive_potentials, particular_solutions, spectral_shift

logger = logging.getLogger(__name__)

__all__ = ["Prepared", "seeds_for", "prepare", "identity_holds"]

IDENTITY_FLOOR = 1e-12


@dataclass(frozen=True)
class Prepared:
    problem: DiracProblem
    diagnostics: TruncationDiagnostics
    family_diagnostics: dict
    threshold: float
    working: DiracProblem
    coeffs: NsbfCoefficients

    @property
    def N(self) -> int:
        return self.coeffs.N

    def identity_holds(self, j: int) -> bool:
        """Whether the identity of family ``j`` meets its target on ``[0, B]``."""
        return identity_holds(self.family_diagnostics[j], self.diagnostics.B, self.threshold)


def identity_holds(d: TruncationDiagnostics, B: float, threshold: float) -> bool:
    """``e < target`` (or ``e`` at the floor) on every node of ``(0, B]``."""
    inside = d.r <= B
    scale = d.target / threshold
    ok = (d.e < d.target) | (d.e <= IDENTITY_FLOOR * (1.0 + scale))
    return bool(np.all(ok[inside][1:]))


def seeds_for(problem: DiracProblem):
    dp = derive_potentials(problem)
    ps = particular_solutions(problem, dp)
    if not ps.g0_nonvanishing:
        ps = spectral_shift(problem, dp, ps)
    return ps


def prepare(problem: DiracProblem, budget_N: int = 100, threshold: float = 0.01,
            truncate: bool = True, n_points: int | None = None, N: int | None = None,
            p: Callable | None = None, p_prime: Callable | None = None) -> Prepared:
    """Run steps 1-3.  ``N`` overrides the selected number of terms.

    ``p``/``p_prime`` resample the potential exactly on ``[0, B]``; without
    them the samples are interpolated.
    """
    ps = seeds_for(problem)
    budget = compute_beta(ps, problem.grid, problem.p, budget_N)
    diag = joint_truncation(budget, threshold=threshold)
    fam_diag = {j: select_truncation(budget, None, j, threshold, B_cap=diag.B) for j in (1, 2)}
    del budget
    n_terms = max(1, diag.N_selected if N is None else N)
    if truncate:
        working = problem.restricted(diag.B, n_points or problem.grid.n_points, p, p_prime)
        wps = seeds_for(working)
    else:
        working, wps = problem, ps
    coeffs = compute_gamma(wps, working.grid, working.p, n_terms)
    logger.info("B=%g N=%d on %d nodes", working.grid.b, n_terms, working.grid.n_points)
    return Prepared(problem, diag, fam_diag, threshold, working, coeffs)
