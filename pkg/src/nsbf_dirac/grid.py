"""Uniform grids on [0, b] and cumulative integration on them."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "GridMismatchError",
    "cumulative_integral",
    "cumulative_integral_power_weight",
    "pointwise_combine",
    "finite_difference",
    "extrapolate_origin",
]

# Number of interpolation nodes per cell in cumulative_integral (= its order).
QUADRATURE_ORDER = 8


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """``n_points`` equispaced nodes ``r_i = i * b / (n_points - 1)``."""

    b: float
    n_points: int

    def __post_init__(self):
        if not (self.b > 0 and np.isfinite(self.b)):
            raise ValueError("b must be positive and finite")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")

    @cached_property
    def r(self) -> np.ndarray:
        r = np.arange(self.n_points, dtype=float) * self.h
        r[-1] = self.b
        r.setflags(write=False)
        return r

    @property
    def h(self) -> float:
        return self.b / (self.n_points - 1)

    def index_at(self, r: float) -> int:
        return int(np.clip(round(r / self.h), 0, self.n_points - 1))


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(
                "expected %d values, got shape %s" % (self.grid.n_points, values.shape)
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def to_csv(self, path, header: Sequence[str] = ("r", "value")) -> None:
        write_columns(path, header, [self.grid.r, self.values])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        r = data[:, 0]
        grid = grid_from_samples(r)
        return cls(grid, data[:, 1])


def grid_from_samples(r: np.ndarray, rtol: float = 1e-9) -> Grid:
    """Recover the uniform grid from sample positions; rejects anything else."""
    r = np.asarray(r, dtype=float)
    if r.size < 2 or r[0] != 0.0:
        raise ValueError("samples must start at r=0 and have at least two points")
    grid = Grid(float(r[-1]), r.size)
    if np.max(np.abs(r - grid.r)) > rtol * grid.b:
        raise ValueError("samples are not uniformly spaced")
    return grid


def write_columns(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow(["%.17g" % v for v in row])


def _cumsum(a: np.ndarray) -> np.ndarray:
    # Two-level summation keeps the rounding growth at O(sqrt(n)) terms per level.
    n = a.size
    block = max(1, int(np.sqrt(n)))
    m = -(-n // block)
    pad = np.zeros(m * block, dtype=a.dtype)
    pad[:n] = a
    pad = pad.reshape(m, block)
    inner = np.cumsum(pad, axis=1)
    offs = np.concatenate([np.zeros(1, dtype=a.dtype), np.cumsum(inner[:, -1])[:-1]])
    return (inner + offs[:, None]).ravel()[:n]


def _lagrange_cell_weights(nodes: np.ndarray, cell: int) -> np.ndarray:
    # Integrals over [cell, cell+1] of the Lagrange basis on integer `nodes`.
    x, w = np.polynomial.legendre.leggauss(nodes.size)
    x = cell + 0.5 * (x + 1.0)
    return _lagrange_on_unit(nodes.astype(float), x) @ (0.5 * w)


@lru_cache(maxsize=None)
def _stencil_weights(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell weights of the degree ``k-1`` interpolant on ``k`` nodes.

    Returns the interior weights (nodes ``-k/2+1 .. k/2`` around the cell
    ``[0, 1]``) and a ``(k-1, k)`` table for the cells ``0 .. k-2`` of a
    one-sided stencil on nodes ``0 .. k-1``.
    """
    half = k // 2
    interior = _lagrange_cell_weights(np.arange(-half + 1, half + 1), 0)
    edge = np.array([_lagrange_cell_weights(np.arange(k), c) for c in range(k - 1)])
    return interior, edge


def _cell_integrals(f: np.ndarray, h: float, order: int | None = None) -> np.ndarray:
    n = f.size
    order = QUADRATURE_ORDER if order is None else order
    if n == 2:
        return 0.5 * h * (f[:1] + f[1:])
    if n == 3:
        # Quadratic interpolant on both cells.
        return h * np.array([
            (5 * f[0] + 8 * f[1] - f[2]) / 12.0,
            (-f[0] + 8 * f[1] + 5 * f[2]) / 12.0,
        ])
    k = min(order, n - (n % 2))
    k = max(4, k)
    interior, edge = _stencil_weights(k)
    half = k // 2
    cells = np.empty(n - 1, dtype=np.result_type(f, float))
    # Cells whose centred stencil fits: i = half-1 .. n-1-half.
    lo, hi = half - 1, n - half
    if hi > lo:
        acc = np.zeros(hi - lo, dtype=cells.dtype)
        for q in range(k):
            acc += interior[q] * f[q : q + hi - lo]
        cells[lo:hi] = acc
    head = edge @ f[:k]
    tail = (edge @ f[::-1][:k])
    cells[:lo] = head[:lo]
    # Mirror the one-sided table for the last cells.
    n_tail = (n - 1) - hi
    if n_tail > 0:
        cells[hi:] = tail[:n_tail][::-1]
    return h * cells


def cumulative_integral(f, h: float) -> np.ndarray:
    """Return ``F(r_i) = int_0^{r_i} f`` on a uniform grid of step ``h``.

    Each cell is integrated with the interpolating polynomial on the
    ``QUADRATURE_ORDER`` nearest nodes (one-sided near the ends), so the rule
    has that order and is exact for polynomials of lower degree; ``F[0] = 0``.
    """
    f = np.asarray(f)
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    if f.size < 2:
        return out
    out[1:] = _cumsum(_cell_integrals(f, h))
    return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _lagrange_on_unit(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    # Basis polynomials of the given (local) nodes evaluated at s.
    out = np.ones((nodes.size, s.size))
    for m in range(nodes.size):
        for k in range(nodes.size):
            if k != m:
                out[m] *= (s - nodes[k]) / (nodes[m] - nodes[k])
    return out


def cumulative_integral_power_weight(f, h: float, alpha: float) -> np.ndarray:
    """Return ``int_0^{r_i} t**alpha f(t) dt`` with ``f`` smooth.

    Near the origin the weight is integrated exactly against the same local
    interpolants of ``f`` that :func:`cumulative_integral` uses (product
    integration), so the result keeps full relative accuracy there, where
    plain rules applied to ``t**alpha f`` do not.  From cell ``16 alpha + 64``
    on, ``t**alpha`` is smooth on the stencil scale and the plain rule is used.
    """
    f = np.asarray(f)
    n = f.size
    if alpha <= -1:
        raise ValueError("alpha must exceed -1")
    r = h * np.arange(n)
    if n < 4:
        return cumulative_integral(r ** alpha * f, h)
    k = max(4, min(QUADRATURE_ORDER, n - (n % 2)))
    half = k // 2
    ncell = n - 1
    n_exact = int(min(ncell, 16 * max(alpha, 0.0) + 64))
    cells = np.zeros(ncell, dtype=np.result_type(f, float))
    if n_exact < ncell:
        with np.errstate(under="ignore"):
            cells[n_exact:] = _cell_integrals(r ** alpha * f, h)[n_exact:]
    c = np.arange(n_exact)
    # Stencil of cell c starts at node clip(c - half + 1, 0, n - k).
    start = np.clip(c - half + 1, 0, n - k)
    offset = c - start  # cell position inside its stencil
    nodes = np.arange(k, dtype=float)
    # int_cell t^alpha l_q(t) dt = h int_0^1 (h (c + x))^alpha l_q(offset + x) dx
    with np.errstate(under="ignore"):
        wpow = h * (h * (c[:, None] + _GL_X[None, :])) ** alpha * _GL_W[None, :]
    W = np.empty((n_exact, k))
    for off in np.unique(offset):
        sel = offset == off
        W[sel] = wpow[sel] @ _lagrange_on_unit(nodes, off + _GL_X).T
    # The first cell has an endpoint singularity in general: use exact moments.
    mom = h ** (alpha + 1.0) / (alpha + 1.0 + np.arange(k))
    W[0] = mom @ np.linalg.inv(np.vander(nodes, k, increasing=True))
    for q in range(k):
        cells[:n_exact] += W[:, q] * f[start + q]
    out = np.zeros(n, dtype=cells.dtype)
    out[1:] = _cumsum(cells)
    return out


def pointwise_combine(rule: Callable[..., np.ndarray], *fs: GridFunction, origin=None) -> GridFunction:
    """Apply ``rule`` elementwise to grid functions sharing one grid.

    ``r = 0`` is a removable-singularity slot: if the rule does not produce a
    finite value there, ``origin`` is used (or the value is extrapolated from
    the first interior nodes when ``origin`` is None).
    """
    if not fs:
        raise ValueError("need at least one grid function")
    grid = fs[0].grid
    for g in fs[1:]:
        if g.grid != grid:
            raise GridMismatchError("grid functions live on different grids")
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(rule(*[g.values for g in fs]), dtype=np.result_type(*[g.values for g in fs]))
    vals = np.array(vals, copy=True)
    if not np.isfinite(vals[0]):
        vals[0] = extrapolate_origin(vals) if origin is None else origin
    return GridFunction(grid, vals)


def extrapolate_origin(v: np.ndarray) -> complex | float:
    """Cubic extrapolation of ``v[1:5]`` to the node ``r = 0``."""
    return 4.0 * v[1] - 6.0 * v[2] + 4.0 * v[3] - v[4]


def finite_difference(f: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order finite-difference derivative on a uniform grid."""
    f = np.asarray(f)
    n = f.size
    if n < 7:
        return np.gradient(f, h, edge_order=2)
    d = np.empty_like(f, dtype=np.result_type(f, float))
    c = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
    d[3:-3] = sum(c[k] * f[k : n - 6 + k] for k in range(7)) / h
    # One-sided sixth-order stencils on the three end nodes.
    for i in range(3):
        d[i] = _one_sided(f[:7], i) / h
        d[n - 1 - i] = -_one_sided(f[::-1][:7], i) / h
    return d


def _one_sided(f7: np.ndarray, at: int) -> complex | float:
    nodes = np.arange(7.0)
    # Weights of the derivative of the degree-6 interpolant at node ``at``.
    w = np.zeros(7)
    for m in range(7):
        others = [k for k in range(7) if k != m]
        denom = np.prod([nodes[m] - nodes[k] for k in others])
        s = 0.0
        for k in others:
            s += np.prod([at - nodes[q] for q in others if q != k])
        w[m] = s / denom
    return w @ f7
