"""Polynomials of bounded degree, sampled functions and projections modulo polynomials."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import MismatchedGridError, PreconditionError


@lru_cache(maxsize=None)
def multi_indices(n: int, max_degree: int) -> tuple:
    """All multi-indices of length ``n`` and order <= ``max_degree``, graded order."""
    out = []
    for d in range(max_degree + 1):
        block = [a for a in itertools.product(range(d + 1), repeat=n) if sum(a) == d]
        out.extend(sorted(block, reverse=True))
    return tuple(out)


def monomials(points: np.ndarray, indices) -> np.ndarray:
    """Matrix of monomial values, shape ``(len(points), len(indices))``."""
    pts = np.asarray(points, dtype=float)
    cols = [np.prod(pts ** np.asarray(a, dtype=float), axis=-1) for a in indices]
    if not cols:
        return np.zeros(pts.shape[:-1] + (0,))
    return np.stack(cols, axis=-1)


def ball_moment(alpha) -> float:
    """Closed-form integral of x^alpha over the unit ball of R^n."""
    alpha = tuple(alpha)
    if any(a % 2 for a in alpha):
        return 0.0
    n = len(alpha)
    order = sum(alpha)
    betas = [(a + 1) / 2 for a in alpha]
    log_sphere = sum(math.lgamma(b) for b in betas) - math.lgamma(sum(betas))
    return 2.0 * math.exp(log_sphere) / (order + n)


def gram_matrix(n: int, degree: int):
    """Gram matrix of the monomials of order <= ``degree`` in L^2(B_1).

    Returns ``(G, indices)`` with ``G[i, j] = int_{B_1} x^(a_i + a_j) dx``.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    idx = multi_indices(n, degree)
    G = np.empty((len(idx), len(idx)))
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            G[i, j] = ball_moment(tuple(x + y for x, y in zip(a, b)))
    return G, idx


# --- grids and sampled functions --------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature points in a closed ball.

    ``index`` holds integer lattice coordinates when the grid is uniform with
    step ``spacing``; finite differences on sampled data rely on it.
    """

    points: np.ndarray
    weights: np.ndarray
    radius: float
    spacing: float | None = None
    index: np.ndarray | None = None
    _lookup: dict = field(default_factory=dict, repr=False)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def row_of(self, lattice) -> int | None:
        if self.index is None:
            return None
        if not self._lookup:
            self._lookup.update({tuple(int(v) for v in row): i for i, row in enumerate(self.index)})
        return self._lookup.get(tuple(int(v) for v in lattice))

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.points.shape == other.points.shape and np.array_equal(self.points, other.points)
        )


def _trapezoid_1d(num, radius):
    x = np.linspace(-radius, radius, num)
    h = x[1] - x[0]
    w = np.full(num, h)
    w[0] = w[-1] = h / 2
    return x, w, h


def ball_grid(n: int, radius: float = 0.9, num: int | None = None) -> Grid:
    """Uniform tensor grid restricted to the closed ball, trapezoid weights."""
    if num is None:
        num = {1: 41, 2: 21}.get(n, 11)
    x, w, h = _trapezoid_1d(num, radius)
    mesh = np.stack(np.meshgrid(*([x] * n), indexing="ij"), axis=-1).reshape(-1, n)
    wts = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
    lattice = np.stack(
        np.meshgrid(*([np.arange(num) - (num - 1) // 2] * n), indexing="ij"), axis=-1
    ).reshape(-1, n)
    keep = np.linalg.norm(mesh, axis=1) <= radius * (1 + 1e-12)
    return Grid(mesh[keep], wts[keep], radius, float(h), lattice[keep])


def gauss_ball_grid(n: int, radius: float = 1.0, num: int = 40) -> Grid:
    """Tensor Gauss-Legendre grid with ball indicator; exact moments when n = 1."""
    x, w = np.polynomial.legendre.leggauss(num)
    x, w = radius * x, radius * w
    mesh = np.stack(np.meshgrid(*([x] * n), indexing="ij"), axis=-1).reshape(-1, n)
    wts = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
    keep = np.linalg.norm(mesh, axis=1) <= radius
    return Grid(mesh[keep], wts[keep], radius)


def cell_centered_grid(n: int, radius: float = 1.0, num: int = 41) -> Grid:
    """Midpoints of the ``num - 1`` cells per axis, kept inside the open ball."""
    h = 2 * radius / (num - 1)
    x = -radius + h * (np.arange(num - 1) + 0.5)
    mesh = np.stack(np.meshgrid(*([x] * n), indexing="ij"), axis=-1).reshape(-1, n)
    lattice = np.stack(np.meshgrid(*([np.arange(num - 1)] * n), indexing="ij"), axis=-1).reshape(-1, n)
    keep = np.linalg.norm(mesh, axis=1) < radius
    return Grid(mesh[keep], np.full(int(keep.sum()), h**n), radius, float(h), lattice[keep])


def grid_from_points(points) -> Grid:
    """Rebuild a uniform grid (with cell-volume weights) from its points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    steps = [np.diff(np.unique(pts[:, i])) for i in range(n)]
    h = float(min(s.min() for s in steps if s.size)) if any(s.size for s in steps) else 1.0
    lattice = np.rint(pts / h).astype(int)
    radius = float(np.linalg.norm(pts, axis=1).max())
    return Grid(pts, np.full(len(pts), h**n), radius, h, lattice)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.grid),):
            raise ValueError("values must have one entry per grid point")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, f, grid: Grid) -> "SampledFunction":
        return cls(grid, f(grid.points))

    def _check(self, other):
        if not self.grid.same_as(other.grid):
            raise MismatchedGridError("sampled functions live on different grids")

    def __add__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values + other.values)
        return SampledFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values - other.values)
        return SampledFunction(self.grid, self.values - other)

    def __mul__(self, c):
        return SampledFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def inner(self, other) -> float:
        vals = other.values if isinstance(other, SampledFunction) else np.asarray(other)
        return float(np.dot(self.grid.weights, self.values * vals))

    def l2(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))


# --- polynomials ------------------------------------------------------------


@dataclass(frozen=True)
class MultivariatePolynomial:
    """Coefficient map over multi-indices; ``degree_bound == -1`` is the zero polynomial."""

    coeffs: dict
    degree_bound: int
    dimension: int

    def __post_init__(self):
        for a in self.coeffs:
            if len(a) != self.dimension or sum(a) > self.degree_bound:
                raise ValueError(f"multi-index {a} incompatible with degree bound {self.degree_bound}")

    @classmethod
    def zero(cls, dimension: int, degree_bound: int = -1):
        return cls({}, degree_bound, dimension)

    @classmethod
    def from_vector(cls, vec, indices, dimension, degree_bound):
        return cls({a: float(c) for a, c in zip(indices, vec)}, degree_bound, dimension)

    def vector(self, indices) -> np.ndarray:
        return np.array([self.coeffs.get(a, 0.0) for a in indices])

    @property
    def degree(self) -> int:
        nz = [sum(a) for a, c in self.coeffs.items() if c != 0.0]
        return max(nz) if nz else -1

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for a, c in self.coeffs.items():
            out = out + c * np.prod(pts ** np.asarray(a, dtype=float), axis=-1)
        return out

    def _combine(self, other, sign):
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        coeffs = dict(self.coeffs)
        for a, c in other.coeffs.items():
            coeffs[a] = coeffs.get(a, 0.0) + sign * c
        return MultivariatePolynomial(coeffs, max(self.degree_bound, other.degree_bound), self.dimension)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        return MultivariatePolynomial({a: c * v for a, v in self.coeffs.items()}, self.degree_bound, self.dimension)

    __rmul__ = __mul__

    def sample(self, grid: Grid) -> SampledFunction:
        return SampledFunction(grid, self(grid.points))


def _scaled_basis(grid: Grid, degree: int):
    idx = multi_indices(grid.dimension, degree)
    V = monomials(grid.points, idx)
    scale = np.sqrt(np.maximum(grid.weights @ V**2, 1e-300))
    return idx, V / scale, scale


def sharp_representative(g: SampledFunction, k: int):
    """Class member orthogonal to all polynomials of degree <= k - 1.

    Returns ``(g_sharp, P_sharp)`` where ``P_sharp`` minimises the discrete
    weighted L^2 norm of ``g + P`` over the grid and ``g_sharp = g + P_sharp``.
    """
    n = g.grid.dimension
    if k <= 0:
        return g, MultivariatePolynomial.zero(n, k - 1)
    idx, V, scale = _scaled_basis(g.grid, k - 1)
    W = g.grid.weights
    G = V.T @ (W[:, None] * V)
    rhs = V.T @ (W * g.values)
    try:
        factor = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise PreconditionError("singular Gram system; grid too coarse for degree") from exc
    coef = -scipy.linalg.cho_solve(factor, rhs)
    P = MultivariatePolynomial.from_vector(coef / scale, idx, n, k - 1)
    return SampledFunction(g.grid, g.values + V @ coef), P


def least_squares_polynomial(g: SampledFunction, degree: int):
    """Plain least-squares fit; returns ``(P, residual_sup)``."""
    n = g.grid.dimension
    if degree < 0:
        return MultivariatePolynomial.zero(n), g.sup()
    idx, V, scale = _scaled_basis(g.grid, degree)
    coef, *_ = np.linalg.lstsq(V, g.values, rcond=None)
    resid = g.values - V @ coef
    P = MultivariatePolynomial.from_vector(coef / scale, idx, n, degree)
    return P, float(np.max(np.abs(resid))) if len(resid) else 0.0


@dataclass
class PolynomialLimit:
    polynomial: MultivariatePolynomial
    converged: bool
    residual: float
    coefficient_gaps: list
    limit: MultivariatePolynomial

    @property
    def diverged(self) -> bool:
        return not self.converged


def fit_polynomial_limit(seq, degree: int, tol: float) -> PolynomialLimit:
    """Decide whether a sequence of sampled functions tends to a polynomial.

    The final element is fitted by least squares; the fit is accepted when its
    residual is within ``tol`` and the fitted coefficients of the last three
    elements form a Cauchy sequence (last gap within ``tol``, or contracting
    gaps). ``limit`` is the Aitken extrapolation of the coefficients.
    """
    seq = list(seq)
    if not seq:
        raise ValueError("empty sequence")
    grid = seq[0].grid
    for g in seq[1:]:
        if not g.grid.same_as(grid):
            raise MismatchedGridError("sequence elements live on different grids")
    tail = seq[-3:]
    fits = [least_squares_polynomial(g, degree) for g in tail]
    P, resid = fits[-1]
    idx = multi_indices(grid.dimension, max(degree, -1)) if degree >= 0 else ()
    vecs = [p.vector(idx) for p, _ in fits]
    gaps = [float(np.max(np.abs(b - a))) if len(idx) else 0.0 for a, b in zip(vecs, vecs[1:])]
    cauchy = not gaps or gaps[-1] <= tol or (len(gaps) == 2 and gaps[1] < gaps[0])
    limit = P
    if len(gaps) == 2 and 0 < gaps[1] < gaps[0] and gaps[-1] > tol:
        q = gaps[1] / gaps[0]
        vec = vecs[-1] + (vecs[-1] - vecs[-2]) * q / (1 - q)
        limit = MultivariatePolynomial.from_vector(vec, idx, grid.dimension, degree)
    return PolynomialLimit(P, bool(resid <= tol and cauchy), resid, gaps, limit)


def class_equal(a: SampledFunction, b: SampledFunction, k: int, tol: float) -> bool:
    """True iff ``a - b`` is a polynomial of degree <= k - 1 on the grid, within ``tol``."""
    return fit_polynomial_limit([a - b], k - 1, tol).converged


# --- CSV --------------------------------------------------------------------


def write_csv(path, f: SampledFunction, extra: dict | None = None):
    """Header ``x1..xn,value[,extra...]``; 17 significant digits."""
    n = f.grid.dimension
    extra = extra or {}
    header = [f"x{i + 1}" for i in range(n)] + ["value"] + list(extra)
    cols = [f.grid.points[:, i] for i in range(n)] + [f.values] + [np.asarray(v) for v in extra.values()]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow(["%.17g" % v for v in row])


def read_csv(path) -> SampledFunction:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    vcol = header.index("value")
    data = np.array([[float(v) for v in r] for r in body])
    return SampledFunction(grid_from_points(data[:, xcols]), data[:, vcol])
