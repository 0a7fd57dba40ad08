"""Finite differences and Hoelder seminorms on grids, plain and modulo polynomials."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import MismatchedGridError, OffGridError, PreconditionError, SolverError
from .poly import Grid, SampledFunction, cell_centered_grid, multi_indices, monomials

PAIR_BUDGET = 5000


@dataclass(frozen=True)
class FiniteDifferenceStencil:
    directions: tuple
    h: float

    def __post_init__(self):
        dirs = tuple(tuple(float(v) for v in np.ravel(w)) for w in self.directions)
        object.__setattr__(self, "directions", dirs)
        if not 0 < self.h < 1:
            raise PreconditionError("step must lie in (0, 1)")
        for w in dirs:
            if abs(math.hypot(*w) - 1) > 1e-12:
                raise PreconditionError("stencil directions must be unit vectors")

    @property
    def order(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class HolderOrder:
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0 or float(self.gamma).is_integer():
            raise PreconditionError("gamma must be positive and not an integer")

    @property
    def m(self) -> int:
        return int(math.floor(self.gamma))

    @property
    def theta(self) -> float:
        return self.gamma - self.m


def seminorm_grid(n: int, num: int = 41) -> Grid:
    """Cell midpoints of a ``num``-point lattice on [-1, 1]^n, kept inside the open unit ball."""
    return cell_centered_grid(n, 1.0, num)


# --- differences ------------------------------------------------------------


def _subset_shifts(stencil):
    d = stencil.order
    dirs = np.array(stencil.directions)
    for mask in itertools.product((0, 1), repeat=d):
        sign = (-1) ** (d - sum(mask))
        yield sign, stencil.h * (np.array(mask) @ dirs if d else 0.0), np.array(mask)


def finite_difference(f, stencil: FiniteDifferenceStencil, x) -> float:
    """D_h^(w1..wd) f(x): composition of the increments f(. + h w) - f(.)."""
    x = np.asarray(x, dtype=float)
    if isinstance(f, SampledFunction):
        grid = f.grid
        if grid.index is None or grid.spacing is None:
            raise OffGridError("sampled input needs a lattice grid")
        steps = np.array(stencil.directions) * stencil.h / grid.spacing
        if stencil.order and not np.allclose(steps, np.rint(steps), atol=1e-9):
            raise OffGridError("stencil shifts are not lattice moves")
        base = _lattice_of(grid, x)
        total = 0.0
        for sign, _, mask in _subset_shifts(stencil):
            move = (mask @ np.rint(steps).astype(int)) if stencil.order else 0
            row = grid.row_of(base + move)
            if row is None:
                raise OffGridError("shifted point leaves the grid")
            total += sign * f.values[row]
        return float(total)
    total = 0.0
    for sign, shift, _ in _subset_shifts(stencil):
        total += sign * float(f(x + shift))
    return total


def _lattice_of(grid, x):
    lat = np.rint(x / grid.spacing).astype(int)
    row = grid.row_of(lat)
    if row is None or not np.allclose(grid.points[row], x, atol=1e-9 * max(1.0, grid.spacing)):
        # grids whose lattice is offset from the origin
        d = np.linalg.norm(grid.points - x, axis=1)
        row = int(np.argmin(d))
        if d[row] > 1e-9:
            raise OffGridError("point is not on the grid")
        return grid.index[row]
    return grid.index[row]


def shift_values(f: SampledFunction, axis: int, steps: int) -> np.ndarray:
    """Values of f at x + steps * h e_axis, zero where the shift leaves the grid."""
    grid = f.grid
    if grid.index is None:
        raise OffGridError("shifts need a lattice grid")
    out = np.zeros(len(grid))
    move = np.zeros(grid.dimension, dtype=int)
    move[axis] = steps
    for i, lat in enumerate(grid.index):
        row = grid.row_of(lat + move)
        if row is not None:
            out[i] = f.values[row]
    return out


def discrete_integration_by_parts(f: SampledFunction, g: SampledFunction, axis: int = 0):
    """Return (sum D_h f * g, sum f * D_h^- g) for a forward step along ``axis``.

    Values off the grid are taken as zero, so the two sums agree exactly when
    f vanishes on the grid boundary layer.
    """
    if not f.grid.same_as(g.grid):
        raise MismatchedGridError("f and g must share a grid")
    df = shift_values(f, axis, 1) - f.values
    dg = shift_values(g, axis, -1) - g.values
    return float(np.sum(df * g.values)), float(np.sum(f.values * dg))


# --- derivative tables ------------------------------------------------------


def _derivative_table(f, m: int, grid: Grid):
    """Rows: multi-indices of order m; returns (indices, values[len(idx), len(grid)], mask)."""
    idx = [a for a in multi_indices(grid.dimension, m) if sum(a) == m]
    if isinstance(f, SampledFunction):
        if not f.grid.same_as(grid):
            raise MismatchedGridError("sampled function lives on another grid")
        vals, mask = [], np.ones(len(grid), dtype=bool)
        h = grid.spacing
        for a in idx:
            cur = f.values.copy()
            ok = np.ones(len(grid), dtype=bool)
            for axis, times in enumerate(a):
                for _ in range(times):
                    shifted, present = _shift_with_mask(SampledFunction(grid, cur), axis, 1)
                    valid_there, _ = _shift_with_mask(SampledFunction(grid, ok.astype(float)), axis, 1)
                    ok &= present & (valid_there > 0.5)
                    cur = shifted - cur
            vals.append(cur / h**m)
            mask &= ok
        return idx, np.array(vals), mask
    if m == 0:
        return idx, f(grid.points)[None, :], np.ones(len(grid), dtype=bool)
    return idx, np.array([f.derivative(a)(grid.points) for a in idx]), np.ones(len(grid), dtype=bool)


def _shift_with_mask(f, axis, steps):
    grid = f.grid
    out = np.zeros(len(grid))
    present = np.zeros(len(grid), dtype=bool)
    move = np.zeros(grid.dimension, dtype=int)
    move[axis] = steps
    for i, lat in enumerate(grid.index):
        row = grid.row_of(lat + move)
        if row is not None:
            out[i] = f.values[row]
            present[i] = True
    return out, present


def _all_pairs(count):
    i, j = np.triu_indices(count, k=1)
    return i, j


def _pair_max(vals, pts, theta, chunk=200_000):
    i, j = _all_pairs(len(pts))
    best = 0.0
    for start in range(0, len(i), chunk):
        a, b = i[start : start + chunk], j[start : start + chunk]
        dist = np.linalg.norm(pts[a] - pts[b], axis=1) ** theta
        diff = np.abs(vals[:, a] - vals[:, b]).max(axis=0)
        best = max(best, float(np.max(diff / dist)))
    return best


def holder_seminorm(f, order: HolderOrder, grid: Grid) -> float:
    """Grid lower bound of [f]_{C^gamma}: max over pairs and order-m partials."""
    if len(grid) < 2:
        raise PreconditionError("grid needs at least two points")
    _, vals, mask = _derivative_table(f, order.m, grid)
    return _pair_max(vals[:, mask], grid.points[mask], order.theta)


def holder_norm(f, order: HolderOrder, grid: Grid) -> float:
    """sum_{j <= m} max |D^j f| plus the top seminorm, on the grid."""
    total = 0.0
    for j in range(order.m + 1):
        _, vals, mask = _derivative_table(f, j, grid)
        total += float(np.abs(vals[:, mask]).max())
    return total + holder_seminorm(f, order, grid)


# --- minimax over polynomials ------------------------------------------------


def _poly_derivative_table(grid, idx_alpha, basis):
    """D^alpha x^beta on the grid for alpha in idx_alpha, beta in basis: (alpha, beta, points)."""
    pts = grid.points
    out = np.zeros((len(idx_alpha), len(basis), len(pts)))
    for ia, a in enumerate(idx_alpha):
        for ib, b in enumerate(basis):
            if any(bi < ai for ai, bi in zip(a, b)):
                continue
            coef = 1.0
            powers = []
            for ai, bi in zip(a, b):
                coef *= math.factorial(bi) / math.factorial(bi - ai)
                powers.append(bi - ai)
            out[ia, ib] = coef * monomials(pts, [tuple(powers)])[:, 0]
    return out


def _pair_rows(fvals, pvals, pts, theta, pairs):
    """Constraint rows (per pair and partial): target and basis-coefficient matrix."""
    a, b = pairs
    w = np.linalg.norm(pts[a] - pts[b], axis=1) ** (-theta)
    target = ((fvals[:, a] - fvals[:, b]) * w).reshape(-1)
    A = ((pvals[:, :, a] - pvals[:, :, b]) * w).transpose(0, 2, 1).reshape(-1, pvals.shape[1])
    return target, A


def _solve_minimax(target, A, extra=None):
    """min t subject to |target - A c| <= t (plus optional sup-norm block)."""
    nb = A.shape[1]
    rows = [np.hstack([-A, -np.ones((len(A), 1))]), np.hstack([A, -np.ones((len(A), 1))])]
    rhs = [-target, target]
    res = linprog(
        np.r_[np.zeros(nb), 1.0],
        A_ub=np.vstack(rows),
        b_ub=np.concatenate(rhs),
        bounds=[(None, None)] * nb + [(0, None)],
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise SolverError(f"linear program failed: {res.message}")
    return res.x[:nb]


def _thin_pairs(count, budget, rng):
    i, j = _all_pairs(count)
    if len(i) <= budget:
        return i, j
    pick = np.sort(rng.choice(len(i), size=budget, replace=False))
    return i[pick], j[pick]


def holder_seminorm_mod_poly(f, order: HolderOrder, k: int, grid: Grid, max_rounds: int = 20) -> float:
    """inf over P of degree <= k - 1 of the grid seminorm of f - P.

    For gamma > k - 1 the polynomials are annihilated and the plain seminorm
    is returned. Otherwise a minimax linear program over the coefficients is
    solved by constraint exchange on the pair set.
    """
    if order.gamma > k - 1:
        return holder_seminorm(f, order, grid)
    value, _ = _mod_poly_solve(f, order, k, grid, max_rounds)
    return value


def _mod_poly_solve(f, order, k, grid, max_rounds=20):
    m, theta = order.m, order.theta
    idx_alpha, fvals, mask = _derivative_table(f, m, grid)
    basis = [b for b in multi_indices(grid.dimension, k - 1) if sum(b) > m]
    pts = grid.points[mask]
    fvals = fvals[:, mask]
    sub = Grid(pts, np.ones(len(pts)), grid.radius)
    pvals = _poly_derivative_table(sub, idx_alpha, basis)
    rng = np.random.default_rng(0)
    pairs = _thin_pairs(len(pts), PAIR_BUDGET, rng)
    best_val, best_c = math.inf, np.zeros(len(basis))
    for _ in range(max_rounds):
        target, A = _pair_rows(fvals, pvals, pts, theta, pairs)
        c = _solve_minimax(target, A)
        resid = fvals - np.einsum("abp,b->ap", pvals, c)
        full = _pair_max(resid, pts, theta)
        lp_val = float(np.max(np.abs(target - A @ c))) if len(target) else 0.0
        if full < best_val:
            best_val, best_c = full, c
        if full <= lp_val * (1 + 1e-9) + 1e-12:
            return best_val, best_c
        pairs = _add_violators(resid, pts, theta, pairs, lp_val)
    raise SolverError("constraint exchange did not converge", best=best_val)


def _add_violators(resid, pts, theta, pairs, level, limit=2000):
    i, j = _all_pairs(len(pts))
    dist = np.linalg.norm(pts[i] - pts[j], axis=1) ** theta
    ratio = np.abs(resid[:, i] - resid[:, j]).max(axis=0) / dist
    bad = np.nonzero(ratio > level)[0]
    bad = bad[np.argsort(-ratio[bad])][:limit]
    have = set(zip(pairs[0].tolist(), pairs[1].tolist()))
    new = [(int(i[b]), int(j[b])) for b in bad if (int(i[b]), int(j[b])) not in have]
    if not new:
        return pairs
    a, b = zip(*new)
    return np.concatenate([pairs[0], a]), np.concatenate([pairs[1], b])


def reabsorbed_norm(f, order: HolderOrder, k: int, grid: Grid) -> float:
    """inf over P of degree <= k - 1 of (sup |f - P| + [f - P]_{C^gamma}) on the grid."""
    m, theta = order.m, order.theta
    idx_alpha, fvals, mask = _derivative_table(f, m, grid)
    _, f0, _ = _derivative_table(f, 0, grid)
    basis = list(multi_indices(grid.dimension, k - 1)) if k >= 1 else []
    pts = grid.points[mask]
    sub = Grid(pts, np.ones(len(pts)), grid.radius)
    pvals = _poly_derivative_table(sub, idx_alpha, basis)
    p0 = monomials(grid.points, basis) if basis else np.zeros((len(grid), 0))
    fvals = fvals[:, mask]
    pairs = _thin_pairs(len(pts), PAIR_BUDGET, np.random.default_rng(0))
    target, A = _pair_rows(fvals, pvals, pts, theta, pairs)
    nb = len(basis)
    sup_t = f0[0]
    # variables: c (nb), t_sup, t_semi
    rows = [
        np.hstack([-A, np.zeros((len(A), 1)), -np.ones((len(A), 1))]),
        np.hstack([A, np.zeros((len(A), 1)), -np.ones((len(A), 1))]),
        np.hstack([-p0, -np.ones((len(p0), 1)), np.zeros((len(p0), 1))]),
        np.hstack([p0, -np.ones((len(p0), 1)), np.zeros((len(p0), 1))]),
    ]
    res = linprog(
        np.r_[np.zeros(nb), 1.0, 1.0],
        A_ub=np.vstack(rows),
        b_ub=np.concatenate([-target, target, -sup_t, sup_t]),
        bounds=[(None, None)] * nb + [(0, None), (0, None)],
        method="highs",
    )
    if res.status != 0:
        raise SolverError(f"linear program failed: {res.message}")
    c = res.x[:nb]
    resid = fvals - np.einsum("abp,b->ap", pvals, c) if nb else fvals
    return float(np.max(np.abs(sup_t - p0 @ c))) + _pair_max(resid, pts, theta)


def reabsorption_ratio(f, order: HolderOrder, k: int, grid: Grid) -> float:
    """reabsorbed_norm / [f]_{C^gamma(;k)}; bounded by a family-wide constant."""
    semi = holder_seminorm_mod_poly(f, order, k, grid)
    full = reabsorbed_norm(f, order, k, grid)
    return math.inf if semi == 0 else full / semi
