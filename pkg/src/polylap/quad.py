"""Principal-value and tail quadrature for the fractional Laplacian.

Two families of integrals appear:

* rays from an evaluation point x: near field |y - x| < delta in symmetrised
  second-difference form (Gauss-Jacobi with the r^(1-2s) weight), and a
  far field up to the sphere |y| = R by Gauss-Legendre panels in log r;
* shells around the origin 2 <= |y| <= R for the renormalised tail (psi
  terms, polynomial coefficients kappa_alpha, tail integrals nu_R).

No normalising constant is applied to the operator.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.special

from .errors import GrowthError, PreconditionError, QuadratureError
from .kernel import KernelParams, coefficient_table, gegenbauer_tail, psi_matrix
from .poly import Grid, MultivariatePolynomial, SampledFunction


@dataclass(frozen=True)
class QuadratureConfig:
    pv_split_radius: float = 0.25
    radial_nodes: int = 32
    angular_nodes: int = 64
    tail_truncation: float = 1.0e4
    analytic_tail: bool = True
    abs_tol: float = 1.0e-6
    threads: int | None = None

    def __post_init__(self):
        if self.pv_split_radius <= 0 or self.abs_tol <= 0:
            raise PreconditionError("pv_split_radius and abs_tol must be positive")
        if self.radial_nodes < 2 or self.angular_nodes < 2:
            raise PreconditionError("need at least two radial and angular nodes")

    def refined(self, factor: int = 2) -> "QuadratureConfig":
        return QuadratureConfig(
            self.pv_split_radius,
            self.radial_nodes * factor,
            self.angular_nodes,
            self.tail_truncation,
            self.analytic_tail,
            self.abs_tol,
            self.threads,
        )


def worker_count(cfg: QuadratureConfig) -> int:
    if cfg.threads:
        return max(1, int(cfg.threads))
    env = os.environ.get("POLYLAP_THREADS")
    return max(1, int(env)) if env and env.isdigit() else 1


def _map_chunks(func, xs: np.ndarray, cfg: QuadratureConfig, chunk: int):
    """Apply ``func`` to row-chunks of ``xs``; results concatenated in order."""
    pieces = [xs[i : i + chunk] for i in range(0, len(xs), chunk)] or [xs]
    workers = worker_count(cfg)
    if workers == 1 or len(pieces) == 1:
        out = [func(p) for p in pieces]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(func, pieces))
    return np.concatenate(out, axis=0)


# --- rules ------------------------------------------------------------------


@lru_cache(maxsize=None)
def sphere_rule(n: int, num: int):
    """Directions and weights on S^(n-1); weights sum to the sphere area."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        phi = 2 * np.pi * (np.arange(num) + 0.5) / num
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(num, 2 * np.pi / num)
    if n == 3:
        n_polar = max(2, num // 4)
        n_az = max(4, num // 2)
        ct, wt = np.polynomial.legendre.leggauss(n_polar)
        phi = 2 * np.pi * (np.arange(n_az) + 0.5) / n_az
        st = np.sqrt(1 - ct**2)
        dirs = np.stack(
            [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(ct, n_az)],
            axis=1,
        )
        return dirs, np.repeat(wt, n_az) * (2 * np.pi / n_az)
    raise PreconditionError("dimension must be 1, 2 or 3")


def sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


@lru_cache(maxsize=None)
def _gauss_legendre01(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1), 0.5 * w


@lru_cache(maxsize=None)
def _gauss_jacobi(q: int, beta: float):
    x, w = scipy.special.roots_jacobi(q, 0.0, beta)
    return x, w


def log_panel_nodes(a, b, q: int, panels: int | None = None):
    """Nodes/weights for int_a^b F(r) dr with Gauss-Legendre panels in log r.

    ``a`` and ``b`` broadcast together; the trailing axis of the result runs
    over nodes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0):
        raise PreconditionError("log panels need a > 0")
    L = np.log(np.maximum(b, a) / a)
    if panels is None:
        panels = max(1, int(math.ceil(float(np.max(L)) / math.log(2.0) - 1e-9)))
    t, w = _gauss_legendre01(q)
    tau = ((np.arange(panels)[:, None] + t[None, :]) / panels).ravel()
    wt = np.tile(w, panels) / panels
    r = a[..., None] * np.exp(tau * L[..., None])
    return r, wt * r * L[..., None]


def exit_distance(x: np.ndarray, dirs: np.ndarray, R: float) -> np.ndarray:
    """Distance from x along each direction to the sphere |y| = R; shape (X, D)."""
    xt = x @ dirs.T
    return -xt + np.sqrt(xt**2 + R**2 - np.sum(x * x, axis=1)[:, None])


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    x = np.atleast_2d(x.reshape(-1, n) if x.ndim <= 1 else x)
    return x, single


# --- ray integrals about x --------------------------------------------------


def _near_field(u, x, delta, params, cfg, dirs, wdir):
    """-1/2 int_{|z|<delta} (u(x+z)+u(x-z)-2u(x)) |z|^(-n-2s) dz, per point."""
    s = params.s
    xi, wj = _gauss_jacobi(cfg.radial_nodes, 1.0 - 2.0 * s)
    rr = delta[:, None] * (1 + xi[None, :]) / 2  # (X, q)
    ux = u(x)
    disp = rr[:, None, :, None] * dirs[None, :, None, :]  # (X, D, q, n)
    xp = x[:, None, None, :]
    second = u(xp + disp) + u(xp - disp) - 2 * ux[:, None, None]
    h = second / rr[:, None, :] ** 2
    inner = np.einsum("xdq,q->xd", h, wj) * (delta[:, None] / 2) ** (2 - 2 * s)
    return -0.5 * inner @ wdir


def _ray_far(u, x, a, b, params, cfg, dirs, wdir, symmetric=False):
    """int over rays r in [a, b] of (u(x) - u(x + r theta)) r^(-1-2s), summed over directions."""
    r, w = log_panel_nodes(a, b, cfg.radial_nodes)  # (X, D, m)
    xp = x[:, None, None, :]
    disp = r[..., None] * dirs[None, :, None, :]
    ux = u(x)[:, None, None]
    if symmetric:
        vals = -0.5 * (u(xp + disp) + u(xp - disp) - 2 * ux)
    else:
        vals = ux - u(xp + disp)
    integ = np.sum(vals * r ** (-1 - 2 * params.s) * w, axis=-1)
    return integ @ wdir


def _chunk_size(cfg, n, per_point):
    return max(1, int(2_000_000 // max(per_point, 1)))


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise QuadratureError(f"non-finite values in {what}")
    return arr


def pv_fraclap(u, x, params: KernelParams, cfg: QuadratureConfig = QuadratureConfig()):
    """PV int (u(x) - u(y)) / |x - y|^(n+2s) dy, without normalising constant.

    ``x`` is one point or an array ``(X, n)``. Requires growth order < 2s.
    """
    n, s = params.n, params.s
    g = u.growth_order
    if not g < 2 * s:
        raise GrowthError(f"growth order {g} not below 2s = {2 * s}: tail diverges")
    xs, single = _as_points(x, n)
    dirs, wdir = sphere_rule(n, cfg.angular_nodes)
    delta = cfg.pv_split_radius
    Rm = cfg.tail_truncation

    def work(xc):
        X = len(xc)
        d = np.full(X, delta)
        out = _near_field(u, xc, d, params, cfg, dirs, wdir)
        a = np.full((X, len(dirs)), delta)
        b = np.full((X, len(dirs)), Rm)
        out = out + _ray_far(u, xc, a, b, params, cfg, dirs, wdir, symmetric=True)
        if cfg.analytic_tail and not getattr(u, "is_polynomial", False):
            # power-law continuation of u(x +- r theta) beyond the truncation radius
            ux = u(xc)
            disp = Rm * dirs[None, :, :]
            far = u(xc[:, None, :] + disp) + u(xc[:, None, :] - disp)
            tail = far * Rm ** (-2 * s) / (2 * s - g) - 2 * ux[:, None] * Rm ** (-2 * s) / (2 * s)
            out = out - 0.5 * tail @ wdir
        return out

    per = len(dirs) * cfg.radial_nodes * (2 + int(math.log2(Rm / delta)))
    res = _check_finite(_map_chunks(work, xs, cfg, _chunk_size(cfg, n, per)), "pv_fraclap")
    return float(res[0]) if single else res


def cutoff_laplacian(u, R: float, x, params: KernelParams, cfg: QuadratureConfig = QuadratureConfig()):
    """(-Delta)^s (chi_R u)(x) by direct quadrature, split exactly at |y| = R."""
    n, s = params.n, params.s
    xs, single = _as_points(x, n)
    if np.any(np.linalg.norm(xs, axis=1) >= R):
        raise PreconditionError("evaluation points must lie inside B_R")
    dirs, wdir = sphere_rule(n, cfg.angular_nodes)

    def work(xc):
        rx = np.linalg.norm(xc, axis=1)
        d = np.minimum(cfg.pv_split_radius, 0.5 * (R - rx))
        out = _near_field(u, xc, d, params, cfg, dirs, wdir)
        b = exit_distance(xc, dirs, R)
        a = np.broadcast_to(d[:, None], b.shape)
        out = out + _ray_far(u, xc, a, b, params, cfg, dirs, wdir)
        return out + u(xc) * ((b ** (-2 * s) / (2 * s)) @ wdir)

    per = len(dirs) * cfg.radial_nodes * (2 + int(math.log2(R / 0.05)))
    res = _check_finite(_map_chunks(work, xs, cfg, _chunk_size(cfg, n, per)), "cutoff_laplacian")
    return float(res[0]) if single else res


def local_terms(u, xs: np.ndarray, params: KernelParams, cfg: QuadratureConfig):
    """(f1, f2) at the points: the B_2 principal value and u(x) times the B_2^c kernel mass."""
    n, s = params.n, params.s
    dirs, wdir = sphere_rule(n, cfg.angular_nodes)

    def work(xc):
        d = np.full(len(xc), cfg.pv_split_radius)
        b = exit_distance(xc, dirs, 2.0)
        f1 = _near_field(u, xc, d, params, cfg, dirs, wdir)
        f1 = f1 + _ray_far(u, xc, np.full(b.shape, cfg.pv_split_radius), b, params, cfg, dirs, wdir)
        f2 = u(xc) * ((b ** (-2 * s) / (2 * s)) @ wdir)
        return np.stack([f1, f2], axis=1)

    per = len(dirs) * cfg.radial_nodes * 6
    res = _check_finite(_map_chunks(work, xs, cfg, _chunk_size(cfg, n, per)), "local terms")
    return res[:, 0], res[:, 1]


def annulus_kernel_integral(u, xs, r_in: float, r_out: float, params, cfg):
    """int_{r_in < |y| < r_out} u(y) / |x - y|^(n+2s) dy for |x| < r_in, by rays from x."""
    n, s = params.n, params.s
    dirs, wdir = sphere_rule(n, cfg.angular_nodes)
    if r_out <= r_in:
        return np.zeros(len(xs))

    def work(xc):
        a = exit_distance(xc, dirs, r_in)
        b = exit_distance(xc, dirs, r_out)
        r, w = log_panel_nodes(a, b, cfg.radial_nodes)
        pts = xc[:, None, None, :] + r[..., None] * dirs[None, :, None, :]
        return np.sum(u(pts) * r ** (-1 - 2 * s) * w, axis=-1) @ wdir

    return _map_chunks(work, xs, cfg, 4096)


# --- origin-centred shells --------------------------------------------------


def shell_nodes(params: KernelParams, cfg: QuadratureConfig, r_in: float, r_out: float):
    """Points y and weights (including rho^(n-1)) covering r_in < |y| < r_out."""
    dirs, wdir = sphere_rule(params.n, cfg.angular_nodes)
    rho, wr = log_panel_nodes(np.array(r_in), np.array(r_out), cfg.radial_nodes)
    ys = (rho[None, :, None] * dirs[:, None, :]).reshape(-1, params.n)
    w = (wdir[:, None] * wr[None, :] * rho[None, :] ** (params.n - 1)).ravel()
    rr = np.tile(rho, len(dirs))
    ee = np.repeat(dirs, len(rho), axis=0)
    return ys, w, rr, ee


def breakpoints(start: float, radii) -> list:
    """Doubling breakpoints from ``start`` merged with the requested radii."""
    top = max(radii) if radii else start
    pts = {start}
    r = start
    while r * 2 < top * (1 - 1e-12):
        r *= 2
        pts.add(r)
    pts.update(float(R) for R in radii if R > start)
    return sorted(pts)


def _tail_completion(u, params, cfg, power: float, absolute: bool, weight_fn=None):
    """Power-law completion of int_{|y|>R_max} u(y) |y|^(-n-power) dy using the growth order."""
    g = u.growth_order
    if not g < power:
        raise GrowthError(f"growth order {g} not below {power}")
    dirs, wdir = sphere_rule(params.n, cfg.angular_nodes)
    Rm = cfg.tail_truncation
    vals = u(Rm * dirs)
    if absolute:
        vals = np.abs(vals)
    if weight_fn is not None:
        vals = vals * weight_fn(Rm * dirs)
    return float(vals @ wdir) * Rm ** (-power) / (power - g)


def tail_integral(u, k: int, r0: float, params: KernelParams, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """int_{|y| > r0} |u(y)| / |y|^(n+2s+k) dy (J_{u,k} for r0 = 1/2, nu_R for r0 = R)."""
    power = 2 * params.s + k
    if not u.growth_order < power:
        raise GrowthError(f"growth order {u.growth_order} not below 2s + k = {power}: tail diverges")
    if r0 <= 0:
        raise PreconditionError("r0 must be positive")
    total = 0.0
    Rm = cfg.tail_truncation
    if r0 < Rm:
        ys, w, rr, _ = shell_nodes(params, cfg, r0, Rm)
        total += float(np.sum(w * np.abs(u(ys)) * rr ** (-params.n - power)))
        total += _tail_completion(u, params, cfg, power, absolute=True) if cfg.analytic_tail else 0.0
    else:
        dirs, wdir = sphere_rule(params.n, cfg.angular_nodes)
        total = float(np.abs(u(r0 * dirs)) @ wdir) * r0 ** (-power) / (power - u.growth_order)
    return total


def weighted_integral(u, k: int, params: KernelParams, cfg: QuadratureConfig = QuadratureConfig(), phi=None, absolute=False) -> float:
    """int_{R^n} u(y) phi(y) / (1 + |y|^(n+2s+k)) dy over the whole space."""
    n = params.n
    p = n + 2 * params.s + k
    dirs, wdir = sphere_rule(n, cfg.angular_nodes)
    t, wt = _gauss_legendre01(cfg.radial_nodes)
    total = 0.0
    for lo, hi in ((0.0, 0.5),):
        rho = lo + (hi - lo) * t
        ys = (rho[None, :, None] * dirs[:, None, :]).reshape(-1, n)
        w = (wdir[:, None] * (wt * (hi - lo) * rho ** (n - 1))[None, :]).ravel()
        total += _weighted_sum(u, ys, w, p, phi, absolute)
    ys, w, _, _ = shell_nodes(params, cfg, 0.5, cfg.tail_truncation)
    total += _weighted_sum(u, ys, w, p, phi, absolute)
    if cfg.analytic_tail:
        total += _tail_completion(u, params, cfg, 2 * params.s + k, absolute, weight_fn=phi)
    return total


def _weighted_sum(u, ys, w, p, phi, absolute):
    vals = u(ys)
    if absolute:
        vals = np.abs(vals)
    if phi is not None:
        vals = vals * phi(ys)
    return float(np.sum(w * vals / (1 + np.linalg.norm(ys, axis=1) ** p)))


@dataclass
class ShellSums:
    """Per-shell contributions on 2 <= |y| <= R_last for the renormalised tail.

    ``fstar[i]`` is the psi-term over shell i sampled on the grid, ``kappa[i]``
    the polynomial coefficient contributions, ``nu[i]`` the |u|-weighted mass.
    """

    edges: list
    fstar: np.ndarray  # (shells, X)
    kappa: np.ndarray  # (shells, num_alpha)
    indices: tuple
    nu: np.ndarray  # (shells,)

    def cumulative_at(self, R: float):
        m = sum(1 for e in self.edges[1:] if e <= R * (1 + 1e-12))
        return self.fstar[:m].sum(axis=0), self.kappa[:m].sum(axis=0), float(self.nu[:m].sum())


def shell_sums(u, radii, xs: np.ndarray, params: KernelParams, cfg: QuadratureConfig) -> ShellSums:
    k, n, s = params.k, params.n, params.s
    edges = breakpoints(2.0, list(radii))
    X = len(xs)
    idx, _ = coefficient_table(params, np.zeros((0, n)))
    fstar = np.zeros((len(edges) - 1, X))
    kappa = np.zeros((len(edges) - 1, len(idx)))
    nu = np.zeros(len(edges) - 1)
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        ys, w, rr, ee = shell_nodes(params, cfg, lo, hi)
        uy = u(ys)
        base = w * uy * rr ** (-n - 2 * s - k)

        def work(xc, ys=ys, base=base):
            return psi_matrix(params, xc, ys) @ base

        fstar[i] = _map_chunks(work, xs, cfg, max(1, 4_000_000 // max(len(ys), 1)))
        if idx:
            _, table = coefficient_table(params, ee)
            orders = np.array([sum(a) for a in idx])
            kappa[i] = -(table * (w * uy)[None, :] * rr[None, :] ** (-n - 2 * s - orders[:, None])).sum(axis=1)
        nu[i] = float(np.sum(w * np.abs(uy) * rr ** (-n - 2 * s - k)))
    _check_finite(fstar, "psi tail")
    return ShellSums(edges, fstar, kappa, idx, nu)


def psi_tail(u, xs: np.ndarray, r0: float, params: KernelParams, cfg: QuadratureConfig = QuadratureConfig()):
    """int_{|y| > r0} u(y) psi(x, y) / |y|^(n+2s+k) dy for r0 >= 2, with power-law completion."""
    k, n, s = params.k, params.n, params.s
    power = 2 * s + k
    if not u.growth_order < power:
        raise GrowthError(f"growth order {u.growth_order} not below 2s + k = {power}")
    Rm = cfg.tail_truncation
    total = np.zeros(len(xs))
    for lo, hi in zip(breakpoints(r0, [Rm]), breakpoints(r0, [Rm])[1:]):
        ys, w, rr, _ = shell_nodes(params, cfg, lo, hi)
        base = w * u(ys) * rr ** (-n - power)

        def work(xc, ys=ys, base=base):
            return psi_matrix(params, xc, ys) @ base

        total += _map_chunks(work, xs, cfg, max(1, 4_000_000 // max(len(ys), 1)))
    if cfg.analytic_tail:
        # leading term of psi is -sum_{|alpha|=k} c_alpha x^alpha, continued as |y|^g
        dirs, wdir = sphere_rule(n, cfg.angular_nodes)
        rx = np.linalg.norm(xs, axis=1)
        xhat = xs / np.where(rx > 0, rx, 1.0)[:, None]
        lead = gegenbauer_tail(params.lam, xhat @ dirs.T, rx[:, None], k, k)  # C_k(t) |x|^k
        uR = u(Rm * dirs)
        total -= (lead * uR[None, :]) @ wdir * Rm ** (-power) / (power - u.growth_order)
    return _check_finite(total, "psi tail")


@dataclass
class Decomposition:
    f1: SampledFunction
    f2: SampledFunction
    fstar: SampledFunction
    P: MultivariatePolynomial

    def total(self) -> SampledFunction:
        return self.f1 + self.f2 + self.fstar + self.P.sample(self.f1.grid)


def decompose(u, R: float, params: KernelParams, grid: Grid, cfg: QuadratureConfig = QuadratureConfig()) -> Decomposition:
    """f1 + f2 + f_star + P = (-Delta)^s (chi_R u) on the grid, for R >= 2."""
    if R < 2:
        raise PreconditionError("decomposition needs R >= 2")
    xs = grid.points
    f1, f2 = local_terms(u, xs, params, cfg)
    sums = shell_sums(u, [R], xs, params, cfg)
    fstar, kappa, _ = sums.cumulative_at(R)
    P = MultivariatePolynomial.from_vector(kappa, sums.indices, params.n, params.k - 1)
    return Decomposition(
        SampledFunction(grid, f1), SampledFunction(grid, f2), SampledFunction(grid, fstar), P
    )
