"""Renormalised fractional Laplacian of functions with polynomial growth.

For a cutoff radius R the operator applied to chi_R u splits into a part f_R
that converges as R grows and a polynomial P_R of degree <= k - 1 that may
diverge. The limit of f_R, taken modulo polynomials of degree <= k - 1, is the
result; it is stored through its sharp representative (weighted-L^2
orthogonal to those polynomials on the evaluation grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GrowthError, PreconditionError
from .kernel import K_MAX, KernelParams
from .poly import (
    Grid,
    MultivariatePolynomial,
    SampledFunction,
    ball_grid,
    class_equal,
    sharp_representative,
)
from .quad import (
    QuadratureConfig,
    annulus_kernel_integral,
    local_terms,
    psi_tail,
    shell_sums,
    sphere_rule,
    tail_integral,
)

DEFAULT_SCHEDULE = (8.0, 16.0, 32.0, 64.0, 128.0)


def class_tolerance(cfg: QuadratureConfig) -> float:
    return max(1e-4, 50 * cfg.abs_tol)


def d_of_ks(k: int, s: float) -> int:
    """Largest polynomial degree annihilated at order k."""
    if not 0 < s < 1:
        raise PreconditionError("s must lie in (0, 1)")
    return k + 1 if s > 0.5 else k


def minimal_k(growth_order: float, s: float) -> int:
    """Smallest k with growth_order < 2s + k."""
    k = max(0, math.floor(growth_order - 2 * s) + 1)
    if k > K_MAX:
        raise GrowthError(f"growth order {growth_order} needs k = {k} > {K_MAX}")
    return k


def check_growth(u, params: KernelParams):
    if not u.growth_order < 2 * params.s + params.k:
        raise GrowthError(
            f"growth order {u.growth_order} not below 2s + k = {2 * params.s + params.k}: tail integral diverges"
        )


@dataclass
class SequenceEntry:
    R: float
    f_R: SampledFunction
    P_R: MultivariatePolynomial
    f_R_sharp: SampledFunction
    nu_R: float


@dataclass
class RenormalizedSequence:
    params: KernelParams
    schedule: tuple
    entries: list = field(default_factory=list)

    @property
    def sharps(self):
        return [e.f_R_sharp for e in self.entries]


@dataclass
class PolyModClass:
    representative: SampledFunction
    modulus_degree: int
    converged: bool = True
    rate: float | None = None

    @property
    def k(self) -> int:
        return self.modulus_degree + 1

    def equals(self, other, tol: float = 1e-4) -> bool:
        rep = other.representative if isinstance(other, PolyModClass) else other
        return class_equal(self.representative, rep, self.k, tol)

    def is_zero(self, tol: float = 1e-4) -> bool:
        return self.representative.sup() <= tol

    def at_modulus(self, degree: int) -> "PolyModClass":
        """Same function viewed modulo a larger polynomial space."""
        if degree < self.modulus_degree:
            raise PreconditionError("can only coarsen the class")
        sharp, _ = sharp_representative(self.representative, degree + 1)
        return PolyModClass(sharp, degree, self.converged, self.rate)


def extrapolate(sharps, noise: float, radii=None, exponent: float | None = None):
    """One Richardson step on the last three sharp representatives.

    The observed rate q is the ratio of the last two sup-norm differences.
    With ``radii`` the differences are modelled as A R^(-p); p is read off q
    and replaced by ``exponent`` (the tail exponent implied by the declared
    growth) when the two agree within 10%. Returns ``(limit, q)``; no step is
    taken when the last difference is at noise level or q is not in (0, 1).
    """
    last = sharps[-1]
    if len(sharps) < 3:
        return last, None
    a, b, c = sharps[-3:]
    d1 = (b - a).sup()
    d2 = (c - b).sup()
    if d2 <= noise or d1 <= 0:
        return last, (d2 / d1 if d1 > 0 else 0.0)
    q = d2 / d1
    if not 0 < q < 1:
        return last, q
    if radii is None:
        return last + (c - b) * (q / (1 - q)), q
    Ra, Rb, Rc = radii[-3:]
    p = _solve_exponent(q, Ra, Rb, Rc)
    if exponent is not None and exponent > 0 and abs(p - exponent) <= 0.1 * exponent:
        p = exponent
    factor = Rc ** (-p) / (Rb ** (-p) - Rc ** (-p))
    return last + (c - b) * factor, q


def _solve_exponent(q, Ra, Rb, Rc):
    """p with (Rb^-p - Rc^-p) / (Ra^-p - Rb^-p) = q, by bisection."""

    def ratio(p):
        return (Rb ** (-p) - Rc ** (-p)) / (Ra ** (-p) - Rb ** (-p))

    lo, hi = 1e-6, 60.0
    if not ratio(hi) < q < ratio(lo):
        return -math.log(q) / math.log(Rc / Rb)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ratio(mid) > q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def resolve_params(u, k, params: KernelParams) -> KernelParams:
    if k is None:
        return params
    if k == "auto":
        return params.with_k(minimal_k(u.growth_order, params.s))
    return params.with_k(int(k))


def divergent_laplacian(
    u,
    k="auto",
    schedule=DEFAULT_SCHEDULE,
    params: KernelParams | None = None,
    cfg: QuadratureConfig = QuadratureConfig(),
    grid: Grid | None = None,
    enforce_growth: bool = True,
):
    """Run the renormalised sequence and return ``(sequence, class)``.

    ``k`` is an integer, ``"auto"`` (smallest admissible order), or None to
    use ``params.k``. With ``enforce_growth=False`` inadmissible inputs are
    still computed (nu_R is then reported as infinite).
    """
    if params is None:
        params = KernelParams(u.dimension, 0.5, 0)
    params = resolve_params(u, k, params)
    if params.n != u.dimension:
        raise PreconditionError("field dimension does not match params")
    schedule = tuple(float(R) for R in schedule)
    if len(schedule) < 4 or any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] < 4:
        raise PreconditionError("schedule needs >= 4 increasing radii, all >= 4")
    admissible = u.growth_order < 2 * params.s + params.k
    if enforce_growth:
        check_growth(u, params)
    grid = grid or ball_grid(params.n)
    xs = grid.points
    f1, f2 = local_terms(u, xs, params, cfg)
    sums = shell_sums(u, schedule, xs, params, cfg)
    seq = RenormalizedSequence(params, schedule)
    for R in schedule:
        fstar, kappa, _ = sums.cumulative_at(R)
        f_R = SampledFunction(grid, f1 + f2 + fstar)
        P_R = MultivariatePolynomial.from_vector(kappa, sums.indices, params.n, params.k - 1)
        sharp, _ = sharp_representative(f_R, params.k)
        nu = tail_integral(u, params.k, R, params, cfg) if admissible else math.inf
        seq.entries.append(SequenceEntry(R, f_R, P_R, sharp, nu))
    rep, rate = extrapolate(seq.sharps, cfg.abs_tol, schedule, 2 * params.s + params.k - u.growth_order)
    converged = admissible and (rate is None or rate < 1 or (seq.sharps[-1] - seq.sharps[-2]).sup() <= cfg.abs_tol)
    return seq, PolyModClass(rep, params.k - 1, bool(converged), rate)


@dataclass
class CauchyReport:
    radii: list
    differences: list
    nu: list
    ratios: list
    rate_consistent: bool

    def to_dict(self):
        return {
            "radii": self.radii,
            "differences": self.differences,
            "nu": self.nu,
            "ratios": self.ratios,
            "rate_consistent": self.rate_consistent,
        }


def cauchy_rate_report(seq: RenormalizedSequence, noise: float = 1e-12) -> CauchyReport:
    """Ratios ||f#_{R'} - f#_R||_inf / nu_R over consecutive schedule entries."""
    if len(seq.entries) < 3:
        raise PreconditionError("need at least three schedule entries")
    radii, diffs, nus, ratios = [], [], [], []
    for a, b in zip(seq.entries, seq.entries[1:]):
        d = (b.f_R_sharp - a.f_R_sharp).sup()
        radii.append(a.R)
        diffs.append(d)
        nus.append(a.nu_R)
        ratios.append(0.0 if d <= noise else (d / a.nu_R if a.nu_R > 0 else math.inf))
    last = ratios[-3:]
    if all(r == 0.0 for r in last):
        consistent = True
    else:
        positive = [r for r in last if r > 0]
        consistent = len(positive) == len(last) and math.isfinite(max(last)) and max(last) <= 3 * min(last)
    return CauchyReport(radii, diffs, nus, ratios, bool(consistent))


def reduce_class(u, result: PolyModClass, j: int, params: KernelParams, cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE):
    """Recompute at order j <= k; returns ``(class_j, consistent)``.

    ``consistent`` records that the order-j and order-k representatives
    differ by a polynomial of degree <= k - 1.
    """
    k = result.k
    if j > k or j < 0:
        raise PreconditionError("reduction order must satisfy 0 <= j <= k")
    grid = result.representative.grid
    if j == k:
        return result, True
    _, cls_j = divergent_laplacian(u, j, schedule, params, cfg, grid)
    same = class_equal(cls_j.representative, result.representative, k, class_tolerance(cfg))
    return cls_j, bool(same)


def fixed_cutoff_rhs(u, rho: float, cls: PolyModClass, params: KernelParams, cfg=QuadratureConfig()) -> SampledFunction:
    """Right-hand side satisfied by chi_rho u, built from the class representative.

    f + int_{B_2 \\ B_rho} u(y) |x - y|^(-n-2s) dy - int_{|y| > max(2, rho)} u psi / |y|^(n+2s+k) dy.
    """
    if rho < 1:
        raise PreconditionError("rho must be >= 1")
    params = params.with_k(cls.k)
    grid = cls.representative.grid
    xs = grid.points
    if np.any(np.linalg.norm(xs, axis=1) >= rho):
        raise PreconditionError("grid must lie inside B_rho")
    inner = annulus_kernel_integral(u, xs, rho, 2.0, params, cfg) if rho < 2 else np.zeros(len(xs))
    outer = psi_tail(u, xs, max(2.0, rho), params, cfg)
    return SampledFunction(grid, cls.representative.values + inner - outer)


# --- mollification ----------------------------------------------------------


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def mollifier_rule(n: int, radial: int = 48, angular: int = 32):
    """Nodes z in B_1 and weights of a radial kernel with moments 1, 0, 0 (orders 0, 2, 4).

    The kernel is bump(z) (a + b|z|^2 + c|z|^4); vanishing second and fourth
    moments make mollification exact on polynomials of degree <= 5.
    """
    if n == 1:
        z, w = np.polynomial.legendre.leggauss(radial)
        z = z[:, None]
    else:
        t, wt = np.polynomial.legendre.leggauss(radial)
        r = 0.5 * (t + 1)
        wr = 0.5 * wt * r ** (n - 1)
        dirs, wdir = sphere_rule(n, angular)
        z = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        w = (wr[:, None] * wdir[None, :]).ravel()
    r2 = np.sum(z * z, axis=1)
    base = w * _bump(r2)
    M = np.array([[np.sum(base * r2 ** (i + j)) for j in range(3)] for i in range(3)])
    coef = np.linalg.solve(M, np.array([1.0, 0.0, 0.0]))
    return z, base * (coef[0] + coef[1] * r2 + coef[2] * r2**2)


@dataclass(frozen=True, eq=False)
class MollifiedField:
    """u * rho_eps evaluated by quadrature against the rule from :func:`mollifier_rule`."""

    base: object
    eps: float
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, u, eps: float):
        z, w = mollifier_rule(u.dimension)
        return cls(u, float(eps), z, w)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def growth_order(self):
        return self.base.growth_order

    @property
    def is_polynomial(self) -> bool:
        return bool(getattr(self.base, "is_polynomial", False))

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        shifted = pts[..., None, :] - self.eps * self.nodes
        return self.base(shifted) @ self.weights
