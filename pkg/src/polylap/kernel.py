"""Taylor expansion of the kernel g_e(z) = |z - e|^(-n-2s) around z = 0.

Two independent routes are provided:

* multi-index coefficients c_{alpha,e}, from the binomial series of
  (1 + w)^(-lam) with w = |z|^2 - 2 z.e and lam = (n + 2s)/2;
* homogeneous degree-j parts |z|^j C_j^lam(zhat.e), from the Gegenbauer
  generating function. These give the order-k remainder and psi without
  subtracting nearly equal numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .poly import multi_indices

K_MAX = 6


@dataclass(frozen=True)
class KernelParams:
    n: int
    s: float
    k: int

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise PreconditionError(f"s must lie in (0, 1), got {self.s}")
        if self.k < 0:
            raise PreconditionError("k must be >= 0")
        if self.k > K_MAX:
            raise PreconditionError(f"k is capped at {K_MAX}")
        if self.n not in (1, 2, 3):
            raise PreconditionError("dimension must be 1, 2 or 3")

    @property
    def lam(self) -> float:
        return 0.5 * (self.n + 2.0 * self.s)

    @property
    def exponent(self) -> float:
        """n + 2s, the homogeneity of the kernel."""
        return self.n + 2.0 * self.s

    def with_k(self, k: int) -> "KernelParams":
        return KernelParams(self.n, self.s, k)


def kernel_g(params: KernelParams, e, z) -> np.ndarray:
    """Direct evaluation of |z - e|^(-n-2s)."""
    d = np.asarray(z, dtype=float) - np.asarray(e, dtype=float)
    return np.sum(d * d, axis=-1) ** (-params.lam)


def _poly_mul(a: dict, b: dict, max_order: int) -> dict:
    out: dict = {}
    for ka, va in a.items():
        oa = sum(ka)
        for kb, vb in b.items():
            if oa + sum(kb) > max_order:
                continue
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0.0) + va * vb
    return out


@lru_cache(maxsize=4096)
def _coefficients(n: int, lam: float, e: tuple, order: int) -> dict:
    unit = [tuple(int(i == j) for j in range(n)) for i in range(n)]
    w: dict = {}
    for i in range(n):
        w[tuple(2 * u for u in unit[i])] = 1.0
        if e[i] != 0.0:
            w[unit[i]] = -2.0 * e[i]
    zero = (0,) * n
    total = {zero: 1.0}
    term = {zero: 1.0}
    binom = 1.0
    for m in range(1, order + 1):
        binom *= (-lam - (m - 1)) / m
        term = _poly_mul(term, w, order)
        if not term:
            break
        for key, v in term.items():
            total[key] = total.get(key, 0.0) + binom * v
    return {a: total.get(a, 0.0) for a in multi_indices(n, order)}


def _check_unit(e):
    e = np.asarray(e, dtype=float).ravel()
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise PreconditionError("direction e must be a unit vector")
    return tuple(float(v) for v in e)


def taylor_coefficients(params: KernelParams, e, order: int | None = None) -> dict:
    """Map alpha -> c_{alpha,e} for |alpha| <= k - 1 (or <= ``order``).

    c_{alpha,e} is the Taylor coefficient of |z - e|^(-n-2s) at z = 0. For
    k = 0 the map is empty.
    """
    e = _check_unit(e)
    if len(e) != params.n:
        raise PreconditionError("direction has wrong dimension")
    top = params.k - 1 if order is None else order
    if top < 0:
        return {}
    return dict(_coefficients(params.n, params.lam, e, top))


def coefficient_table(params: KernelParams, dirs: np.ndarray, order: int | None = None):
    """Coefficients for many directions: ``(indices, array[len(indices), len(dirs)])``."""
    top = params.k - 1 if order is None else order
    idx = multi_indices(params.n, top) if top >= 0 else ()
    table = np.zeros((len(idx), len(dirs)))
    for j, e in enumerate(dirs):
        c = _coefficients(params.n, params.lam, tuple(float(v) for v in e), top) if top >= 0 else {}
        table[:, j] = [c[a] for a in idx]
    return idx, table


# --- Gegenbauer route -------------------------------------------------------


def gegenbauer_at_one(lam: float, j: int) -> float:
    """C_j^lam(1) = binomial(j + 2 lam - 1, j)."""
    return math.exp(math.lgamma(j + 2 * lam) - math.lgamma(2 * lam) - math.lgamma(j + 1))


def series_length(lam: float, k: int, r_max: float, eps: float = 1e-17) -> int:
    """Last index j needed so the tail of sum_{j>=k} C_j r^j is below ``eps`` relative."""
    if r_max <= 0:
        return k
    if r_max >= 1:
        raise PreconditionError("series requires |z| < 1")
    ref = max(gegenbauer_at_one(lam, k) * r_max**k, 1e-300)
    j = k
    while gegenbauer_at_one(lam, j) * r_max**j > eps * ref or j < k + 2:
        j += 1
        if j > 2000:
            raise PreconditionError("Gegenbauer series too slow to converge")
    return j


def gegenbauer_tail(lam: float, t, r, j_start: int, j_stop: int) -> np.ndarray:
    """sum_{j = j_start}^{j_stop} C_j^lam(t) r^j, by the three-term recurrence on C_j r^j."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    a_prev = np.ones(np.broadcast(t, r).shape)  # j = 0
    total = a_prev.copy() if j_start == 0 else np.zeros_like(a_prev)
    if j_stop == 0:
        return total
    a_cur = 2.0 * lam * t * r * np.ones_like(a_prev)  # j = 1
    if j_start <= 1:
        total += a_cur
    tr = 2.0 * t * r
    r2 = r * r
    for j in range(2, j_stop + 1):
        a_next = (tr * (j + lam - 1) * a_cur - r2 * (j + 2 * lam - 2) * a_prev) / j
        a_prev, a_cur = a_cur, a_next
        if j >= j_start:
            total += a_cur
    return total


def _polar(v):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    return norm, v / safe[..., None]


def remainder(params: KernelParams, e, z) -> np.ndarray:
    """Order-k Taylor remainder sum_{|alpha|=k} rho_alpha(e,z) z^alpha, for |z| <= 1/2."""
    e = np.asarray(e, dtype=float)
    r, zhat = _polar(z)
    if np.any(r > 0.5 + 1e-12):
        raise PreconditionError("remainder is defined for |z| <= 1/2")
    t = np.sum(zhat * e, axis=-1)
    J = series_length(params.lam, params.k, float(np.max(r)) if r.size else 0.0)
    return gegenbauer_tail(params.lam, t, r, params.k, J)


def psi(params: KernelParams, x, y) -> np.ndarray:
    """The universal function psi(x, y) for |x| < 1, |y| >= 2 (broadcasting).

    psi(x, y) = -|y|^k [g_{y/|y|}(x/|y|) - sum_{|alpha|<=k-1} c_alpha (x/|y|)^alpha].
    """
    rx, xhat = _polar(x)
    ry, yhat = _polar(y)
    if np.any(ry < 2.0 - 1e-12):
        raise PreconditionError("psi requires |y| >= 2")
    if np.any(rx >= 1.0):
        raise PreconditionError("psi requires |x| < 1")
    t = np.sum(xhat * yhat, axis=-1)
    r = rx / ry
    J = series_length(params.lam, params.k, float(np.max(r)) if np.size(r) else 0.0)
    return -(ry ** params.k) * gegenbauer_tail(params.lam, t, r, params.k, J)


def psi_matrix(params: KernelParams, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """psi for every pair, shape ``(len(xs), len(ys))``."""
    rx, xhat = _polar(xs)
    ry, yhat = _polar(ys)
    t = xhat @ yhat.T
    r = rx[:, None] / ry[None, :]
    r_max = float(r.max()) if r.size else 0.0
    J = series_length(params.lam, params.k, r_max)
    return -(ry[None, :] ** params.k) * gegenbauer_tail(params.lam, t, r, params.k, J)


@dataclass(frozen=True)
class KernelExpansion:
    params: KernelParams
    coeff_fn: Callable
    remainder_fn: Callable

    def reconstruct(self, e, z) -> np.ndarray:
        """Truncated series plus remainder; should reproduce :func:`kernel_g`."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        total = self.remainder_fn(e, z)
        for a, c in taylor_coefficients(self.params, e).items():
            total = total + c * np.prod(z ** np.asarray(a, dtype=float), axis=-1)
        return total


def expansion(params: KernelParams) -> KernelExpansion:
    return KernelExpansion(
        params,
        lambda alpha, e: taylor_coefficients(params, e).get(tuple(alpha), 0.0),
        lambda e, z: remainder(params, e, z),
    )
