"""Named experiment suites producing re-checkable pass/fail reports.

Each report stores its metrics and the comparisons applied to them, so the
verdict can be recomputed offline from the JSON alone.
"""

from __future__ import annotations

import dataclasses
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .divlap import (
    DEFAULT_SCHEDULE,
    MollifiedField,
    cauchy_rate_report,
    class_tolerance,
    d_of_ks,
    divergent_laplacian,
    minimal_k,
)
from .errors import GrowthError, PreconditionError
from .expr import parse_expression
from .fd import HolderOrder, holder_norm, holder_seminorm_mod_poly, seminorm_grid
from .kernel import KernelParams
from .poly import SampledFunction, cell_centered_grid, least_squares_polynomial, write_csv
from .quad import QuadratureConfig, tail_integral, weighted_integral

_OPS = {"<=": operator.le, ">=": operator.ge, "<": operator.lt, ">": operator.gt, "==": operator.eq}


@dataclass
class ExperimentReport:
    name: str
    params: dict
    metrics: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    def add(self, metric: str, value, op: str, threshold):
        self.metrics[metric] = _plain(value)
        self.checks.append({"metric": metric, "op": op, "threshold": _plain(threshold)})

    def record(self, metric: str, value):
        self.metrics[metric] = _plain(value)

    @property
    def verdict(self) -> str:
        return derive_verdict(self.metrics, self.checks)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def failures(self):
        return [c for c in self.checks if not _check_ok(self.metrics, c)]

    def to_dict(self):
        return {
            "name": self.name,
            "params": self.params,
            "metrics": self.metrics,
            "checks": self.checks,
            "artifacts": self.artifacts,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path):
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(self.to_json(), encoding="utf-8")
        tmp.replace(path)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _num(v):
    return float(v) if isinstance(v, str) else v


def _check_ok(metrics, check):
    return bool(_OPS[check["op"]](_num(metrics[check["metric"]]), _num(check["threshold"])))


def derive_verdict(metrics: dict, checks: list) -> str:
    return "pass" if checks and all(_check_ok(metrics, c) for c in checks) else "fail"


def config_snapshot(cfg: QuadratureConfig) -> dict:
    return {k: _plain(v) for k, v in dataclasses.asdict(cfg).items()}


def _write_artifact(report, output_dir, name, f: SampledFunction):
    if output_dir is None:
        return
    path = Path(output_dir) / name
    write_csv(path, f)
    report.artifacts.append(name)


# --- identity ---------------------------------------------------------------


def run_identity_suite(params: KernelParams = KernelParams(1, 0.5, 2), cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE, seed: int = 0, output_dir=None):
    """Class of x^2 against affine representatives (equal) and non-affine ones (not equal)."""
    u = parse_expression("x1^2", params.n)
    _, cls = divergent_laplacian(u, params.k, schedule, params, cfg)
    tol = class_tolerance(cfg)
    grid = cls.representative.grid
    rng = np.random.default_rng(seed)
    affine = {"zero": "0", "one": "1", "minus_one": "-1", "x": "x1", "seven_x_minus_two": "7*x1-2"}
    for i, (a, b) in enumerate(rng.uniform(-5, 5, size=(3, 2))):
        affine[f"random_affine_{i}"] = f"{float(a)!r}*x1+{float(b)!r}"
    report = ExperimentReport("identity", {"n": params.n, "s": params.s, "k": params.k, "schedule": list(schedule), "seed": seed, "quadrature": config_snapshot(cfg)})
    report.record("class_tolerance", tol)
    for name, text in affine.items():
        rep = SampledFunction.sample(parse_expression(text, params.n), grid)
        _, resid = least_squares_polynomial(cls.representative - rep, params.k - 1)
        report.add(f"residual_{name}", resid, "<=", tol)
    for name, text in {"x_squared": "x1^2", "half_x_squared": "0.5*x1^2"}.items():
        rep = SampledFunction.sample(parse_expression(text, params.n), grid)
        _, resid = least_squares_polynomial(cls.representative - rep, params.k - 1)
        report.add(f"residual_{name}", resid, ">", tol)
    _write_artifact(report, output_dir, "identity_class.csv", cls.representative)
    return report


# --- Liouville --------------------------------------------------------------

MONOMIALS = (("1", 1, 0), ("x1", 1, 1), ("x1^2", 1, 2), ("x1^3", 1, 3), ("x1*x2", 2, 2))
NON_POLYNOMIAL = (("exp(-x1^2)", 1), ("x1*exp(-x1^2)", 1), ("exp(-x1^2-x2^2)", 2))


def run_liouville_suite(s_list=(0.25, 0.5, 0.75), k_list=None, cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE):
    """Zero classes for monomials of degree <= d(k, s); the next degree is refused or nonzero.

    ``k_list`` adds explicit orders on top of the automatically chosen minimal
    admissible one.
    """
    tol = class_tolerance(cfg)
    report = ExperimentReport(
        "liouville",
        {"s_list": list(s_list), "k_list": list(k_list or []), "schedule": list(schedule), "quadrature": config_snapshot(cfg)},
    )
    report.record("class_tolerance", tol)
    zero_threshold = 1e-2
    for s in s_list:
        for text, n, deg in MONOMIALS:
            u = parse_expression(text, n)
            ks = sorted({minimal_k(deg, s), *[k for k in (k_list or []) if deg < 2 * s + k]})
            for k in ks:
                d = d_of_ks(k, s)
                tag = f"{text}|s={s}|k={k}"
                if deg <= d:
                    seq, cls = divergent_laplacian(u, k, schedule, KernelParams(n, s, k), cfg)
                    report.record(f"final_sharp_sup[{tag}]", seq.entries[-1].f_R_sharp.sup())
                    report.add(f"class_sup[{tag}]", cls.representative.sup(), "<=", zero_threshold)
            # the next degree with the smallest order admitting the current one
            k0 = minimal_k(deg, s)
            if deg == d_of_ks(k0, s):
                nxt = parse_expression(_next_degree(text), n)
                refused = _refused(nxt, KernelParams(n, s, k0), cfg, schedule)
                report.add(f"refused_degree_{deg + 1}[s={s}|k={k0}]", int(refused), "==", 1)
        for text, n in NON_POLYNOMIAL:
            u = parse_expression(text, n)
            k = minimal_k(u.growth_order, s)
            seq, _ = divergent_laplacian(u, k, schedule, KernelParams(n, s, k), cfg)
            report.add(
                f"min_sharp_sup[{text}|s={s}|k={k}]",
                min(e.f_R_sharp.sup() for e in seq.entries),
                ">",
                10 * tol,
            )
    return report


def _next_degree(text):
    return {"1": "x1", "x1": "x1^2", "x1^2": "x1^3", "x1^3": "x1^4", "x1*x2": "x1^2*x2"}[text]


def _refused(u, params, cfg, schedule):
    try:
        divergent_laplacian(u, params.k, schedule, params, cfg)
    except GrowthError:
        return True
    return False


# --- Cauchy -----------------------------------------------------------------


def run_cauchy_suite(params: KernelParams = KernelParams(1, 0.5, 2), cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE, output_dir=None):
    """Rate consistency of consecutive sharp differences against nu_R, and nu_R = 2/R for x^2."""
    u = parse_expression("x1^2", params.n)
    seq, cls = divergent_laplacian(u, params.k, schedule, params, cfg)
    rep = cauchy_rate_report(seq)
    report = ExperimentReport("cauchy", {"n": params.n, "s": params.s, "k": params.k, "schedule": list(schedule), "quadrature": config_snapshot(cfg)})
    for R, d, nu, r in zip(rep.radii, rep.differences, rep.nu, rep.ratios):
        report.record(f"difference[R={R:g}]", d)
        report.record(f"nu[R={R:g}]", nu)
        report.record(f"ratio[R={R:g}]", r)
    last = rep.ratios[-3:]
    report.add("ratio_spread", max(last) / min(last) if min(last) > 0 else (1.0 if max(last) == 0 else math.inf), "<=", 3.0)
    if params.n == 1 and abs(params.s - 0.5) < 1e-15 and params.k == 2:
        err = max(abs(e.nu_R - 2 / e.R) for e in seq.entries)
        report.add("nu_closed_form_error", err, "<=", 1e-6)
    for e in seq.entries:
        _write_artifact(report, output_dir, f"cauchy_sharp_R{e.R:g}.csv", e.f_R_sharp)
    return report


# --- Schauder ---------------------------------------------------------------

SCHAUDER_BASES = {
    0: ("exp(-x1^2)", "sin(x1)*exp(-x1^2)", "cos(2*x1)*exp(-x1^2)"),
    2: ("x1^2", "x1^2+exp(-x1^2)", "x1^2+sin(x1)*exp(-x1^2)"),
}


def dilate(text: str, lam: float, n: int):
    out = text
    for i in range(n, 0, -1):
        out = out.replace(f"x{i}", f"({lam!r}*X{i})")
    return parse_expression(out.replace("X", "x"), n)


def schauder_ratio(u, gamma: float, ell: int, s: float, cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE, num: int = 41):
    """||u||_{C^(gamma+2s)(B_1/2)} / ([f]_{C^gamma(B_1; ell)} + J_{u,ell}) on grids."""
    n = u.dimension
    if float(gamma).is_integer() or float(gamma + 2 * s).is_integer():
        raise PreconditionError("gamma and gamma + 2s must not be integers")
    params = KernelParams(n, s, ell)
    grid = seminorm_grid(n, num)
    _, cls = divergent_laplacian(u, ell, schedule, params, cfg, grid)
    top = holder_norm(u, HolderOrder(gamma + 2 * s), cell_centered_grid(n, 0.5, num))
    semi = holder_seminorm_mod_poly(cls.representative, HolderOrder(gamma), ell, grid)
    J = tail_integral(u, ell, 0.5, params, cfg)
    denom = semi + J
    return (0.0 if top == 0 else math.inf) if denom == 0 else top / denom, top, semi, J


def run_schauder_probe(gammas=(0.5, 2.5), ks=(0, 2), s: float = 0.5, scales=(1.0, 2.0, 4.0), cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE, bases=None):
    """Ratio band over dilations of three base fields, per (gamma, k), with ell = k."""
    bases = bases or SCHAUDER_BASES
    report = ExperimentReport(
        "schauder",
        {"gammas": list(gammas), "ks": list(ks), "s": s, "scales": list(scales), "schedule": list(schedule), "quadrature": config_snapshot(cfg)},
    )
    for k in ks:
        for gamma in gammas:
            ratios = []
            for text in bases[k]:
                for lam in scales:
                    r, top, semi, J = schauder_ratio(dilate(text, lam, 1), gamma, k, s, cfg, schedule)
                    tag = f"{text}|lambda={lam:g}|gamma={gamma}|k={k}"
                    report.record(f"ratio[{tag}]", r)
                    report.record(f"seminorm[{tag}]", semi)
                    report.record(f"tail[{tag}]", J)
                    ratios.append(r)
            band = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
            report.add(f"band[gamma={gamma}|k={k}]", band, "<=", 10.0)
    return report


# --- stability --------------------------------------------------------------


def _test_functions(n):
    return {
        "one": lambda y: np.ones(y.shape[:-1]),
        "ball": lambda y: (np.linalg.norm(y, axis=-1) < 1).astype(float),
        "half_space": lambda y: (y[..., 0] > 0).astype(float),
        "bounded_linear": lambda y: y[..., 0] / np.sqrt(1 + np.sum(y * y, axis=-1)),
    }


def run_stability_suite(u, k: int, params: KernelParams | None = None, cfg=QuadratureConfig(), schedule=DEFAULT_SCHEDULE, ms=(4, 8, 16), family=None):
    """Class of mollified fields u_m against the class of u.

    ``family(m)`` may replace the default mollification u * rho_(1/m). The
    suite refuses families whose tail integrals are not uniformly controlled
    by that of u.
    """
    params = (params or KernelParams(u.dimension, 0.5, k)).with_k(k)
    family = family or (lambda m: MollifiedField.build(u, 1.0 / m))
    members = {m: family(m) for m in ms}
    J = tail_integral(u, k, 0.5, params, cfg)
    for m, um in members.items():
        Jm = tail_integral(um, k, 0.5, params, cfg)
        if not Jm <= 10 * J + cfg.abs_tol:
            raise PreconditionError(f"member m={m} has tail integral {Jm} beyond the uniform bound 10*{J}")
    _, base = divergent_laplacian(u, k, schedule, params, cfg)
    report = ExperimentReport("stability", {"n": params.n, "s": params.s, "k": k, "ms": list(ms), "schedule": list(schedule), "quadrature": config_snapshot(cfg)})
    tests = _test_functions(params.n)
    ref = {name: weighted_integral(u, k, params, cfg, phi) for name, phi in tests.items()}
    gaps, weak = [], []
    for m in ms:
        _, cls = divergent_laplacian(members[m], k, schedule, params, cfg, base.representative.grid)
        gap = (cls.representative - base.representative).sup()
        w = max(abs(weighted_integral(members[m], k, params, cfg, phi) - ref[name]) for name, phi in tests.items())
        report.record(f"gap[m={m}]", gap)
        report.record(f"weak_gap[m={m}]", w)
        gaps.append(gap)
        weak.append(w)
    floor = cfg.abs_tol
    report.add("gap_monotone", int(_monotone(gaps, floor)), "==", 1)
    report.add("weak_gap_monotone", int(_monotone(weak, floor)), "==", 1)
    report.add("final_gap", gaps[-1], "<=", 100 * cfg.abs_tol)
    return report


def _monotone(values, floor):
    """Non-increasing, except that changes below ``floor`` count as noise."""
    return all(b <= a or b <= floor for a, b in zip(values, values[1:]))


SUITES = ("identity", "liouville", "schauder", "stability", "cauchy")


def run_suite(name: str, cfg=QuadratureConfig(), output_dir=None):
    if name == "identity":
        return run_identity_suite(cfg=cfg, output_dir=output_dir)
    if name == "liouville":
        return run_liouville_suite(cfg=cfg)
    if name == "schauder":
        return run_schauder_probe(cfg=cfg)
    if name == "cauchy":
        return run_cauchy_suite(cfg=cfg, output_dir=output_dir)
    if name == "stability":
        reports = [
            run_stability_suite(parse_expression("x1^2", 1), 2, cfg=cfg),
            run_stability_suite(parse_expression("exp(-x1^2)", 1), 0, cfg=cfg),
        ]
        merged = ExperimentReport("stability", {"fields": ["x1^2", "exp(-x1^2)"], "ks": [2, 0], "quadrature": config_snapshot(cfg)})
        for label, r in zip(("x1^2", "exp(-x1^2)"), reports):
            for key, val in r.metrics.items():
                merged.metrics[f"{label}:{key}"] = val
            for c in r.checks:
                merged.checks.append({**c, "metric": f"{label}:{c['metric']}"})
        return merged
    raise KeyError(name)
