"""Command-line front end: ``polylap eval | verify <suite> | seminorm``.

Exit codes: 0 success, 1 failed verdict, 2 precondition failure,
3 quadrature failure, 64 unknown suite.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .divlap import DEFAULT_SCHEDULE, cauchy_rate_report, divergent_laplacian
from .errors import PolylapError, PreconditionError, QuadratureError
from .expr import parse_expression
from .fd import HolderOrder, holder_seminorm, holder_seminorm_mod_poly, seminorm_grid
from .kernel import KernelParams
from .poly import ball_grid, write_csv
from .quad import QuadratureConfig, pv_fraclap
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_PRECONDITION, EXIT_QUADRATURE, EXIT_USAGE = 0, 1, 2, 3, 64


@dataclass
class RunConfig:
    expr: str = "x1^2"
    n: int = 1
    s: float = 0.5
    k: object = "auto"
    schedule: list = field(default_factory=lambda: list(DEFAULT_SCHEDULE))
    grid_radius: float = 0.9
    grid_points: int | None = None
    quadrature: dict = field(default_factory=dict)
    output_dir: str = "polylap_out"
    gamma: float = 0.5

    def validate(self):
        if self.n not in (1, 2, 3):
            raise PreconditionError("n must be 1, 2 or 3")
        if not 0 < self.s < 1:
            raise PreconditionError("s must lie in (0, 1)")
        if self.k != "auto":
            self.k = int(self.k)
        self.schedule = [float(r) for r in self.schedule]
        if len(self.schedule) < 4 or any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise PreconditionError("schedule needs >= 4 increasing radii")
        if not 0 < self.grid_radius < 1:
            raise PreconditionError("grid radius must lie in (0, 1)")
        self.quad_config()
        return self

    def quad_config(self) -> QuadratureConfig:
        known = {f.name for f in dataclasses.fields(QuadratureConfig)}
        unknown = set(self.quadrature) - known
        if unknown:
            raise PreconditionError(f"unknown quadrature options: {sorted(unknown)}")
        return QuadratureConfig(**self.quadrature)


def _build_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(RunConfig)}
        bad = set(data) - known
        if bad:
            raise PreconditionError(f"unknown config keys: {sorted(bad)}")
        cfg = RunConfig(**data)
    for name in ("expr", "n", "s", "k", "output_dir", "gamma", "grid_points"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "schedule", None):
        cfg.schedule = [float(v) for v in args.schedule.split(",")]
    for flag, key in (("radial_nodes", "radial_nodes"), ("angular_nodes", "angular_nodes"), ("abs_tol", "abs_tol")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg.quadrature[key] = val
    return cfg.validate()


def cmd_eval(cfg: RunConfig) -> int:
    u = parse_expression(cfg.expr, cfg.n)
    qcfg = cfg.quad_config()
    params = KernelParams(cfg.n, cfg.s, 0)
    grid = ball_grid(cfg.n, cfg.grid_radius, cfg.grid_points)
    seq, cls = divergent_laplacian(u, cfg.k, cfg.schedule, params, qcfg, grid)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_r = []
    for e in seq.entries:
        name = f"f_sharp_R{e.R:g}.csv"
        write_csv(out / name, e.f_R_sharp, {"f_R": e.f_R.values})
        per_r.append({"R": e.R, "csv": name, "sharp_sup": e.f_R_sharp.sup(), "nu_R": e.nu_R, "P_R": _poly_dict(e.P_R)})
    extra = {}
    if seq.params.k == 0:
        extra["pv_direct"] = pv_fraclap(u, grid.points, seq.params, qcfg)
    write_csv(out / "class.csv", cls.representative, extra)
    report = cauchy_rate_report(seq)
    summary = {
        "expr": cfg.expr,
        "params": {"n": seq.params.n, "s": seq.params.s, "k": seq.params.k},
        "schedule": list(seq.schedule),
        "quadrature": dataclasses.asdict(qcfg),
        "entries": per_r,
        "class": {"csv": "class.csv", "modulus_degree": cls.modulus_degree, "sup": cls.representative.sup(), "converged": cls.converged, "rate": cls.rate},
        "cauchy": report.to_dict(),
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"k={seq.params.k} class sup={cls.representative.sup():.6g} final sharp sup={seq.entries[-1].f_R_sharp.sup():.6g}")
    return EXIT_OK


def _poly_dict(P):
    return {"".join(map(str, a)): float(c) for a, c in sorted(P.coeffs.items())}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def cmd_verify(suite: str, cfg: RunConfig) -> int:
    if suite not in SUITES:
        print(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_suite(suite, cfg.quad_config(), out)
    report.write(out / f"{suite}.json")
    print(f"{suite}: {report.verdict}")
    for c in report.failures():
        print(f"  failed {c['metric']} {c['op']} {c['threshold']}: {report.metrics[c['metric']]}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_seminorm(cfg: RunConfig, k: int, num: int) -> int:
    u = parse_expression(cfg.expr, cfg.n)
    grid = seminorm_grid(cfg.n, num)
    order = HolderOrder(cfg.gamma)
    plain = holder_seminorm(u, order, grid)
    mod = holder_seminorm_mod_poly(u, order, k, grid)
    print(f"plain {plain:.17g}")
    print(f"mod_poly {mod:.17g}")
    return EXIT_OK


def _parser():
    p = argparse.ArgumentParser(prog="polylap", description="Renormalised fractional Laplacian of growing functions.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file mirroring RunConfig")
        sp.add_argument("--expr")
        sp.add_argument("--n", type=int)
        sp.add_argument("--s", type=float)
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--radial-nodes", dest="radial_nodes", type=int)
        sp.add_argument("--angular-nodes", dest="angular_nodes", type=int)
        sp.add_argument("--abs-tol", dest="abs_tol", type=float)

    ev = sub.add_parser("eval", help="run the renormalised sequence and write CSVs")
    common(ev)
    ev.add_argument("--k", help="order or 'auto'")
    ev.add_argument("--schedule", help="comma-separated radii")
    ev.add_argument("--grid-points", dest="grid_points", type=int)

    ve = sub.add_parser("verify", help="run a named suite and write its JSON report")
    common(ve)
    ve.add_argument("suite")

    se = sub.add_parser("seminorm", help="plain and modulo-polynomial Hoelder seminorms")
    common(se)
    se.add_argument("--gamma", type=float, required=True)
    se.add_argument("--k", type=int, default=0)
    se.add_argument("--num", type=int, default=41)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "seminorm":
            k = args.k
            args.k = None
            cfg = _build_config(args)
            return cmd_seminorm(cfg, k, args.num)
        cfg = _build_config(args)
        if args.command == "eval":
            return cmd_eval(cfg)
        return cmd_verify(args.suite, cfg)
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (PolylapError, ValueError, OSError) as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
