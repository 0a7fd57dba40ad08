"""Consecutive sharp differences divided by nu_R for x^2 at s=1/2, k=2."""

from dataclasses import dataclass

from polylap import KernelParams, QuadratureConfig, parse_expression
from polylap.divlap import cauchy_rate_report, divergent_laplacian


@dataclass
class Config:
    schedule: tuple = (8, 16, 32, 64, 128, 256)


def run(cfg: Config):
    seq, _ = divergent_laplacian(parse_expression("x1^2", 1), 2, cfg.schedule, KernelParams(1, 0.5, 2), QuadratureConfig())
    rep = cauchy_rate_report(seq)
    print(f"{'R':>6} {'diff':>11} {'nu_R':>11} {'2/R':>11} {'ratio':>7}")
    for R, d, nu, r in zip(rep.radii, rep.differences, rep.nu, rep.ratios):
        print(f"{R:6g} {d:11.4e} {nu:11.4e} {2 / R:11.4e} {r:7.4f}")
    print(f"rate consistent: {rep.rate_consistent}")


if __name__ == "__main__":
    run(Config())
