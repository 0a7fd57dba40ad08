"""Final sharp sup and extrapolated class sup for monomials at their minimal order."""

import argparse
from dataclasses import dataclass

from polylap import KernelParams, QuadratureConfig, parse_expression
from polylap.divlap import d_of_ks, divergent_laplacian, minimal_k

MONOMIALS = (("1", 1), ("x1", 1), ("x1^2", 1), ("x1^3", 1), ("x1*x2", 2), ("x1^2*x2", 2))


@dataclass
class Config:
    s_values: tuple = (0.25, 0.5, 0.75)
    schedule: tuple = (8, 16, 32, 64, 128)


def run(cfg: Config):
    print(f"{'field':>9} {'s':>5} {'k':>2} {'d':>2} {'sharp(R_max)':>13} {'class':>10}")
    for s in cfg.s_values:
        for text, n in MONOMIALS:
            u = parse_expression(text, n)
            k = minimal_k(u.growth_order, s)
            seq, cls = divergent_laplacian(u, k, cfg.schedule, KernelParams(n, s, k), QuadratureConfig())
            print(f"{text:>9} {s:5.2f} {k:2d} {d_of_ks(k, s):2d} {seq.entries[-1].f_R_sharp.sup():13.4e} {cls.representative.sup():10.2e}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--s", type=float, nargs="*", default=list(Config.s_values))
    run(Config(tuple(p.parse_args().s)))
