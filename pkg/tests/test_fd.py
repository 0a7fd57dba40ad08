import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polylap.errors import OffGridError, PreconditionError
from polylap.expr import parse_expression
from polylap.fd import (
    FiniteDifferenceStencil,
    HolderOrder,
    discrete_integration_by_parts,
    finite_difference,
    holder_seminorm,
    holder_seminorm_mod_poly,
    reabsorption_ratio,
    seminorm_grid,
)
from polylap.poly import SampledFunction, ball_grid


def stencil(dirs, h):
    return FiniteDifferenceStencil([np.array(d, dtype=float) for d in dirs], h)


def test_affine_and_quadratic_differences():
    f = parse_expression("3*x1-2*x2+1", 2)
    w = np.array([0.6, 0.8])
    assert finite_difference(f, stencil([w], 0.1), [0.2, -0.3]) == pytest.approx(0.1 * (3 * 0.6 - 2 * 0.8))
    g = parse_expression("x1^2", 1)
    for x in (-0.5, 0.0, 0.7):
        assert finite_difference(g, stencil([[1], [1]], 0.05), [x]) == pytest.approx(2 * 0.05**2)


def test_sine_difference_error_is_second_order():
    val = finite_difference(parse_expression("sin(x1)", 1), stencil([[1]], 1e-3), [0.0])
    assert abs(val - 1e-3) <= 1e-3**2


def test_stencil_validation():
    with pytest.raises(PreconditionError):
        stencil([[1, 1]], 0.1)
    with pytest.raises(PreconditionError):
        stencil([[1]], 1.5)
    with pytest.raises(PreconditionError):
        HolderOrder(2.0)


def test_sampled_differences_and_off_grid():
    grid = ball_grid(1, 0.9, 41)
    f = SampledFunction.sample(parse_expression("x1^2", 1), grid)
    h = grid.spacing
    assert finite_difference(f, stencil([[1], [1]], h), [0.0]) == pytest.approx(2 * h * h)
    with pytest.raises(OffGridError):
        finite_difference(f, stencil([[1]], h), [0.9])
    with pytest.raises(OffGridError):
        finite_difference(f, stencil([[1]], 0.7 * h), [0.0])


@pytest.mark.parametrize("text,alpha,dirs", [
    ("sin(x1)*exp(x2)", (1, 0), [[1, 0]]),
    ("sin(x1)*exp(x2)", (1, 1), [[1, 0], [0, 1]]),
    ("cos(2*x1)*x2^3", (0, 2), [[0, 1], [0, 1]]),
])
def test_difference_quotients_converge_at_first_order(text, alpha, dirs):
    f = parse_expression(text, 2)
    x = np.array([0.2, -0.1])
    exact = f.derivative(alpha)(x)
    d = len(dirs)
    errs = [abs(finite_difference(f, stencil(dirs, h), x) / h**d - exact) for h in (0.04, 0.02, 0.01)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 0.9


@given(st.integers(0, 2**31 - 1))
def test_discrete_integration_by_parts(seed):
    rng = np.random.default_rng(seed)
    grid = ball_grid(2, 0.9, 15)
    g = SampledFunction(grid, rng.normal(size=len(grid)))
    vals = rng.normal(size=len(grid))
    vals[np.linalg.norm(grid.points, axis=1) > 0.6] = 0.0
    f = SampledFunction(grid, vals)
    for axis in (0, 1):
        lhs, rhs = discrete_integration_by_parts(f, g, axis)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_seminorm_examples():
    grid = seminorm_grid(1, 41)
    assert holder_seminorm(parse_expression("5", 1), HolderOrder(0.5), grid) == 0.0
    assert holder_seminorm(parse_expression("x1", 1), HolderOrder(0.5), grid) == pytest.approx(math.sqrt(2 - 2 / 40))
    assert holder_seminorm(parse_expression("x1^2", 1), HolderOrder(1.5), grid) == pytest.approx(2 * math.sqrt(2 - 2 / 40))


def test_seminorm_brute_force_two_dimensions():
    grid = seminorm_grid(2, 11)
    f = parse_expression("sin(x1)*x2", 2)
    vals = f(grid.points)
    best = 0.0
    for i in range(len(grid)):
        for j in range(i + 1, len(grid)):
            best = max(best, abs(vals[i] - vals[j]) / np.linalg.norm(grid.points[i] - grid.points[j]) ** 0.3)
    assert holder_seminorm(f, HolderOrder(0.3), grid) == pytest.approx(best, rel=1e-12)


def test_mod_poly_conventions():
    grid = seminorm_grid(1, 41)
    f = parse_expression("sin(3*x1)", 1)
    for gamma, k in ((0.5, 1), (1.5, 2), (2.5, 3), (1.5, 1)):
        order = HolderOrder(gamma)
        assert holder_seminorm_mod_poly(f, order, k, grid) == holder_seminorm(f, order, grid)
    assert holder_seminorm_mod_poly(parse_expression("3*x1-1", 1), HolderOrder(0.5), 2, grid) <= 1e-8
    assert holder_seminorm_mod_poly(parse_expression("x1^2-x1", 1), HolderOrder(0.5), 3, grid) <= 1e-8


@given(st.lists(st.floats(-4, 4), min_size=3, max_size=3))
def test_mod_poly_shift_invariance(c):
    grid = seminorm_grid(1, 41)
    base = "exp(x1)*cos(2*x1)"
    f = parse_expression(base, 1)
    g = parse_expression(f"{base}+({c[0]!r})+({c[1]!r})*x1+({c[2]!r})*x1^2", 1)
    order = HolderOrder(0.5)
    a = holder_seminorm_mod_poly(f, order, 3, grid)
    b = holder_seminorm_mod_poly(g, order, 3, grid)
    assert abs(a - b) <= 1e-8
    assert a <= holder_seminorm(f, order, grid) + 1e-12


def test_mod_poly_two_dimensions_sampled():
    grid = seminorm_grid(2, 21)
    f = SampledFunction.sample(parse_expression("sin(x1)*cos(2*x2)", 2), grid)
    g = SampledFunction.sample(parse_expression("sin(x1)*cos(2*x2)+x1*x2-3*x2^2+x1", 2), grid)
    order = HolderOrder(0.5)
    a = holder_seminorm_mod_poly(f, order, 3, grid)
    assert abs(a - holder_seminorm_mod_poly(g, order, 3, grid)) <= 1e-8
    assert a <= holder_seminorm(f, order, grid)


def test_reabsorption_constant_is_family_wide():
    grid = seminorm_grid(1, 41)
    family = ["sin(3*x1)", "exp(x1)", "cos(x1)*x1^3", "exp(-4*x1^2)", "sin(5*x1)+x1^3"]
    for gamma, k in ((0.5, 2), (0.5, 1), (1.5, 3)):
        ratios = [reabsorption_ratio(parse_expression(t, 1), HolderOrder(gamma), k, grid) for t in family]
        assert max(ratios) <= 10 * min(ratios)
