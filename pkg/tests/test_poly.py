import numpy as np
import pytest
from hypothesis import given, strategies as st

from polylap.errors import MismatchedGridError
from polylap.expr import parse_expression
from polylap.poly import (
    MultivariatePolynomial,
    SampledFunction,
    ball_grid,
    class_equal,
    fit_polynomial_limit,
    gauss_ball_grid,
    gram_matrix,
    multi_indices,
    read_csv,
    sharp_representative,
    write_csv,
)


def sample(text, grid):
    return SampledFunction.sample(parse_expression(text, grid.dimension), grid)


def test_gram_entries_closed_form():
    G, idx = gram_matrix(1, 1)
    assert idx == ((0,), (1,))
    assert G[0, 0] == pytest.approx(2.0)
    assert G[0, 1] == 0.0
    assert G[1, 1] == pytest.approx(2 / 3)
    G2, _ = gram_matrix(2, 0)
    assert G2[0, 0] == pytest.approx(np.pi)


def test_multi_indices_graded():
    idx = multi_indices(2, 2)
    assert idx[0] == (0, 0)
    assert [sum(a) for a in idx] == sorted(sum(a) for a in idx)
    assert len(idx) == 6


def test_zero_polynomial_has_negative_degree():
    P = MultivariatePolynomial.zero(2)
    assert P.degree == -1
    assert np.all(P(np.ones((3, 2))) == 0)
    with pytest.raises(ValueError):
        MultivariatePolynomial({(2,): 1.0}, 1, 1)


def test_sharp_examples():
    grid = gauss_ball_grid(1, 1.0, 40)
    g, _ = sharp_representative(sample("x1", grid), 2)
    assert g.sup() < 1e-12
    x3 = sample("x1^3", grid)
    g, P = sharp_representative(x3, 1)
    assert np.allclose(g.values, x3.values, atol=1e-13)
    g, _ = sharp_representative(sample("x1^2", grid), 1)
    assert np.allclose(g.values, grid.points[:, 0] ** 2 - 1 / 3, atol=1e-12)
    same, P = sharp_representative(x3, 0)
    assert same is x3 and P.degree == -1


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.integers(1, 3))
def test_sharp_idempotent_and_shift_covariant(c, k):
    grid = ball_grid(2)
    g = sample("sin(3*x1)*exp(x2)", grid)
    idx = multi_indices(2, k - 1)
    Q = MultivariatePolynomial(dict(zip(idx, c)), k - 1, 2)
    a, _ = sharp_representative(g, k)
    b, _ = sharp_representative(g + Q.sample(grid), k)
    assert np.allclose(a.values, b.values, atol=1e-9)
    again, P = sharp_representative(a, k)
    assert np.allclose(again.values, a.values, atol=1e-10)
    for alpha in idx:
        mono = np.prod(grid.points ** np.array(alpha), axis=1)
        assert abs(a.inner(SampledFunction(grid, mono))) <= 1e-9 * max(1.0, a.l2())


def test_pythagoras_on_samples():
    grid = ball_grid(1)
    g, h = sample("exp(x1)", grid), sample("cos(2*x1)", grid)
    gs, _ = sharp_representative(g, 2)
    hs, _ = sharp_representative(h, 2)
    assert (g - h).l2() ** 2 >= (gs - hs).l2() ** 2 - 1e-12


def test_fit_polynomial_limit_examples():
    grid = ball_grid(1)
    seq = [sample(f"{1 + 1 / j!r}*x1", grid) for j in range(1, 6)]
    res = fit_polynomial_limit(seq, 1, 1e-6)
    assert not res.diverged
    zero = fit_polynomial_limit([sample("0", grid)] * 3, 0, 1e-6)
    assert zero.converged and np.allclose(zero.polynomial(grid.points), 0)
    assert fit_polynomial_limit([sample("sin(5*x1)", grid)] * 3, 1, 1e-3).diverged
    with pytest.raises(MismatchedGridError):
        fit_polynomial_limit([sample("x1", grid), sample("x1", ball_grid(1, num=11))], 1, 1e-6)


def test_class_equal_examples():
    grid = ball_grid(1)
    a = sample("x1^2", grid)
    assert class_equal(a, a, 2, 1e-6)
    assert class_equal(a, sample("x1^2+3*x1+1", grid), 2, 1e-6)
    assert not class_equal(a, sample("x1^2+x1^2", grid), 2, 1e-6)


def test_csv_round_trip(tmp_path):
    grid = ball_grid(2)
    f = sample("x1*x2+sin(x2)", grid)
    write_csv(tmp_path / "f.csv", f, {"extra": f.values * 2})
    text = (tmp_path / "f.csv").read_text()
    assert text.splitlines()[0] == "x1,x2,value,extra"
    g = read_csv(tmp_path / "f.csv")
    assert np.array_equal(g.values, f.values)
    assert np.array_equal(g.grid.points, grid.points)
