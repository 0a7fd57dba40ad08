import numpy as np
import pytest

from polylap.errors import PreconditionError
from polylap.kernel import KernelParams, expansion, kernel_g, psi, remainder, taylor_coefficients


def random_pairs(n, count, rng):
    e = rng.normal(size=(count, n))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    z = rng.normal(size=(count, n))
    z *= (0.5 * rng.uniform(0, 1, size=count) ** (1 / n) / np.linalg.norm(z, axis=1))[:, None]
    return e, z


def test_zeroth_coefficient_is_one():
    for n in (1, 2, 3):
        e = np.eye(n)[0]
        assert taylor_coefficients(KernelParams(n, 0.3, 3), e)[(0,) * n] == pytest.approx(1.0)


def test_first_coefficient_signs():
    for s in (0.2, 0.5, 0.9):
        c = taylor_coefficients(KernelParams(1, s, 2), [1.0])
        assert c[(1,)] == pytest.approx(1 + 2 * s)
        c = taylor_coefficients(KernelParams(1, s, 2), [-1.0])
        assert c[(1,)] == pytest.approx(-(1 + 2 * s))


def test_second_coefficient_against_binomial_series():
    # (1 - z)^(-1-2s) = sum binom(-1-2s, j) (-z)^j
    s = 0.3
    c = taylor_coefficients(KernelParams(1, s, 4), [1.0])
    a = 1 + 2 * s
    assert c[(2,)] == pytest.approx(a * (a + 1) / 2)
    assert c[(3,)] == pytest.approx(a * (a + 1) * (a + 2) / 6)


def test_empty_for_order_zero():
    assert taylor_coefficients(KernelParams(2, 0.5, 0), [1.0, 0.0]) == {}
    with pytest.raises(PreconditionError):
        taylor_coefficients(KernelParams(2, 0.5, 1), [1.0, 1.0])


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_reconstruction_identity(n, s, k, rng):
    params = KernelParams(n, s, k)
    ex = expansion(params)
    e, z = random_pairs(n, 50, rng)
    for ei, zi in zip(e, z):
        assert abs(ex.reconstruct(ei, zi[None])[0] - kernel_g(params, ei, zi)) <= 1e-10


def test_remainder_decays_like_power(rng):
    params = KernelParams(2, 0.4, 2)
    e, z = random_pairs(2, 40, rng)
    ratios = []
    for scale in (1.0, 0.5, 0.25):
        zz = z * scale
        r = np.array([remainder(params, ei, zi) for ei, zi in zip(e, zz)])
        ratios.append(np.max(np.abs(r) / np.linalg.norm(zz, axis=1) ** 2))
    # bounded by C |z|^k, and the constant settles as |z| -> 0
    assert ratios[2] <= ratios[1] <= ratios[0]
    assert ratios[1] <= 1.3 * ratios[2]


def test_psi_examples():
    p = KernelParams(1, 0.5, 2)
    assert psi(p, [0.0], [4.0]) == 0.0
    y, x = 4.0, 0.5
    c = taylor_coefficients(p, [1.0])
    xy = x / y
    direct = y**2 * (c[(0,)] + c[(1,)] * xy - kernel_g(p, [1.0], [xy]))
    assert psi(p, [x], [y]) == pytest.approx(direct, rel=1e-12)
    p0 = KernelParams(2, 0.7, 0)
    xs, ys = np.array([0.3, -0.2]), np.array([1.5, 2.5])
    assert psi(p0, xs, ys) == pytest.approx(-np.linalg.norm(ys) ** 3.4 / np.linalg.norm(xs - ys) ** 3.4)
    with pytest.raises(PreconditionError):
        psi(p, [0.1], [1.5])


def test_psi_uniformly_bounded_in_y(rng):
    p = KernelParams(2, 0.5, 2)
    xs = rng.uniform(-0.7, 0.7, size=(50, 2))
    dirs = rng.normal(size=(10, 2))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sups, grads = [], []
    h = 1e-5
    for r in (2, 4, 8, 16, 32, 64, 128, 256):
        ys = r * dirs
        vals = np.array([[psi(p, x, y) for y in ys] for x in xs])
        shifted = np.array([[psi(p, x + [h, 0], y) for y in ys] for x in xs])
        sups.append(np.abs(vals).max())
        grads.append(np.abs((shifted - vals) / h).max())
    assert max(sups[3:]) <= 1.01 * max(sups[:3])
    assert max(grads[3:]) <= 1.01 * max(grads[:3])


def test_params_validation():
    with pytest.raises(PreconditionError):
        KernelParams(1, 1.0, 0)
    with pytest.raises(PreconditionError):
        KernelParams(1, 0.5, 7)
    with pytest.raises(PreconditionError):
        KernelParams(4, 0.5, 0)
