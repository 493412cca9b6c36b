"""The numba kernels and their numpy fallbacks must agree exactly."""
import numpy as np
import pytest

from pkrdh import kernels

Q = 57601


def both(name):
    return kernels.PAIRS[name]


@pytest.fixture
def lam(rng):
    return np.concatenate([rng.integers(0, Q, 5000), np.array([0, 14399, 14400, 28799, 28800, 43199, 43200, Q - 1])])


def test_centered(lam):
    nb, np_ = both("centered")
    assert np.array_equal(nb(lam, Q), np_(lam, Q))


def test_decrypt_bits(lam):
    nb, np_ = both("decrypt_bits")
    assert np.array_equal(nb(lam, Q), np_(lam, Q))


def test_sign_factors(lam):
    nb, np_ = both("sign_factors")
    assert np.array_equal(nb(lam, Q), np_(lam, Q))


@pytest.mark.parametrize("step", [7200, 3600, 1800])
def test_extract_levels(lam, step):
    nb, np_ = both("extract_levels")
    assert np.array_equal(nb(lam, Q, step), np_(lam, Q, step))


def test_available_mask():
    nb, np_ = both("available_mask")
    h, l = (a.ravel().astype(np.int64) for a in np.meshgrid(np.arange(256), np.arange(256)))
    for fid in (kernels.INF_FID, 0, 10, 200):
        assert np.array_equal(nb(h, l, fid), np_(h, l, fid))


def test_quantize_rows(rng):
    nb, np_ = both("quantize_rows")
    u = rng.integers(0, Q, (300, 240))
    c = rng.integers(0, Q, 300)
    s = rng.integers(0, Q, 240)
    ref = (c - (u.astype(object) @ s.astype(object))) % Q
    assert np.array_equal(nb(u, c, s, Q), ref.astype(np.int64))
    assert np.array_equal(np_(u, c, s, Q), ref.astype(np.int64))


def test_ssim_mean(rng):
    nb, np_ = both("ssim_mean")
    a = rng.integers(0, 256, (40, 33)).astype(np.float64)
    b = np.clip(a + rng.integers(-9, 10, a.shape), 0, 255).astype(np.float64)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    assert nb(a, b, 8, c1, c2) == pytest.approx(np_(a, b, 8, c1, c2), rel=1e-10)
