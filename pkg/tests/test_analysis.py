import csv
import math

import numpy as np
import pytest

from pkrdh import analysis
from pkrdh.errors import DimensionMismatch, PreconditionError
from pkrdh.lwe import default_params
from pkrdh.pkr import PekEntry, PublicEmbeddingKey


def test_psnr_examples(rng):
    a = rng.integers(1, 255, (16, 16))
    assert analysis.psnr(a, a) == math.inf
    assert analysis.psnr(a, a + 1) == pytest.approx(48.1308, abs=1e-4)
    z = np.zeros((8, 8))
    assert analysis.psnr(z, z + 255) == pytest.approx(0.0)
    with pytest.raises(DimensionMismatch):
        analysis.psnr(z, np.zeros((8, 9)))


def test_psnr_monotone(rng):
    a = rng.integers(0, 200, (16, 16))
    vals = [analysis.psnr(a, a + k) for k in range(1, 10)]
    assert np.all(np.diff(vals) < 0)


def test_ssim_examples(rng):
    a = rng.integers(0, 256, (32, 32)).astype(np.uint8)
    assert analysis.ssim(a, a) == pytest.approx(1.0)
    assert analysis.ssim(a, 255 - a) < 0.1
    b = np.clip(a.astype(int) + rng.integers(-20, 21, a.shape), 0, 255)
    s = analysis.ssim(a, b)
    assert 0 <= s <= 1
    assert s == pytest.approx(analysis.ssim(b, a), abs=1e-12)


def _ssim_reference(a, b, win=8):
    # direct loop over all windows, population moments
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    a, b = a.astype(float), b.astype(float)
    vals = []
    for i in range(a.shape[0] - win + 1):
        for j in range(a.shape[1] - win + 1):
            x, y = a[i:i + win, j:j + win], b[i:i + win, j:j + win]
            mx, my = x.mean(), y.mean()
            vx, vy = x.var(), y.var()
            cov = ((x - mx) * (y - my)).mean()
            vals.append((2 * mx * my + c1) * (2 * cov + c2) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def test_ssim_against_direct_loop(rng):
    a = rng.integers(0, 256, (14, 17))
    b = np.clip(a + rng.integers(-30, 31, a.shape), 0, 255)
    assert analysis.ssim(a, b) == pytest.approx(_ssim_reference(a, b), rel=1e-9)


def test_fidelity_report(rng):
    a = rng.integers(0, 256, (16, 16))
    r = analysis.fidelity(a, a)
    assert r.psnr == math.inf and r.mse == 0 and r.ssim == pytest.approx(1.0)


def test_entropy_examples():
    q = 57601
    assert analysis.entropy(np.arange(q), q) == pytest.approx(15.8138, abs=5e-5)
    assert analysis.ideal_entropy(q) == pytest.approx(15.8138, abs=5e-5)
    assert analysis.entropy(np.full(100, 7), q) == 0
    assert analysis.entropy([3, 9] * 50) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        analysis.entropy([])


def test_histogram(rng):
    x = rng.integers(0, 57601, 10000)
    h = analysis.histogram(x, 64, 0, 57601)
    assert h.counts.sum() == h.total == 10000
    assert h.bin_edges[0] == 0 and h.bin_edges[-1] == 57601
    assert len(list(h.rows())) == 64


def test_gamma_balance_examples():
    assert analysis.gamma_balance([PekEntry(1, 7200, 1)] * 5) == 1.0
    assert analysis.gamma_balance([1, -1] * 50) == 0.5
    pek = PublicEmbeddingKey(257, 32, 1, np.array([1, 1, -1, 1], np.int8))
    assert analysis.gamma_balance(pek) == 0.75
    with pytest.raises(PreconditionError):
        analysis.gamma_balance([])


def test_error_experiment_examples():
    p = default_params()
    assert analysis.error_experiment(p, 1, 2000, rng=1, key_every=500) == 0
    assert analysis.error_experiment(p.with_alpha(3 * 7.4714e-4), 1, 2000, rng=1) > 0
    with pytest.raises(PreconditionError):
        analysis.error_experiment(p, 1, 0)


def test_error_methods_agree():
    # same quantity two ways; rates at an inflated alpha agree statistically
    p = default_params().with_alpha(1.5e-3)
    full = analysis.error_experiment(p, 1, 4000, rng=2, key_every=100, method="full")
    noise = analysis.error_experiment(p, 1, 4000, rng=3, key_every=100, method="noise")
    assert abs(full - noise) < 0.04


def test_lambda_distributions():
    p = default_params()
    out = analysis.lambda_distributions(p, 1, 4000, rng=4)
    sigma = math.sqrt(p.d / 2) * p.alpha * p.q
    assert abs(out["noise"]).max() < 7200
    # marked lambda clusters near 0, +-Q_step, q/2, q/2 +- Q_step: four modes around each half
    lam = out["marked_lambda"]
    centers = np.array([0, 7200, p.q - 7200, p.half, p.half + 7200, p.half - 7200])
    dist = np.abs(((lam[:, None] - centers) + p.q // 2) % p.q - p.q // 2).min(axis=1)
    assert np.all(dist < 6 * sigma)


def test_csv_writers(tmp_path):
    path = tmp_path / "m.csv"
    analysis.write_metrics_csv(path, [("psnr", "abc", math.inf), ("entropy", "abc", 1.5)])
    rows = list(csv.reader(open(path)))
    assert rows == [["metric", "params_digest", "value"], ["psnr", "abc", "inf"], ["entropy", "abc", "1.5"]]
    hpath = tmp_path / "h.csv"
    analysis.write_histogram_csv(hpath, analysis.histogram([0, 1, 2, 3], 2, 0, 4))
    assert list(csv.reader(open(hpath)))[1:] == [["0.0", "2.0", "2"], ["2.0", "4.0", "2"]]
    assert len(analysis.params_digest(default_params())) == 16


def _noise_pmf_fresh_keys(params):
    # exact pmf of sum_i e_i a_i with e_i = round(q N(0, alpha^2)), a_i ~ Bernoulli(1/2)
    from scipy import stats
    s = params.alpha * params.q
    k = np.arange(-int(10 * s) - 2, int(10 * s) + 3)
    e_pmf = stats.norm.cdf((k + 0.5) / s) - stats.norm.cdf((k - 0.5) / s)
    term = 0.5 * e_pmf
    term[k == 0] += 0.5
    pmf = np.array([1.0])
    for _ in range(params.d):
        pmf = np.convolve(pmf, term)
    offset = (pmf.size - 1) // 2
    return pmf, offset


def test_gamma_fresh_keys_toy_oracle():
    from pkrdh.lwe import toy_params
    p = toy_params()
    pmf, off = _noise_pmf_fresh_keys(p)
    nu = np.arange(pmf.size) - off
    # gamma = +1 exactly when the centered noise is >= 0 and below q/4 (m = 0) or q/4 (m = 1)
    plus = pmf[(nu >= 0) & (nu < p.q // 4)].sum() + pmf[(nu < -(p.q // 4))].sum()
    assert plus == pytest.approx(0.5 + pmf[off] / 2, abs=1e-6)
    assert pmf[off] == pytest.approx(0.044, abs=0.002)
    g = analysis.gamma_experiment(p, 200000, rng=5)
    frac = np.mean(g == 1)
    assert abs(frac - plus) < 4 * np.sqrt(plus * (1 - plus) / g.size)


def test_gamma_fixed_key_is_biased(default_keys, rng):
    # for one key the +1 fraction is Phi(sum e / sqrt(sum e^2)), not 1/2
    from scipy import stats
    from pkrdh.lwe import centered, encrypt, quantize
    from pkrdh import kernels
    sk, pk = default_keys
    p = sk.params
    e = centered((pk.p.astype(np.int64) - pk.A.astype(np.int64).T @ sk.s.astype(np.int64)) % p.q, p.q)
    lam = quantize(sk, encrypt(pk, rng.integers(0, 2, 20000), rng))
    frac = np.mean(kernels.sign_factors(lam, p.q) == 1)
    expect = stats.norm.cdf(e.sum() / np.sqrt((e.astype(float) ** 2).sum()))
    assert abs(frac - expect) < 0.015


@pytest.mark.slow
def test_bound_dominates_within_sampling_error():
    # companion to the point-estimate sweep: with a fresh key per trial the error count is
    # binomial, and it must not exceed bound * trials by more than 3 standard errors
    from pkrdh.pkr import error_bound
    p = default_params()
    trials = 10**4
    for a in np.linspace(p.alpha_min, 3 * 7.4714e-4, 6):
        pa = p.with_alpha(a)
        k = analysis.error_count(pa, 1, trials, rng=int(a * 1e9), key_every=1, method="noise")
        expect = error_bound(pa, 1) * trials
        assert k <= expect + 3 * math.sqrt(expect) + 1, (a, k, expect)
