"""Fidelity metrics, ciphertext statistics and error-rate experiments."""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, PreconditionError
from .lwe import LweParams, encrypt, keygen, quantize, sample_noise, centered
from .pkr import PekEntry, PublicEmbeddingKey, q_step

PEAK = 255.0
SSIM_WINDOW = 8
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int

    def rows(self):
        for lo, hi, n in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            yield lo, hi, int(n)


@dataclass(frozen=True)
class FidelityReport:
    psnr: float
    ssim: float
    mse: float


def _same_shape(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a.astype(np.float64), b.astype(np.float64)


def mse(a, b) -> float:
    a, b = _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b) -> float:
    """PSNR in dB for 8-bit images; ``inf`` when identical."""
    err = mse(a, b)
    return math.inf if err == 0 else 10 * math.log10(PEAK**2 / err)


def ssim(a, b, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all ``window x window`` windows (stride 1, uniform weights).

    Window statistics use population (1/N) moments.  The mean is clipped to
    ``[0, 1]``; strongly anti-correlated images report 0.
    """
    a, b = _same_shape(a, b)
    if a.ndim != 2 or min(a.shape) < window:
        raise PreconditionError(f"images must be 2-D and at least {window}x{window}")
    val = kernels.ssim_mean(np.ascontiguousarray(a), np.ascontiguousarray(b), window, SSIM_C1, SSIM_C2)
    return min(1.0, max(0.0, float(val)))


def fidelity(a, b) -> FidelityReport:
    return FidelityReport(psnr(a, b), ssim(a, b), mse(a, b))


def entropy(samples, q: int | None = None) -> float:
    """Plug-in Shannon entropy (bits) of the empirical symbol distribution."""
    x = np.asarray(samples).reshape(-1)
    if x.size == 0:
        raise PreconditionError("entropy of an empty sample")
    if q is not None and x.min() >= 0:
        counts = np.bincount(x.astype(np.int64), minlength=q)
    else:
        _, counts = np.unique(x, return_counts=True)
    p = counts[counts > 0] / x.size
    return float(-(p * np.log2(p)).sum()) + 0.0


def ideal_entropy(q: int) -> float:
    return math.log2(q)


def histogram(samples, bins: int, lo: float, hi: float) -> Histogram:
    x = np.asarray(samples).reshape(-1)
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return Histogram(edges, counts, int(x.size))


def gamma_balance(entries) -> float:
    """Fraction of +1 sign factors."""
    if isinstance(entries, PublicEmbeddingKey):
        g = entries.gamma
    else:
        g = np.array([e.gamma if isinstance(e, PekEntry) else e for e in entries])
    if g.size == 0:
        raise PreconditionError("no PEK entries")
    return float(np.mean(g == 1))


def _simulate_chunk(params: LweParams, N: int, k: int, rng, method: str):
    """One key, ``k`` trials of encrypt -> embed -> (decrypt, extract).  Returns error count."""
    q, half = params.q, params.half
    step = q_step(params, N)
    m = rng.integers(0, 2, size=k)
    m_e = rng.integers(0, 2**N, size=k)
    if method == "full":
        sk, pk = keygen(params, rng)
        lam = np.asarray(quantize(sk, encrypt(pk, m, rng)), dtype=np.int64)
    elif method == "noise":
        # lambda = e^T a_r + m * floor(q/2) (mod q) with the key noise e drawn directly
        e = centered(sample_noise(params, rng, size=params.d), q).astype(np.float64)
        masks = rng.integers(0, 2, size=(k, params.d), dtype=np.uint8)
        lam = ((masks @ e).astype(np.int64) + m * half) % q
    else:
        raise ValueError(f"unknown method {method!r}")
    gamma = kernels.sign_factors(lam, q).astype(np.int64)
    marked = (lam + m_e * gamma * step) % q
    bits = kernels.decrypt_bits(marked, q)
    levels = kernels.extract_levels(marked, q, step)
    return int(np.count_nonzero((bits != m) | (levels != m_e)))


def error_count(params: LweParams, N: int, trials: int, rng=None, key_every: int = 1000,
                method: str = "full") -> int:
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    errors = 0
    done = 0
    while done < trials:
        k = min(key_every, trials - done)
        errors += _simulate_chunk(params, N, k, rng, method)
        done += k
    return errors


def error_experiment(params: LweParams, N: int, trials: int, rng=None, key_every: int = 1000,
                     method: str = "full") -> float:
    """Empirical rate of decryption-or-extraction failures of unbounded PKR-ER.

    A fresh key pair is drawn every ``key_every`` trials so the rate estimates the
    error probability over keys as well as encryption randomness.  ``method="noise"``
    evaluates the same quantization variables from the key noise directly, which
    skips the ``n x d`` products.
    """
    return error_count(params, N, trials, rng, key_every, method) / trials


def gamma_experiment(params: LweParams, count: int, rng=None, chunk: int = 256) -> np.ndarray:
    """Sign factors of ``count`` random encryptions, each under a fresh key.

    ``lambda = e^T a_r + m * floor(q/2)`` depends on the key only through its noise
    vector ``e`` (``A`` and ``s`` cancel), so a fresh key per ciphertext is sampled
    as a fresh ``e``.  For a single fixed key the +1 fraction is
    ``Phi(sum(e) / sqrt(sum(e^2)))`` rather than 1/2.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    rng = np.random.default_rng(rng)
    q, d = params.q, params.d
    out = np.empty(count, dtype=np.int8)
    for lo in range(0, count, chunk):
        k = min(chunk, count - lo)
        e = centered(sample_noise(params, rng, size=(k, d)), q)
        masks = rng.integers(0, 2, size=(k, d), dtype=np.uint8)
        m = rng.integers(0, 2, size=k)
        lam = (np.einsum("ij,ij->i", e, masks, dtype=np.int64) + m * params.half) % q
        out[lo:lo + k] = kernels.sign_factors(lam, q)
    return out


def lambda_distributions(params: LweParams, N: int, count: int, rng=None) -> dict:
    """Noise, lambda and marked lambda samples for one key (distribution plots)."""
    rng = np.random.default_rng(rng)
    sk, pk = keygen(params, rng)
    m = rng.integers(0, 2, size=count)
    lam = np.asarray(quantize(sk, encrypt(pk, m, rng)), dtype=np.int64)
    gamma = kernels.sign_factors(lam, params.q).astype(np.int64)
    m_e = rng.integers(0, 2**N, size=count)
    marked = (lam + m_e * gamma * q_step(params, N)) % params.q
    noise = centered((lam - m * params.half) % params.q, params.q)
    return {"noise": noise, "lambda": lam, "marked_lambda": marked}


def params_digest(params: LweParams) -> str:
    raw = f"{params.n}:{params.q}:{params.d}:{params.alpha!r}:{params.epsilon!r}".encode()
    return hashlib.sha256(raw).hexdigest()[:16]


def _fmt(value) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return repr(value) if isinstance(value, float) else str(value)


def write_metrics_csv(path, rows) -> None:
    """``rows``: iterable of (metric, params_digest, value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "params_digest", "value"])
        for metric, digest, value in rows:
            w.writerow([metric, digest, _fmt(value)])


def write_histogram_csv(path, hist: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, n in hist.rows():
            w.writerow([_fmt(float(lo)), _fmt(float(hi)), n])
