"""Public-key recoding on encryption redundancy.

The quantization variable of a ciphertext sits near 0 or ``q//2``; each quarter of
Z_q is split into ``2**N`` sub-regions of width ``Q_step = q // 2**(N+2)``.  The
key owner publishes a sign factor per ciphertext pointing away from the nearest
decryption boundary, and anybody can then move ``c`` by ``m_e * gamma * Q_step``
without changing the decrypted bit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ExtractionError, PreconditionError
from .lwe import Ciphertext, LweParams, PublicKey, SecretKey, centered, decode_lambda, encrypt_bounded, quantize


def q_step(q: int | LweParams, N: int) -> int:
    q = q.q if isinstance(q, LweParams) else q
    if N < 1 or 2 ** (N + 2) > q:
        raise PreconditionError(f"N={N} too large for q={q}")
    return q // 2 ** (N + 2)


@dataclass(frozen=True)
class PekEntry:
    gamma: int
    q_step: int
    n_bits: int


@dataclass(frozen=True)
class PublicEmbeddingKey:
    """Global ``Q_step`` and ``N`` plus one sign factor per ciphertext."""
    modulus: int
    q_step: int
    n_bits: int
    gamma: np.ndarray  # int8, +1 / -1

    def __len__(self):
        return self.gamma.shape[0]

    def __getitem__(self, i) -> PekEntry:
        return PekEntry(int(self.gamma[i]), self.q_step, self.n_bits)

    def entries(self):
        return [self[i] for i in range(len(self))]


def bits_to_int(bits) -> np.ndarray:
    """Rows of N bits (first bit least significant) to integers."""
    bits = np.asarray(bits, dtype=np.int64)
    return bits @ (1 << np.arange(bits.shape[-1], dtype=np.int64))


def int_to_bits(values, N: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    return ((v[..., None] >> np.arange(N)) & 1).astype(np.uint8)


def pack_payload(bits, N: int, count: int) -> np.ndarray:
    """Group a bit stream into ``count`` N-bit values, zero padding the tail."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    groups = -(-bits.size // N)
    if groups > count:
        raise PreconditionError(f"{bits.size} bits need {groups} ciphertexts, only {count} available")
    padded = np.zeros(count * N, dtype=np.int64)
    padded[: bits.size] = bits
    return bits_to_int(padded.reshape(count, N))


def unpack_payload(values, N: int, nbits: int) -> np.ndarray:
    return int_to_bits(values, N).reshape(-1)[:nbits]


def noise_of(sk: SecretKey, ct: Ciphertext):
    """Centered noise ``e^T a_r`` of ciphertexts (requires the secret key)."""
    lam = np.asarray(quantize(sk, ct), dtype=np.int64)
    m = np.asarray(decode_lambda(lam, sk.params.q), dtype=np.int64)
    return centered((lam - m * sk.params.half) % sk.params.q, sk.params.q)


def pek_gen(sk: SecretKey, ct: Ciphertext, N: int, strict: bool = True) -> PublicEmbeddingKey:
    """Sign factors for a ciphertext sequence.

    In strict mode every ciphertext must have noise below ``Q_step`` (as produced
    by :func:`pkr_encrypt`); otherwise a warning is issued instead.
    """
    step = q_step(sk.params, N)
    lam = np.asarray(quantize(sk, ct), dtype=np.int64).reshape(-1)
    noise = np.abs(np.asarray(noise_of(sk, ct)).reshape(-1))
    bad = int((noise >= step).sum())
    if bad:
        msg = f"{bad} ciphertext(s) have noise >= Q_step={step}; embedding may corrupt them"
        if strict:
            raise PreconditionError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return PublicEmbeddingKey(sk.params.q, step, N, kernels.sign_factors(lam, sk.params.q))


def pkr_encrypt(pk: PublicKey, sk: SecretKey, bits, N: int, rng, max_retries: int = 1000):
    """Key-owner encryption for PKR-ER: noise-bounded ciphertexts and their PEK."""
    ct = encrypt_bounded(pk, sk, bits, q_step(pk.params, N), rng, max_retries=max_retries)
    return ct, pek_gen(sk, ct, N)


def pkr_embed(ct: Ciphertext, pek: PublicEmbeddingKey, m_e) -> Ciphertext:
    """``c' = c + m_e * gamma * Q_step (mod q)``; ``u`` is untouched.  No secret needed."""
    m_e = np.broadcast_to(np.asarray(m_e, dtype=np.int64), ct.shape)
    if len(pek) != m_e.size:
        raise PreconditionError("PEK length does not match ciphertext count")
    if np.any((m_e < 0) | (m_e >= 2**pek.n_bits)):
        raise PreconditionError(f"m_e must lie in [0, {2**pek.n_bits})")
    gamma = pek.gamma.reshape(ct.shape).astype(np.int64)
    c = (ct.c.astype(np.int64) + m_e * gamma * pek.q_step) % pek.modulus
    return Ciphertext(ct.u, c.astype(np.uint32))


def pkr_decrypt(sk: SecretKey, marked: Ciphertext):
    return decode_lambda(quantize(sk, marked), sk.params.q)


def extract_lambda(lam, q: int, N: int):
    """Sub-region index of quantization variables (inverse of the recoding)."""
    arr = np.asarray(lam, dtype=np.int64)
    m_e = kernels.extract_levels(arr.reshape(-1), q, q_step(q, N)).reshape(arr.shape)
    if np.any(m_e >= 2**N) or np.any(m_e < 0):
        raise ExtractionError(f"extracted value outside [0, {2**N}); wrong N or corrupted ciphertext")
    return int(m_e) if m_e.ndim == 0 else m_e


def pkr_extract(sk: SecretKey, marked: Ciphertext, N: int):
    return extract_lambda(quantize(sk, marked), sk.params.q, N)


def error_bound(params: LweParams, N: int, printed: bool = False) -> float:
    """Gaussian tail bound on ``P(|e^T a_r| >= q / 2**(N+2))``.

    The noise is modelled as N(0, sigma^2) with sigma = sqrt(d/2) * alpha * q, and
    the bound is ``2 sigma / (t sqrt(2 pi)) * exp(-t^2 / (2 sigma^2))`` at
    ``t = q / 2**(N+2)``.  ``printed=True`` evaluates the variant whose exponent
    reads ``-q^2 / (2**N d alpha^2)`` (alpha in integer units); it underflows to
    zero for every practical parameter set.
    """
    q, d = params.q, params.d
    a = params.alpha * q
    pre = 2 ** (N + 2) * a / q * math.sqrt(d / math.pi)
    denom = (2**N if printed else 2 ** (2 * N + 4)) * d * a * a
    return min(1.0, max(0.0, pre * math.exp(-(q * q) / denom)))


def alpha_bounds(params: LweParams, N: int, trials: int = 10**5, rng=None, key_every: int = 1000,
                 method: str = "noise", rel_tol: float = 1e-3) -> tuple[float, float]:
    """``(alpha_min, alpha_max)`` for payload width N.

    alpha_max is the largest alpha (bisection to ``rel_tol``) for which
    ``trials`` unbounded encrypt/embed/decrypt/extract rounds produce no error.
    Every probe replays the same random stream, so the error count is a
    monotone function of alpha along the search.
    """
    from .analysis import error_count

    seed = int(np.random.default_rng(rng).integers(2**63))

    def clean(alpha):
        return error_count(params.with_alpha(alpha), N, trials, seed, key_every, method) == 0

    lo = params.alpha_min
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if not clean(lo):
            raise PreconditionError(f"errors already at alpha_min={lo:.4e}; N={N} infeasible for these parameters")
        hi = 2 * lo
        while clean(hi):
            lo, hi = hi, 2 * hi
            if hi >= 1:
                return params.alpha_min, lo
        while (hi - lo) > rel_tol * lo:
            mid = 0.5 * (lo + hi)
            if clean(mid):
                lo = mid
            else:
                hi = mid
    return params.alpha_min, lo
