"""Single-bit LWE public-key encryption.

Ciphertexts are batched: a :class:`Ciphertext` holds ``u`` with shape
``(..., n)`` and ``c`` with the leading shape ``(...)``, so one object can be a
single ciphertext, a sequence, or the 8 bitplanes of every pixel pair.

Encryption computes ``A @ a_r`` in float64 through BLAS.  Each partial sum is a
sum of at most ``d`` residues below ``q``, so the products are exact as long as
``d * (q - 1) < 2**53``; :class:`LweParams` enforces this.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ParameterError, PreconditionError, RetryLimitExceeded, SecurityWarning

_CHUNK = 2048
DEFAULT_RETRY_LIMIT = 1000
LATTICE_DELTA = 1.01
SECURE_LATTICE_DIM = 500


def is_prime(x: int) -> bool:
    if x < 2:
        return False
    if x % 2 == 0:
        return x == 2
    f = 3
    while f * f <= x:
        if x % f == 0:
            return False
        f += 2
    return True


def min_prime_modulus(n: int) -> int:
    """Smallest prime in ``[n**2, 2 n**2)``."""
    q = n * n
    while not is_prime(q):
        q += 1
    if q >= 2 * n * n:
        raise ParameterError(f"no prime in [{n * n}, {2 * n * n})")
    return q


def min_public_dim(n: int, q: int, epsilon: float) -> int:
    return math.ceil((1 + epsilon) * (1 + n) * math.log2(q))


def alpha_min(n: int, q: int) -> float:
    """Smallest Gaussian width meeting the ``alpha * q > 2 sqrt(n)`` floor."""
    return 2 * math.sqrt(n) / q


@dataclass(frozen=True)
class LweParams:
    n: int
    q: int
    d: int
    alpha: float
    epsilon: float = 0.2

    def __post_init__(self):
        n, q, d, alpha, eps = self.n, self.q, self.d, self.alpha, self.epsilon
        if n < 1 or d < 1:
            raise ParameterError("n and d must be positive")
        if not is_prime(q):
            raise ParameterError(f"q={q} is not prime")
        if not 0 < alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if eps <= 0:
            raise ParameterError("epsilon must be positive")
        if d < (1 + eps) * (1 + n) * math.log2(q) - 1e-9:
            raise ParameterError(f"d={d} below (1+eps)(1+n)log2(q)={min_public_dim(n, q, eps)}")
        if d * (q - 1) >= 2**53 or n * (q - 1) ** 2 >= 2**63:
            raise ParameterError("parameters too large for exact float64/int64 arithmetic")
        if not n * n <= q < 2 * n * n:
            warnings.warn(f"q={q} outside [n^2, 2n^2)", SecurityWarning, stacklevel=3)
        # equality is the documented minimum, so allow it up to rounding
        if alpha * q < 2 * math.sqrt(n) * (1 - 1e-9):
            warnings.warn("alpha*q below the 2*sqrt(n) security floor", SecurityWarning, stacklevel=3)
        if self.lattice_dimension < SECURE_LATTICE_DIM:
            warnings.warn(
                f"lattice dimension {self.lattice_dimension:.0f} below {SECURE_LATTICE_DIM}",
                SecurityWarning,
                stacklevel=3,
            )

    @classmethod
    def derive(cls, n: int, alpha: float | None = None, q: int | None = None,
               d: int | None = None, epsilon: float | None = None) -> "LweParams":
        """Fill in the defaults: minimum prime q, minimum d, alpha_min.

        If ``d`` is given without ``epsilon``, epsilon is the slack ``d`` implies.
        """
        q = min_prime_modulus(n) if q is None else q
        if d is None:
            epsilon = 0.2 if epsilon is None else epsilon
            d = min_public_dim(n, q, epsilon)
        elif epsilon is None:
            epsilon = d / ((1 + n) * math.log2(q)) - 1
            if epsilon <= 0:
                raise ParameterError(f"d={d} too small for n={n}, q={q}")
        alpha = alpha_min(n, q) if alpha is None else alpha
        return cls(n=n, q=q, d=d, alpha=alpha, epsilon=epsilon)

    def with_alpha(self, alpha: float) -> "LweParams":
        return LweParams(self.n, self.q, self.d, alpha, self.epsilon)

    @property
    def half(self) -> int:
        return self.q // 2

    @property
    def alpha_min(self) -> float:
        return alpha_min(self.n, self.q)

    @property
    def lattice_dimension(self) -> float:
        return math.sqrt(self.n * math.log2(self.q) / math.log2(LATTICE_DELTA))


def default_params(alpha: float | None = None) -> LweParams:
    """n=240, q=57601, d=4573; alpha defaults to alpha_min."""
    return LweParams.derive(240, alpha=alpha, q=57601, d=4573)


def toy_params(alpha: float | None = None) -> LweParams:
    """n=16, q=257 for exhaustive tests.  Deliberately insecure."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SecurityWarning)
        return LweParams.derive(16, alpha=1.0 / 257 if alpha is None else alpha, q=257)


@dataclass(frozen=True)
class SecretKey:
    params: LweParams
    s: np.ndarray

    def __post_init__(self):
        if self.s.shape != (self.params.n,):
            raise DimensionMismatch(f"secret key length {self.s.shape} != ({self.params.n},)")

    @cached_property
    def _s64(self):
        return self.s.astype(np.int64)


@dataclass(frozen=True)
class PublicKey:
    params: LweParams
    A: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        n, d = self.params.n, self.params.d
        if self.A.shape != (n, d) or self.p.shape != (d,):
            raise DimensionMismatch(f"public key shapes {self.A.shape}, {self.p.shape} != ({n}, {d}), ({d},)")

    @cached_property
    def _At(self):
        return np.ascontiguousarray(self.A.T, dtype=np.float64)

    @cached_property
    def _pf(self):
        return self.p.astype(np.float64)


@dataclass(frozen=True)
class Ciphertext:
    """One or more ``(u, c)`` pairs; ``u.shape == c.shape + (n,)``."""
    u: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if self.u.shape[:-1] != self.c.shape:
            raise DimensionMismatch(f"u shape {self.u.shape} does not match c shape {self.c.shape}")

    @property
    def shape(self):
        return self.c.shape

    @property
    def n(self):
        return self.u.shape[-1]

    def __len__(self):
        return self.c.shape[0]

    def __getitem__(self, idx):
        return Ciphertext(self.u[idx], self.c[idx])

    def copy(self):
        return Ciphertext(self.u.copy(), self.c.copy())

    def reshape(self, *shape):
        return Ciphertext(self.u.reshape(*shape, self.n), self.c.reshape(*shape))

    @staticmethod
    def concat(parts):
        parts = list(parts)
        return Ciphertext(np.concatenate([x.u for x in parts]), np.concatenate([x.c for x in parts]))

    @staticmethod
    def zeros(shape, n):
        shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
        return Ciphertext(np.zeros(shape + (n,), dtype=np.uint32), np.zeros(shape, dtype=np.uint32))


def centered(x, q):
    """Map residues to ``(-q/2, q/2]``-style representatives (``x - q`` when ``2x >= q``)."""
    arr = np.asarray(x, dtype=np.int64)
    out = kernels.centered(arr.reshape(-1), q).reshape(arr.shape)
    return int(out) if out.ndim == 0 else out


def sample_noise(params: LweParams, rng: np.random.Generator, size=None):
    """Draw from round(q * N(0, alpha^2)) mod q."""
    x = rng.normal(0.0, params.alpha, size=size)
    e = np.rint(params.q * x).astype(np.int64) % params.q
    return int(e) if size is None else e


def sk_gen(params: LweParams, rng: np.random.Generator) -> SecretKey:
    return SecretKey(params, rng.integers(0, params.q, size=params.n, dtype=np.int64).astype(np.uint32))


def pk_gen(params: LweParams, sk: SecretKey, rng: np.random.Generator, noise=None) -> PublicKey:
    """Public key ``(A, p = A^T s + e)``.

    ``noise`` overrides the Gaussian draw of ``e`` (test hook).
    """
    if sk.params != params:
        raise DimensionMismatch("secret key generated under different parameters")
    A = rng.integers(0, params.q, size=(params.n, params.d), dtype=np.int64)
    e = sample_noise(params, rng, size=params.d) if noise is None else np.asarray(noise, dtype=np.int64) % params.q
    if e.shape != (params.d,):
        raise DimensionMismatch("noise vector must have length d")
    p = (A.T @ sk._s64 + e) % params.q
    return PublicKey(params, A.astype(np.uint32), p.astype(np.uint32))


def keygen(params: LweParams, rng: np.random.Generator) -> tuple[SecretKey, PublicKey]:
    sk = sk_gen(params, rng)
    return sk, pk_gen(params, sk, rng)


def _random_masks(rng, k, d):
    return rng.integers(0, 2, size=(k, d), dtype=np.uint8).astype(np.float64)


def _encrypt_flat(pk: PublicKey, m: np.ndarray, rng, mask=None):
    params = pk.params
    k = m.shape[0]
    u = np.empty((k, params.n), dtype=np.uint32)
    c = np.empty(k, dtype=np.uint32)
    for lo in range(0, k, _CHUNK):
        hi = min(lo + _CHUNK, k)
        a = _random_masks(rng, hi - lo, params.d) if mask is None else mask[lo:hi].astype(np.float64)
        u[lo:hi] = (a @ pk._At).astype(np.int64) % params.q
        c[lo:hi] = ((a @ pk._pf).astype(np.int64) + m[lo:hi] * params.half) % params.q
    return u, c


def _check_bits(m):
    m = np.asarray(m, dtype=np.int64)
    if np.any((m != 0) & (m != 1)):
        raise PreconditionError("plaintext must be bits")
    return m


def encrypt(pk: PublicKey, m, rng: np.random.Generator, mask=None) -> Ciphertext:
    """Encrypt a bit, or an array of bits element-wise.

    ``mask`` forces the binary vector ``a_r`` (shape ``m.shape + (d,)``); test hook.
    """
    m = _check_bits(m)
    flat = m.reshape(-1)
    if mask is not None:
        mask = np.asarray(mask).reshape(flat.shape[0], pk.params.d)
    u, c = _encrypt_flat(pk, flat, rng, mask)
    return Ciphertext(u.reshape(m.shape + (pk.params.n,)), c.reshape(m.shape))


def encrypt_bounded(pk: PublicKey, sk: SecretKey, m, bound: int, rng: np.random.Generator,
                    max_retries: int = DEFAULT_RETRY_LIMIT) -> Ciphertext:
    """Encrypt so that every ciphertext has centered noise ``|e^T a_r| < bound``.

    Masks are redrawn for the rejected entries only; the result is distributed as
    plain encryption conditioned on acceptance.  Needs ``sk`` to measure the noise.
    """
    params = pk.params
    if not 0 < bound <= params.q // 4:
        raise PreconditionError(f"bound must lie in (0, {params.q // 4}]")
    m = _check_bits(m)
    flat = m.reshape(-1)
    u, c = _encrypt_flat(pk, flat, rng)
    pending = np.arange(flat.shape[0])
    for attempt in range(max_retries + 1):
        lam = kernels.quantize_rows(u[pending].astype(np.int64), c[pending].astype(np.int64), sk._s64, params.q)
        noise = kernels.centered((lam - flat[pending] * params.half) % params.q, params.q)
        pending = pending[np.abs(noise) >= bound]
        if pending.size == 0:
            return Ciphertext(u.reshape(m.shape + (params.n,)), c.reshape(m.shape))
        if attempt == max_retries:
            break
        u[pending], c[pending] = _encrypt_flat(pk, flat[pending], rng)
    raise RetryLimitExceeded(
        f"{pending.size} ciphertext(s) still exceed noise bound {bound} after {max_retries} redraws"
    )


def _check_dims(sk: SecretKey, ct: Ciphertext):
    if ct.n != sk.params.n:
        raise DimensionMismatch(f"ciphertext length {ct.n} != n={sk.params.n}")


def quantize(sk: SecretKey, ct: Ciphertext):
    """``lambda = c - s^T u mod q``; an int for a single ciphertext, else an array."""
    _check_dims(sk, ct)
    lam = kernels.quantize_rows(ct.u.reshape(-1, ct.n).astype(np.int64),
                                ct.c.reshape(-1).astype(np.int64), sk._s64, sk.params.q)
    lam = lam.reshape(ct.shape)
    return int(lam) if lam.ndim == 0 else lam


def decode_lambda(lam, q):
    """Plaintext bit for a quantization variable (half-open quarter regions)."""
    arr = np.asarray(lam, dtype=np.int64)
    out = kernels.decrypt_bits(arr.reshape(-1), q).reshape(arr.shape)
    return int(out) if out.ndim == 0 else out


def decrypt(sk: SecretKey, ct: Ciphertext):
    return decode_lambda(quantize(sk, ct), sk.params.q)
