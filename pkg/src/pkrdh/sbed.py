"""Difference expansion on bitplane-encrypted images.

Every pixel pair is stored as 16 single-bit ciphertexts: 8 for ``h`` and 8 for
``l``, plane 0 being the least significant bit.  Embedding and server-side
recovery only move ciphertexts between plane positions and insert fresh
encryptions, so they need the public key alone.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from . import spatial
from .errors import DimensionMismatch, IntegrityError, PreconditionError
from .lwe import Ciphertext, LweParams, PublicKey, SecretKey, decrypt, encrypt

PLANES = 8
_WEIGHTS = (1 << np.arange(PLANES)).astype(np.int64)
CRC_BITS = 32


def to_planes(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    return ((v[..., None] >> np.arange(PLANES)) & 1).astype(np.int64)


def from_planes(bits) -> np.ndarray:
    return np.asarray(bits, dtype=np.int64) @ _WEIGHTS


@dataclass(frozen=True)
class EncryptedPair:
    ch: Ciphertext  # shape (8,), ch[0] encrypts the LSB of h
    cl: Ciphertext
    available: bool = True


@dataclass(frozen=True)
class MarkedEncryptedPair(EncryptedPair):
    pass


def encrypt_pair(pk: PublicKey, h: int, l: int, rng, h_fid=spatial.INF) -> EncryptedPair:
    if not (0 <= h <= 255 and 0 <= l <= 255):
        raise PreconditionError("h and l must lie in [0, 255]")
    ct = encrypt(pk, to_planes([h, l]), rng)
    return EncryptedPair(ct[0], ct[1], spatial.is_available(h, l, h_fid))


def _shift_in(pk, ch: Ciphertext, bits, rng) -> Ciphertext:
    # (c7 .. c1, Enc(b)): plane k+1 <- plane k, plane 0 <- fresh, old plane 7 dropped
    out = ch.copy()
    out.u[..., 1:, :] = ch.u[..., :-1, :]
    out.c[..., 1:] = ch.c[..., :-1]
    fresh = encrypt(pk, bits, rng)
    out.u[..., 0, :] = fresh.u
    out.c[..., 0] = fresh.c
    return out


def _shift_out(pk, ch: Ciphertext, rng) -> Ciphertext:
    # (Enc(0), c8' .. c2'): plane k <- plane k+1, plane 7 <- fresh Enc(0)
    out = ch.copy()
    out.u[..., :-1, :] = ch.u[..., 1:, :]
    out.c[..., :-1] = ch.c[..., 1:]
    fresh = encrypt(pk, np.zeros(ch.shape[:-1], dtype=np.int64), rng)
    out.u[..., -1, :] = fresh.u
    out.c[..., -1] = fresh.c
    return out


def embed_pair_encrypted(pk: PublicKey, ep: EncryptedPair, b: int, rng) -> MarkedEncryptedPair:
    if not ep.available:
        raise PreconditionError("pair is not available for embedding")
    return MarkedEncryptedPair(_shift_in(pk, ep.ch, b, rng), ep.cl, True)


def recover_pair_encrypted(pk: PublicKey, mp: MarkedEncryptedPair, rng) -> EncryptedPair:
    return EncryptedPair(_shift_out(pk, mp.ch, rng), mp.cl, mp.available)


def extract_bit_ciphertext(mp: MarkedEncryptedPair) -> Ciphertext:
    return mp.ch[0]


def decrypt_pair(sk: SecretKey, ep: EncryptedPair) -> tuple[int, int]:
    return int(from_planes(decrypt(sk, ep.ch))), int(from_planes(decrypt(sk, ep.cl)))


@dataclass(frozen=True)
class EncryptedImage:
    params: LweParams
    shape: tuple  # (rows, cols) of the plaintext image
    h_fid: int | None
    availability: spatial.AvailabilityMap
    perms: np.ndarray  # (rows, cols) uint16 row permutations
    h_ct: Ciphertext  # (pairs, 8)
    l_ct: Ciphertext  # (pairs, 8)
    payload_len: int = 0
    crc: bool = False

    def __post_init__(self):
        rows, cols = self.shape
        pairs = rows * cols // 2
        if self.h_ct.shape != (pairs, PLANES) or self.l_ct.shape != (pairs, PLANES):
            raise DimensionMismatch("ciphertext count does not match image shape")
        if self.availability.flags.shape != (rows, cols // 2) or self.perms.shape != (rows, cols):
            raise DimensionMismatch("side information does not match image shape")

    @property
    def embedded_bits(self) -> int:
        return self.payload_len + (CRC_BITS if self.crc and self.payload_len else 0)

    @property
    def capacity(self) -> int:
        return self.availability.count

    def slots(self) -> np.ndarray:
        """Pair indices carrying embedded bits, in row-major order."""
        return np.flatnonzero(self.availability.flags.reshape(-1))[: self.embedded_bits]


def encrypt_image(pk: PublicKey, image: np.ndarray, rng, h_fid=spatial.INF) -> EncryptedImage:
    sorted_image, perms = spatial.pvo_sort_image(image)
    h, l = spatial.image_to_hl(sorted_image)
    avail = spatial.AvailabilityMap(spatial.is_available(h, l, h_fid), h_fid)
    ct = encrypt(pk, np.stack([to_planes(h.reshape(-1)), to_planes(l.reshape(-1))]), rng)
    return EncryptedImage(pk.params, tuple(image.shape), h_fid, avail, perms, ct[0], ct[1])


def crc_bits(bits) -> np.ndarray:
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    crc = zlib.crc32(packed.tobytes()) ^ (len(bits) & 0xFFFFFFFF)
    return (crc >> np.arange(CRC_BITS)) & 1


def embed_image(pk: PublicKey, ei: EncryptedImage, payload, rng, crc: bool = False) -> EncryptedImage:
    """Embed payload bits into the first available pairs (row-major)."""
    if ei.payload_len:
        raise PreconditionError("image already carries a payload; recover it first")
    payload = np.asarray(payload, dtype=np.int64).reshape(-1)
    bits = np.concatenate([payload, crc_bits(payload)]) if crc and payload.size else payload
    if bits.size > ei.capacity:
        raise PreconditionError(f"payload of {bits.size} bits exceeds capacity {ei.capacity}")
    marked = replace(ei, payload_len=int(payload.size), crc=bool(crc and payload.size))
    slots = marked.slots()
    if slots.size == 0:
        return marked
    h_ct = ei.h_ct.copy()
    shifted = _shift_in(pk, ei.h_ct[slots], bits, rng)
    h_ct.u[slots], h_ct.c[slots] = shifted.u, shifted.c
    return replace(marked, h_ct=h_ct)


def recover_image(pk: PublicKey, ei: EncryptedImage, rng) -> EncryptedImage:
    """Server-side restoration; the result decrypts to the original image."""
    slots = ei.slots()
    h_ct = ei.h_ct.copy()
    if slots.size:
        restored = _shift_out(pk, ei.h_ct[slots], rng)
        h_ct.u[slots], h_ct.c[slots] = restored.u, restored.c
    return replace(ei, h_ct=h_ct, payload_len=0, crc=False)


def extract_ciphertexts(ei: EncryptedImage) -> Ciphertext:
    """Encrypted payload bits (LSB-plane ciphertexts of the marked pairs)."""
    return ei.h_ct[ei.slots()][:, 0]


def decrypt_hl(sk: SecretKey, ei: EncryptedImage):
    rows, cols = ei.shape
    h = from_planes(decrypt(sk, ei.h_ct)).reshape(rows, cols // 2)
    l = from_planes(decrypt(sk, ei.l_ct)).reshape(rows, cols // 2)
    return h, l


def user_decode(sk: SecretKey, ei: EncryptedImage):
    """Decrypt and undo the embedding.

    Returns ``(marked_image, payload_bits, recovered_image)``.
    """
    h, l = decrypt_hl(sk, ei)
    slots = ei.slots()
    hf = h.reshape(-1)
    bits = spatial.de_extract(hf[slots])
    payload = bits[: ei.payload_len]
    if ei.crc and not np.array_equal(bits[ei.payload_len:], crc_bits(payload)):
        raise IntegrityError("payload checksum mismatch (wrong secret key?)")
    try:
        marked_image = spatial.pvo_unsort_image(spatial.hl_to_image(h, l), ei.perms)
        hf[slots] = spatial.de_recover(hf[slots])
        recovered = spatial.pvo_unsort_image(spatial.hl_to_image(h, l), ei.perms)
    except PreconditionError as exc:
        raise IntegrityError(f"decrypted pairs are out of range (wrong secret key?): {exc}") from None
    return marked_image, payload.astype(np.uint8), recovered
