"""Plaintext difference expansion with pixel-value-ordering preprocessing.

Scalar helpers accept ints or numpy arrays; the image-level functions work on
2-D uint8 arrays whose width is even (pairs are consecutive, non-overlapping,
left to right inside each sorted row).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, PreconditionError

INF = None  # h_fid value meaning "no fidelity limit"


@dataclass(frozen=True)
class RowPermutation:
    """``sorted_row = row[indices]``."""
    indices: np.ndarray

    def inverse(self) -> "RowPermutation":
        inv = np.empty_like(self.indices)
        inv[self.indices] = np.arange(self.indices.size, dtype=self.indices.dtype)
        return RowPermutation(inv)


@dataclass(frozen=True)
class AvailabilityMap:
    flags: np.ndarray  # (rows, pairs_per_row) bool
    h_fid: int | None = INF

    @property
    def count(self) -> int:
        return int(self.flags.sum())


def pvo_sort_row(row):
    """Sort a row in descending order; ties keep their original order."""
    row = np.asarray(row)
    if row.size == 0:
        raise PreconditionError("row must be non-empty")
    idx = np.argsort(-row.astype(np.int64), kind="stable").astype(np.uint16)
    return row[idx], RowPermutation(idx)


def pvo_unsort_row(sorted_row, perm: RowPermutation):
    sorted_row = np.asarray(sorted_row)
    if sorted_row.shape != perm.indices.shape:
        raise DimensionMismatch("row and permutation lengths differ")
    out = np.empty_like(sorted_row)
    out[perm.indices] = sorted_row
    return out


def pvo_sort_image(image: np.ndarray):
    """Row-wise PVO.  Returns ``(sorted_image, perms)`` with ``perms[r]`` the row permutation."""
    perms = np.argsort(-image.astype(np.int64), axis=1, kind="stable").astype(np.uint16)
    return np.take_along_axis(image, perms.astype(np.intp), axis=1), perms


def pvo_unsort_image(sorted_image: np.ndarray, perms: np.ndarray) -> np.ndarray:
    if sorted_image.shape != perms.shape:
        raise DimensionMismatch("image and permutation table shapes differ")
    out = np.empty_like(sorted_image)
    np.put_along_axis(out, perms.astype(np.intp), sorted_image, axis=1)
    return out


def _check_gray(*vals):
    for v in vals:
        a = np.asarray(v)
        if np.any((a < 0) | (a > 255)):
            raise PreconditionError("gray values must lie in [0, 255]")


def pair_to_hl(X, Y):
    """Difference and floor-mean of a (post-PVO) pixel pair."""
    _check_gray(X, Y)
    X = np.asarray(X, dtype=np.int64)
    Y = np.asarray(Y, dtype=np.int64)
    if np.any(X < Y):
        raise PreconditionError("pair must satisfy X >= Y after PVO")
    h, l = X - Y, (X + Y) // 2
    return (int(h), int(l)) if h.ndim == 0 else (h, l)


def hl_to_pair(h, l):
    h = np.asarray(h, dtype=np.int64)
    l = np.asarray(l, dtype=np.int64)
    X = l + (h + 1) // 2
    Y = l - h // 2
    if np.any((X < 0) | (X > 255) | (Y < 0) | (Y > 255)):
        raise PreconditionError("reconstructed pair leaves [0, 255]; pair was not available")
    return (int(X), int(Y)) if X.ndim == 0 else (X, Y)


def _fid(h_fid):
    return kernels.INF_FID if h_fid is None else int(h_fid)


def is_available(h, l, h_fid=INF):
    """True where expanding ``h`` keeps both pixels in range for either bit and ``h <= h_fid``."""
    h = np.asarray(h, dtype=np.int64)
    l = np.asarray(l, dtype=np.int64)
    out = kernels.available_mask(h.reshape(-1), l.reshape(-1), _fid(h_fid)).reshape(h.shape)
    return bool(out) if out.ndim == 0 else out


def de_embed(h, b):
    return 2 * h + b


def de_extract(h_marked):
    return h_marked % 2


def de_recover(h_marked):
    return h_marked // 2


def image_to_hl(sorted_image: np.ndarray):
    """Split a sorted image into pairs; returns ``(h, l)`` each shaped (rows, cols // 2)."""
    if sorted_image.ndim != 2 or sorted_image.shape[1] % 2:
        raise PreconditionError("image must be 2-D with even width")
    X = sorted_image[:, 0::2].astype(np.int64)
    Y = sorted_image[:, 1::2].astype(np.int64)
    return pair_to_hl(X, Y)


def hl_to_image(h: np.ndarray, l: np.ndarray) -> np.ndarray:
    X, Y = hl_to_pair(h, l)
    out = np.empty((h.shape[0], h.shape[1] * 2), dtype=np.uint8)
    out[:, 0::2] = X
    out[:, 1::2] = Y
    return out


def build_availability_map(sorted_image: np.ndarray, h_fid=INF) -> AvailabilityMap:
    h, l = image_to_hl(sorted_image)
    return AvailabilityMap(is_available(h, l, h_fid), h_fid)


def embedding_capacity(image: np.ndarray, h_fid=INF) -> int:
    """Number of available pairs after PVO; this is the EC in bits."""
    sorted_image, _ = pvo_sort_image(image)
    return build_availability_map(sorted_image, h_fid).count


def embedding_rate(image: np.ndarray, h_fid=INF) -> float:
    return embedding_capacity(image, h_fid) / image.size


def embed_plain(image: np.ndarray, bits, h_fid=INF):
    """Reference plaintext pipeline: PVO, DE on the first available pairs, un-sort.

    Returns ``(marked_image, perms, availability)``.
    """
    sorted_image, perms = pvo_sort_image(image)
    avail = build_availability_map(sorted_image, h_fid)
    bits = np.asarray(bits, dtype=np.int64)
    slots = np.flatnonzero(avail.flags.reshape(-1))
    if bits.size > slots.size:
        raise PreconditionError(f"payload of {bits.size} bits exceeds capacity {slots.size}")
    h, l = image_to_hl(sorted_image)
    hf = h.reshape(-1)
    hf[slots[: bits.size]] = de_embed(hf[slots[: bits.size]], bits)
    return pvo_unsort_image(hl_to_image(h, l), perms), perms, avail
