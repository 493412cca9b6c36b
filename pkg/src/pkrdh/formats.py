"""On-disk formats: binary PGM images, key files, ciphertext containers, PEK blocks.

All multi-byte integers are little-endian.  Z_q elements are stored as u32,
lengths and counts as u64, permutation indices as u16.  Sign factors and the
availability bitmap are packed one bit per entry, LSB first.
"""
from __future__ import annotations

import hashlib
import re
import struct
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FormatError, PkrdhError, SecurityWarning
from .lwe import Ciphertext, LweParams, PublicKey, SecretKey
from .pkr import PublicEmbeddingKey
from .sbed import PLANES, EncryptedImage
from .spatial import AvailabilityMap

VERSION = 1
KEY_MAGIC = b"PKRK"
CONTAINER_MAGIC = b"PKRC"
PEK_MAGIC = b"PKRP"

ROLE_SECRET = 0
ROLE_PUBLIC = 1

SCHEME_DE_SBED = 1
SCHEME_PKR_ER = 2
SCHEME_BITS = 3
SCHEME_NAMES = {SCHEME_DE_SBED: "DE-SBED", SCHEME_PKR_ER: "PKR-ER", SCHEME_BITS: "BITS"}

_PARAMS = struct.Struct("<QQQdd")
_U32 = np.dtype("<u4")
_U16 = np.dtype("<u2")


# --- PGM ----------------------------------------------------------------------

_PGM_HEADER = re.compile(rb"P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def parse_pgm(data: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(data)
    if m is None:
        raise FormatError("malformed PGM header (binary P5 expected)")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 8-bit (255) images")
    body = data[m.end():]
    size = width * height
    if len(body) < size:
        raise FormatError(f"truncated PGM data: {len(body)} of {size} bytes")
    if len(body) > size:
        raise FormatError(f"{len(body) - size} trailing bytes after PGM data")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def format_pgm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise FormatError("PGM output needs a 2-D uint8 array")
    height, width = image.shape
    return b"P5\n%d %d\n255\n" % (width, height) + image.tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def write_pgm(image: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(format_pgm(image))


# --- low level ----------------------------------------------------------------

class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError("length inconsistency: data truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct("<" + fmt)
        return s.unpack(self.take(s.size))

    def u8(self) -> int:
        return self.unpack("B")[0]

    def u64(self) -> int:
        return self.unpack("Q")[0]

    def array(self, dtype, count: int) -> np.ndarray:
        dtype = np.dtype(dtype)
        if count > len(self.data):  # cheap guard before multiplying huge counts
            raise FormatError("length inconsistency: declared count exceeds file size")
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).copy()

    def bits(self, count: int) -> np.ndarray:
        raw = np.frombuffer(self.take((count + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:count]

    def finish(self):
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes")


def _header(r: _Reader, magic: bytes):
    if bytes(r.take(4)) != magic:
        raise FormatError("bad magic")
    version = r.unpack("H")[0]
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")


def _pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def params_bytes(params: LweParams) -> bytes:
    return _PARAMS.pack(params.n, params.q, params.d, params.alpha, params.epsilon)


def _read_params(r: _Reader) -> LweParams:
    n, q, d, alpha, eps = r.unpack("QQQdd")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SecurityWarning)
            return LweParams(n, q, d, alpha, eps)
    except PkrdhError as exc:
        raise FormatError(f"invalid parameters: {exc}") from exc


def _zq(values) -> bytes:
    return np.ascontiguousarray(values, dtype=_U32).tobytes()


def _read_zq(r: _Reader, count: int, q: int) -> np.ndarray:
    arr = r.array(_U32, count)
    if arr.size and arr.max() >= q:
        raise FormatError("Z_q element out of range")
    return arr.astype(np.uint32)


def public_digest(pk: PublicKey) -> bytes:
    """8-byte SHA-256 fingerprint of the parameters and public key."""
    h = hashlib.sha256(params_bytes(pk.params))
    h.update(_zq(pk.A))
    h.update(_zq(pk.p))
    return h.digest()[:8]


# --- key files ----------------------------------------------------------------

@dataclass(frozen=True)
class KeyFile:
    role: int
    params: LweParams
    digest: bytes  # fingerprint of the (paired) public key
    key: Union[SecretKey, PublicKey]


def secret_keyfile(sk: SecretKey, pk: PublicKey) -> KeyFile:
    return KeyFile(ROLE_SECRET, sk.params, public_digest(pk), sk)


def public_keyfile(pk: PublicKey) -> KeyFile:
    return KeyFile(ROLE_PUBLIC, pk.params, public_digest(pk), pk)


def serialize_key(kf: KeyFile) -> bytes:
    out = [KEY_MAGIC, struct.pack("<HB", VERSION, kf.role), params_bytes(kf.params), kf.digest]
    if kf.role == ROLE_SECRET:
        out += [struct.pack("<Q", kf.params.n), _zq(kf.key.s)]
    else:
        count = kf.params.n * kf.params.d + kf.params.d
        out += [struct.pack("<Q", count), _zq(kf.key.A), _zq(kf.key.p)]
    return b"".join(out)


def deserialize_key(data: bytes) -> KeyFile:
    r = _Reader(data)
    _header(r, KEY_MAGIC)
    role = r.u8()
    if role not in (ROLE_SECRET, ROLE_PUBLIC):
        raise FormatError(f"unknown key role {role}")
    params = _read_params(r)
    digest = bytes(r.take(8))
    count = r.u64()
    n, d = params.n, params.d
    if role == ROLE_SECRET:
        if count != n:
            raise FormatError("length inconsistency: secret key length != n")
        key = SecretKey(params, _read_zq(r, n, params.q))
    else:
        if count != n * d + d:
            raise FormatError("length inconsistency: public key length != n*d + d")
        A = _read_zq(r, n * d, params.q).reshape(n, d)
        key = PublicKey(params, A, _read_zq(r, d, params.q))
        if public_digest(key) != digest:
            raise FormatError("digest mismatch: public key file corrupted")
    r.finish()
    return KeyFile(role, params, digest, key)


def save_key(kf: KeyFile, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_key(kf))


def load_key(path, role: int | None = None) -> KeyFile:
    with open(path, "rb") as fh:
        kf = deserialize_key(fh.read())
    if role is not None and kf.role != role:
        raise FormatError(f"expected a {'secret' if role == ROLE_SECRET else 'public'} key file")
    return kf


# --- PEK block ----------------------------------------------------------------

def serialize_pek(pek: PublicEmbeddingKey) -> bytes:
    head = PEK_MAGIC + struct.pack("<HQIQQ", VERSION, pek.modulus, pek.q_step, pek.n_bits, len(pek))
    return head + _pack_bits(pek.gamma == 1)


def _read_pek(r: _Reader) -> PublicEmbeddingKey:
    _header(r, PEK_MAGIC)
    q, step, n_bits, count = r.unpack("QIQQ")
    if n_bits < 1 or 2 ** (n_bits + 2) > q or step != q // 2 ** (n_bits + 2):
        raise FormatError("inconsistent PEK parameters")
    gamma = np.where(r.bits(count) == 1, 1, -1).astype(np.int8)
    return PublicEmbeddingKey(q, step, n_bits, gamma)


def deserialize_pek(data: bytes) -> PublicEmbeddingKey:
    r = _Reader(data)
    pek = _read_pek(r)
    r.finish()
    return pek


# --- ciphertext containers ------------------------------------------------------

@dataclass(frozen=True)
class PkrStream:
    ct: Ciphertext  # shape (count,)
    pek: PublicEmbeddingKey | None = None
    payload_bits: int = 0


@dataclass(frozen=True)
class Container:
    scheme: int
    params: LweParams
    digest: bytes
    body: Union[EncryptedImage, PkrStream, Ciphertext]

    def check_key(self, kf: KeyFile) -> None:
        if kf.digest != self.digest or kf.params != self.params:
            raise FormatError("digest mismatch: container was produced under a different key")


def _ct_bytes(ct: Ciphertext) -> bytes:
    return _zq(ct.u) + _zq(ct.c)


def _read_ct(r: _Reader, shape: tuple, params: LweParams) -> Ciphertext:
    count = int(np.prod(shape))
    u = _read_zq(r, count * params.n, params.q).reshape(shape + (params.n,))
    c = _read_zq(r, count, params.q).reshape(shape)
    return Ciphertext(u, c)


def _de_body(ei: EncryptedImage) -> bytes:
    rows, cols = ei.shape
    inf = ei.h_fid is None
    if not inf and not 0 <= ei.h_fid <= 255:
        raise FormatError("h_fid must be 0..255 or unlimited")
    return b"".join([
        struct.pack("<QQBBQB", rows, cols, int(inf), 0 if inf else ei.h_fid, ei.payload_len, int(ei.crc)),
        struct.pack("<Q", ei.availability.flags.size), _pack_bits(ei.availability.flags.reshape(-1)),
        np.ascontiguousarray(ei.perms, dtype=_U16).tobytes(),
        struct.pack("<Q", ei.h_ct.shape[0]), _ct_bytes(ei.h_ct), _ct_bytes(ei.l_ct),
    ])


def _read_de(r: _Reader, params: LweParams) -> EncryptedImage:
    rows, cols, inf, fid, payload_len, crc = r.unpack("QQBBQB")
    if cols % 2 or rows * cols > len(r.data):
        raise FormatError("implausible image dimensions")
    if r.u64() != rows * cols // 2:
        raise FormatError("length inconsistency: availability bitmap size")
    flags = r.bits(rows * cols // 2).astype(bool).reshape(rows, cols // 2)
    perms = r.array(_U16, rows * cols).reshape(rows, cols).astype(np.uint16)
    if not np.array_equal(np.sort(perms, axis=1), np.broadcast_to(np.arange(cols), (rows, cols))):
        raise FormatError("row permutation table is not a permutation")
    pairs = r.u64()
    if pairs != rows * cols // 2:
        raise FormatError("length inconsistency: pair count")
    h_ct = _read_ct(r, (pairs, PLANES), params)
    l_ct = _read_ct(r, (pairs, PLANES), params)
    h_fid = None if inf else fid
    ei = EncryptedImage(params, (rows, cols), h_fid, AvailabilityMap(flags, h_fid), perms, h_ct, l_ct,
                        payload_len, bool(crc))
    if ei.embedded_bits > ei.capacity:
        raise FormatError("length inconsistency: payload exceeds availability")
    return ei


def serialize_container(ctr: Container) -> bytes:
    head = CONTAINER_MAGIC + struct.pack("<HB", VERSION, ctr.scheme) + ctr.digest + params_bytes(ctr.params)
    body = ctr.body
    if ctr.scheme == SCHEME_DE_SBED:
        return head + _de_body(body)
    if ctr.scheme == SCHEME_PKR_ER:
        parts = [struct.pack("<Q", len(body.ct)), _ct_bytes(body.ct),
                 struct.pack("<QB", body.payload_bits, body.pek is not None)]
        if body.pek is not None:
            parts.append(serialize_pek(body.pek))
        return head + b"".join(parts)
    if ctr.scheme == SCHEME_BITS:
        return head + struct.pack("<Q", len(body)) + _ct_bytes(body)
    raise FormatError(f"unknown scheme {ctr.scheme}")


def deserialize_container(data: bytes) -> Container:
    r = _Reader(data)
    _header(r, CONTAINER_MAGIC)
    scheme = r.u8()
    digest = bytes(r.take(8))
    params = _read_params(r)
    if scheme == SCHEME_DE_SBED:
        body = _read_de(r, params)
    elif scheme in (SCHEME_PKR_ER, SCHEME_BITS):
        count = r.u64()
        if count * (params.n + 1) * 4 > len(data):
            raise FormatError("length inconsistency: declared count exceeds file size")
        ct = _read_ct(r, (count,), params)
        if scheme == SCHEME_BITS:
            body = ct
        else:
            payload_bits, has_pek = r.unpack("QB")
            pek = _read_pek(r) if has_pek else None
            if pek is not None and (len(pek) != count or pek.modulus != params.q):
                raise FormatError("length inconsistency: PEK does not match ciphertexts")
            if payload_bits and (pek is None or payload_bits > count * pek.n_bits):
                raise FormatError("length inconsistency: payload exceeds PEK capacity")
            body = PkrStream(ct, pek, payload_bits)
    else:
        raise FormatError(f"unknown scheme {scheme}")
    r.finish()
    return Container(scheme, params, digest, body)


def save_container(ctr: Container, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_container(ctr))


def load_container(path) -> Container:
    with open(path, "rb") as fh:
        return deserialize_container(fh.read())
