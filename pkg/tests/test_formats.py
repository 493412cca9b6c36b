import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pkrdh import formats, sbed
from pkrdh.errors import FormatError
from pkrdh.formats import Container, PkrStream
from pkrdh.lwe import Ciphertext, PublicKey, SecretKey, keygen, toy_params
from pkrdh.pkr import PublicEmbeddingKey, pkr_encrypt

TOY = toy_params()


# --- PGM --------------------------------------------------------------------------

def test_pgm_zero():
    img = formats.parse_pgm(b"P5\n2 2\n255\n" + bytes(4))
    assert img.shape == (2, 2) and not img.any()


def test_pgm_comments_and_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7)).astype(np.uint8)
    data = b"P5\n# made by hand\n7 5\n# another\n255\n" + img.tobytes()
    assert np.array_equal(formats.parse_pgm(data), img)
    canonical = formats.format_pgm(img)
    path = tmp_path / "a.pgm"
    path.write_bytes(canonical)
    formats.write_pgm(formats.read_pgm(path), tmp_path / "b.pgm")
    assert (tmp_path / "b.pgm").read_bytes() == canonical


@pytest.mark.parametrize("data", [
    b"P5\n2 2\n65535\n" + bytes(8),      # maxval
    b"P5\n2 2\n255\n" + bytes(3),        # truncated
    b"P5\n2 2\n255\n" + bytes(5),        # trailing
    b"P2\n2 2\n255\n0 0 0 0",            # ascii variant
    b"P5\n2\n255\n" + bytes(4),          # malformed header
])
def test_pgm_rejects(data):
    with pytest.raises(FormatError):
        formats.parse_pgm(data)


def test_pgm_maxval_message():
    with pytest.raises(FormatError, match="maxval"):
        formats.parse_pgm(b"P5\n2 2\n65535\n" + bytes(8))


# --- random instances ----------------------------------------------------------

def _keys(seed):
    return keygen(TOY, np.random.default_rng(seed))


def _random_ct(rng, shape, params=TOY):
    return Ciphertext(rng.integers(0, params.q, shape + (params.n,)).astype(np.uint32),
                      rng.integers(0, params.q, shape).astype(np.uint32))


def _random_pek(rng, count, q=TOY.q):
    N = int(rng.integers(1, 4))
    return PublicEmbeddingKey(q, q // 2 ** (N + 2), N, rng.choice(np.array([-1, 1], np.int8), count))


def _random_de(rng, pk):
    rows, cols = int(rng.integers(1, 5)), 2 * int(rng.integers(1, 5))
    img = rng.integers(0, 256, (rows, cols)).astype(np.uint8)
    fid = [None, 0, 5, 255][int(rng.integers(4))]
    ei = sbed.encrypt_image(pk, img, rng, fid)
    k = int(rng.integers(0, ei.capacity + 1))
    crc = bool(rng.integers(2)) and k + sbed.CRC_BITS <= ei.capacity
    return sbed.embed_image(pk, ei, rng.integers(0, 2, k), rng, crc=crc)


def _same_ct(a, b):
    return np.array_equal(a.u, b.u) and np.array_equal(a.c, b.c) and a.u.dtype == b.u.dtype


def _same_pek(a, b):
    return (a.modulus, a.q_step, a.n_bits) == (b.modulus, b.q_step, b.n_bits) and np.array_equal(a.gamma, b.gamma)


seeds = st.integers(0, 2**32 - 1)
fast = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@fast
@given(seeds)
def test_key_round_trip(seed):
    sk, pk = _keys(seed)
    for kf in (formats.secret_keyfile(sk, pk), formats.public_keyfile(pk)):
        data = formats.serialize_key(kf)
        back = formats.deserialize_key(data)
        assert back.role == kf.role and back.params == kf.params and back.digest == kf.digest
        assert formats.serialize_key(back) == data
    assert np.array_equal(formats.deserialize_key(formats.serialize_key(formats.secret_keyfile(sk, pk))).key.s, sk.s)


@fast
@given(seeds, st.integers(0, 300))
def test_pek_round_trip(seed, count):
    pek = _random_pek(np.random.default_rng(seed), count)
    data = formats.serialize_pek(pek)
    assert _same_pek(formats.deserialize_pek(data), pek)
    assert formats.serialize_pek(formats.deserialize_pek(data)) == data


@fast
@given(seeds)
def test_container_round_trip(seed):
    rng = np.random.default_rng(seed)
    _, pk = _keys(seed)
    digest = formats.public_digest(pk)
    count = int(rng.integers(0, 40))
    pek = _random_pek(rng, count) if rng.integers(2) else None
    bits = int(rng.integers(0, count * pek.n_bits + 1)) if pek is not None else 0
    for ctr in (
        Container(formats.SCHEME_BITS, TOY, digest, _random_ct(rng, (count,))),
        Container(formats.SCHEME_PKR_ER, TOY, digest, PkrStream(_random_ct(rng, (count,)), pek, bits)),
        Container(formats.SCHEME_DE_SBED, TOY, digest, _random_de(rng, pk)),
    ):
        data = formats.serialize_container(ctr)
        back = formats.deserialize_container(data)
        assert (back.scheme, back.params, back.digest) == (ctr.scheme, ctr.params, ctr.digest)
        assert formats.serialize_container(back) == data
        if ctr.scheme == formats.SCHEME_DE_SBED:
            a, b = ctr.body, back.body
            assert _same_ct(a.h_ct, b.h_ct) and _same_ct(a.l_ct, b.l_ct)
            assert np.array_equal(a.perms, b.perms) and np.array_equal(a.availability.flags, b.availability.flags)
            assert (a.shape, a.h_fid, a.payload_len, a.crc) == (b.shape, b.h_fid, b.payload_len, b.crc)


# --- rejection ------------------------------------------------------------------

@pytest.fixture(scope="module")
def sample_files():
    rng = np.random.default_rng(1)
    sk, pk = _keys(1)
    ct, pek = pkr_encrypt(pk, sk, rng.integers(0, 2, 30), 1, rng)
    ctr = Container(formats.SCHEME_PKR_ER, TOY, formats.public_digest(pk), PkrStream(ct, pek))
    de = Container(formats.SCHEME_DE_SBED, TOY, formats.public_digest(pk), _random_de(rng, pk))
    return {
        "key": (formats.serialize_key(formats.public_keyfile(pk)), formats.deserialize_key),
        "skey": (formats.serialize_key(formats.secret_keyfile(sk, pk)), formats.deserialize_key),
        "pek": (formats.serialize_pek(pek), formats.deserialize_pek),
        "pkr": (formats.serialize_container(ctr), formats.deserialize_container),
        "de": (formats.serialize_container(de), formats.deserialize_container),
    }


@pytest.mark.parametrize("kind", ["key", "skey", "pek", "pkr", "de"])
def test_truncation_and_trailing(sample_files, kind):
    data, load = sample_files[kind]
    for cut in (0, 3, 6, len(data) // 2, len(data) - 1):
        with pytest.raises(FormatError):
            load(data[:cut])
    with pytest.raises(FormatError, match="trailing"):
        load(data + b"\0")


@pytest.mark.parametrize("kind", ["key", "pek", "pkr"])
def test_bad_magic_and_version(sample_files, kind):
    data, load = sample_files[kind]
    with pytest.raises(FormatError, match="magic"):
        load(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="version"):
        load(data[:4] + struct.pack("<H", 99) + data[6:])


def test_out_of_range_element(sample_files):
    data, load = sample_files["skey"]
    bad = data[:-4] + struct.pack("<I", TOY.q)
    with pytest.raises(FormatError):
        load(bad)


def test_digest_mismatch(tmp_path):
    rng = np.random.default_rng(3)
    sk, pk = _keys(3)
    _, pk2 = _keys(4)
    ctr = Container(formats.SCHEME_BITS, TOY, formats.public_digest(pk), _random_ct(rng, (3,)))
    ctr.check_key(formats.public_keyfile(pk))
    ctr.check_key(formats.secret_keyfile(sk, pk))
    with pytest.raises(FormatError, match="digest mismatch"):
        ctr.check_key(formats.public_keyfile(pk2))
    data = bytearray(formats.serialize_key(formats.public_keyfile(pk)))
    last = struct.unpack("<I", data[-4:])[0]
    data[-4:] = struct.pack("<I", (last + 1) % TOY.q)  # still in Z_q, but p changed
    with pytest.raises(FormatError, match="digest mismatch"):
        formats.deserialize_key(bytes(data))


def test_load_key_role(tmp_path):
    sk, pk = _keys(5)
    formats.save_key(formats.public_keyfile(pk), tmp_path / "pub")
    with pytest.raises(FormatError):
        formats.load_key(tmp_path / "pub", formats.ROLE_SECRET)
    assert formats.load_key(tmp_path / "pub", formats.ROLE_PUBLIC).role == formats.ROLE_PUBLIC


def test_gamma_bit_order():
    pek = PublicEmbeddingKey(257, 32, 1, np.array([1, -1, -1, 1, 1, 1, 1, 1, -1], np.int8))
    tail = formats.serialize_pek(pek)[-2:]
    assert tail == bytes([0b11111001, 0b0])


def test_zq_little_endian():
    sk = SecretKey(TOY, np.arange(TOY.n, dtype=np.uint32))
    _, pk = _keys(6)
    data = formats.serialize_key(formats.secret_keyfile(sk, pk))
    assert data[-4 * TOY.n:][:8] == struct.pack("<II", 0, 1)
