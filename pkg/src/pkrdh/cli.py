"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 format error, 4 crypto/precondition error.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings

import numpy as np

from . import analysis, formats, pkr, sbed
from .errors import FormatError, PkrdhError, SecurityWarning
from .formats import Container, PkrStream
from .lwe import LweParams, decrypt, default_params, keygen, toy_params

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_CRYPTO = 4


def _bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")


def _bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write(path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _h_fid(text: str):
    if text.lower() in ("inf", "infinity", "none"):
        return None
    value = int(text)
    if not 0 <= value <= 255:
        raise argparse.ArgumentTypeError("h-fid must be 0..255 or 'inf'")
    return value


def _params_from_args(args) -> LweParams:
    base = toy_params() if args.profile == "toy" else default_params()
    if args.n is None and args.q is None and args.d is None:
        return base if args.alpha is None else base.with_alpha(args.alpha)
    n = base.n if args.n is None else args.n
    q = args.q if args.q is not None or args.n is not None else base.q
    d = args.d if args.d is not None or args.n is not None else base.d
    return LweParams.derive(n, alpha=args.alpha, q=q, d=d)


def _expect(ctr: Container, *schemes) -> None:
    if ctr.scheme not in schemes:
        names = " or ".join(formats.SCHEME_NAMES[s] for s in schemes)
        raise FormatError(f"expected a {names} container, got {formats.SCHEME_NAMES.get(ctr.scheme)}")


def _rng(args):
    return np.random.default_rng(args.seed)


def cmd_keygen(args):
    params = _params_from_args(args)
    sk, pk = keygen(params, _rng(args))
    formats.save_key(formats.secret_keyfile(sk, pk), args.out_secret)
    formats.save_key(formats.public_keyfile(pk), args.out_public)
    print(f"n={params.n} q={params.q} d={params.d} alpha={params.alpha:.6e}")


def cmd_encrypt_image(args):
    kf = formats.load_key(args.public_key, formats.ROLE_PUBLIC)
    image = formats.read_pgm(args.inp)
    ei = sbed.encrypt_image(kf.key, image, _rng(args), args.h_fid)
    formats.save_container(Container(formats.SCHEME_DE_SBED, kf.params, kf.digest, ei), args.out)
    print(f"pairs={ei.h_ct.shape[0]} capacity={ei.capacity} ER={ei.capacity / image.size:.4f}bpp")


def cmd_de_embed(args):
    kf = formats.load_key(args.public_key, formats.ROLE_PUBLIC)
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_DE_SBED)
    ctr.check_key(kf)
    bits = _bytes_to_bits(_read(args.payload_file))
    marked = sbed.embed_image(kf.key, ctr.body, bits, _rng(args), crc=args.crc)
    formats.save_container(Container(ctr.scheme, ctr.params, ctr.digest, marked), args.out)
    print(f"embedded={bits.size} capacity={marked.capacity}")


def cmd_de_recover(args):
    kf = formats.load_key(args.public_key, formats.ROLE_PUBLIC)
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_DE_SBED)
    ctr.check_key(kf)
    restored = sbed.recover_image(kf.key, ctr.body, _rng(args))
    formats.save_container(Container(ctr.scheme, ctr.params, ctr.digest, restored), args.out)


def cmd_de_extract_ct(args):
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_DE_SBED)
    bits_ct = sbed.extract_ciphertexts(ctr.body)
    formats.save_container(Container(formats.SCHEME_BITS, ctr.params, ctr.digest, bits_ct), args.out)
    print(f"ciphertexts={len(bits_ct)}")


def cmd_decode(args):
    kf = formats.load_key(args.secret_key, formats.ROLE_SECRET)
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_DE_SBED)
    ctr.check_key(kf)
    marked, payload, recovered = sbed.user_decode(kf.key, ctr.body)
    if args.out_marked:
        formats.write_pgm(marked, args.out_marked)
    if args.out_recovered:
        formats.write_pgm(recovered, args.out_recovered)
    if args.out_payload:
        _write(args.out_payload, _bits_to_bytes(payload))
    print(f"payload_bits={payload.size}")


def cmd_pkr_encrypt(args):
    skf = formats.load_key(args.secret_key, formats.ROLE_SECRET)
    pkf = formats.load_key(args.public_key, formats.ROLE_PUBLIC)
    if skf.digest != pkf.digest:
        raise FormatError("digest mismatch: secret and public key are not a pair")
    bits = _bytes_to_bits(_read(args.in_bits))
    ct, pek = pkr.pkr_encrypt(pkf.key, skf.key, bits, args.N, _rng(args))
    formats.save_container(Container(formats.SCHEME_PKR_ER, pkf.params, pkf.digest, PkrStream(ct, pek)), args.out)
    print(f"ciphertexts={len(ct)} N={args.N} q_step={pek.q_step}")


def cmd_pkr_embed(args):
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_PKR_ER)
    stream = ctr.body
    if stream.pek is None:
        raise PkrdhError("container has no public embedding key")
    if stream.payload_bits:
        raise PkrdhError("container already carries a payload")
    bits = _bytes_to_bits(_read(args.payload_file))
    m_e = pkr.pack_payload(bits, stream.pek.n_bits, len(stream.ct))
    marked = pkr.pkr_embed(stream.ct, stream.pek, m_e)
    out = PkrStream(marked, stream.pek, int(bits.size))
    formats.save_container(Container(ctr.scheme, ctr.params, ctr.digest, out), args.out)
    print(f"embedded={bits.size} capacity={len(stream.ct) * stream.pek.n_bits}")


def cmd_pkr_extract(args):
    kf = formats.load_key(args.secret_key, formats.ROLE_SECRET)
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_PKR_ER)
    ctr.check_key(kf)
    stream = ctr.body
    if stream.pek is not None and stream.pek.n_bits != args.N:
        raise PkrdhError(f"--N {args.N} does not match the container PEK (N={stream.pek.n_bits})")
    m_e = pkr.pkr_extract(kf.key, stream.ct, args.N)
    bits = pkr.unpack_payload(m_e, args.N, stream.payload_bits)
    _write(args.out_payload, _bits_to_bytes(bits))
    print(f"payload_bits={bits.size}")


def cmd_pkr_decrypt(args):
    kf = formats.load_key(args.secret_key, formats.ROLE_SECRET)
    ctr = formats.load_container(args.inp)
    _expect(ctr, formats.SCHEME_PKR_ER, formats.SCHEME_BITS)
    ctr.check_key(kf)
    ct = ctr.body.ct if ctr.scheme == formats.SCHEME_PKR_ER else ctr.body
    bits = np.asarray(decrypt(kf.key, ct))
    _write(args.out_bits, _bits_to_bytes(bits))
    print(f"bits={bits.size}")


def _scalars(ctr: Container) -> np.ndarray:
    body = ctr.body
    if ctr.scheme == formats.SCHEME_DE_SBED:
        return np.concatenate([body.h_ct.c.reshape(-1), body.l_ct.c.reshape(-1)])
    ct = body.ct if ctr.scheme == formats.SCHEME_PKR_ER else body
    return ct.c.reshape(-1)


def cmd_stats(args):
    rows = []
    if args.mode in ("psnr", "ssim"):
        if len(args.inputs) != 2:
            raise argparse.ArgumentTypeError(f"--mode {args.mode} needs exactly two PGM inputs")
        a, b = (formats.read_pgm(p) for p in args.inputs)
        value = analysis.psnr(a, b) if args.mode == "psnr" else analysis.ssim(a, b)
        rows.append((args.mode, "-", value))
    else:
        ctrs = [formats.load_container(p) for p in args.inputs]
        digest = analysis.params_digest(ctrs[0].params)
        q = ctrs[0].params.q
        if args.mode == "entropy":
            for path, ctr in zip(args.inputs, ctrs):
                rows.append((f"entropy:{path}", digest, analysis.entropy(_scalars(ctr), ctr.params.q)))
            rows.append(("entropy_ideal", digest, analysis.ideal_entropy(q)))
        elif args.mode == "gamma":
            for path, ctr in zip(args.inputs, ctrs):
                _expect(ctr, formats.SCHEME_PKR_ER)
                if ctr.body.pek is None:
                    raise PkrdhError(f"{path} has no public embedding key")
                rows.append((f"gamma_plus:{path}", digest, analysis.gamma_balance(ctr.body.pek)))
        else:
            samples = np.concatenate([_scalars(c) for c in ctrs])
            hist = analysis.histogram(samples, args.bins, 0, q)
            if args.csv:
                analysis.write_histogram_csv(args.csv, hist)
            else:
                for lo, hi, n in hist.rows():
                    print(f"{lo:g},{hi:g},{n}")
            return
    if args.csv:
        analysis.write_metrics_csv(args.csv, rows)
    for metric, digest, value in rows:
        print(f"{metric},{digest},{'inf' if isinstance(value, float) and math.isinf(value) else value}")


def cmd_bound(args):
    params = _params_from_args(args)
    print(f"alpha_min={params.alpha_min:.6e}")
    print(f"q_step={pkr.q_step(params, args.N)}")
    print(f"error_bound={pkr.error_bound(params, args.N):.6e}")
    print(f"error_bound_printed={pkr.error_bound(params, args.N, printed=True):.6e}")


def _param_flags(p, alpha_only=False):
    p.add_argument("--profile", choices=("default", "toy"), default="default")
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkrdh", description="Reversible data hiding in LWE ciphertexts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key pair")
    _param_flags(p)
    p.add_argument("--out-secret", required=True)
    p.add_argument("--out-public", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt-image", help="PVO + bitplane encryption of a PGM image")
    p.add_argument("--public-key", required=True)
    p.add_argument("--in", "--in.pgm", dest="inp", required=True)
    p.add_argument("--h-fid", type=_h_fid, default=10)
    p.add_argument("--out", "--out.ctr", dest="out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_encrypt_image)

    p = sub.add_parser("de-embed", help="embed payload bits into an encrypted image (public)")
    p.add_argument("--public-key", required=True)
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--payload-file", required=True)
    p.add_argument("--out", "--out.ctr", dest="out", required=True)
    p.add_argument("--crc", action="store_true", help="append a CRC-32 of the payload")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_de_embed)

    p = sub.add_parser("de-recover", help="restore the unmarked ciphertext (public)")
    p.add_argument("--public-key", required=True)
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--out", "--out.ctr", dest="out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_de_recover)

    p = sub.add_parser("de-extract-ct", help="export the encrypted payload bits (public)")
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--out", "--out.ctbits", dest="out", required=True)
    p.set_defaults(func=cmd_de_extract_ct)

    p = sub.add_parser("decode", help="decrypt, extract and recover a DE-SBED container")
    p.add_argument("--secret-key", required=True)
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--out-marked", "--out-marked.pgm", dest="out_marked")
    p.add_argument("--out-recovered", "--out-recovered.pgm", dest="out_recovered")
    p.add_argument("--out-payload")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("pkr-encrypt", help="bounded encryption of a bit file plus PEK generation")
    p.add_argument("--secret-key", required=True)
    p.add_argument("--public-key", required=True)
    p.add_argument("--in-bits", required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--out", "--out.ctr", dest="out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_pkr_encrypt)

    p = sub.add_parser("pkr-embed", help="recode ciphertexts with the in-container PEK (public)")
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--payload-file", required=True)
    p.add_argument("--out", "--out.ctr", dest="out", required=True)
    p.set_defaults(func=cmd_pkr_embed)

    p = sub.add_parser("pkr-extract", help="extract the embedded payload")
    p.add_argument("--secret-key", required=True)
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--out-payload", required=True)
    p.set_defaults(func=cmd_pkr_extract)

    p = sub.add_parser("pkr-decrypt", help="decrypt a PKR-ER or encrypted-bits container")
    p.add_argument("--secret-key", required=True)
    p.add_argument("--in", "--in.ctr", dest="inp", required=True)
    p.add_argument("--out-bits", required=True)
    p.set_defaults(func=cmd_pkr_decrypt)

    p = sub.add_parser("stats", help="entropy / histogram / gamma / psnr / ssim to CSV")
    p.add_argument("--mode", choices=("entropy", "hist", "gamma", "psnr", "ssim"), required=True)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--csv")
    p.add_argument("--bins", type=int, default=64)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bound", help="print the PKR-ER error bound and alpha_min")
    _param_flags(p)
    p.add_argument("--N", type=int, default=1)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SecurityWarning)
            args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"pkrdh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"pkrdh: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except PkrdhError as exc:
        print(f"pkrdh: error: {exc}", file=sys.stderr)
        return EXIT_CRYPTO
    return 0


if __name__ == "__main__":
    sys.exit(main())
