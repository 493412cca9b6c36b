"""Hot element-wise kernels.

Every kernel exists twice: a loop version compiled with numba (``*_nb``) and a
vectorised numpy version (``*_np``).  The public name is bound to one of them
according to :data:`pkrdh._accel.USE_NUMBA`; both are kept importable so the
test-suite and ``benchmarks/bench_kernels.py`` can compare them.

All kernels take int64 arrays of Z_q residues in ``[0, q)``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

INF_FID = -1  # h_fid sentinel for "no fidelity limit"


# --- centered representative ------------------------------------------------

@njit
def _centered_nb(x, q):
    out = np.empty(x.shape[0], dtype=np.int64)
    for i in range(x.shape[0]):
        v = x[i]
        out[i] = v if 2 * v < q else v - q
    return out


def _centered_np(x, q):
    return np.where(2 * x < q, x, x - q)


# --- threshold decryption ---------------------------------------------------

@njit
def _decrypt_bits_nb(lam, q):
    lo = q // 4
    hi = (3 * q) // 4
    out = np.empty(lam.shape[0], dtype=np.uint8)
    for i in range(lam.shape[0]):
        v = lam[i]
        out[i] = 1 if lo <= v < hi else 0
    return out


def _decrypt_bits_np(lam, q):
    return ((lam >= q // 4) & (lam < (3 * q) // 4)).astype(np.uint8)


# --- sign factor of the public embedding key --------------------------------

@njit
def _sign_factors_nb(lam, q):
    q4 = q // 4
    q2 = q // 2
    q34 = (3 * q) // 4
    out = np.empty(lam.shape[0], dtype=np.int8)
    for i in range(lam.shape[0]):
        v = lam[i]
        if v < q4 or (q2 <= v < q34):
            out[i] = 1
        else:
            out[i] = -1
    return out


def _sign_factors_np(lam, q):
    q4, q2, q34 = q // 4, q // 2, (3 * q) // 4
    plus = (lam < q4) | ((lam >= q2) & (lam < q34))
    return np.where(plus, 1, -1).astype(np.int8)


# --- sub-region index (payload extraction) -----------------------------------

@njit
def _extract_levels_nb(lam, q, q_step):
    q4 = q // 4
    q2 = q // 2
    q34 = (3 * q) // 4
    out = np.empty(lam.shape[0], dtype=np.int64)
    for i in range(lam.shape[0]):
        v = lam[i]
        if v < q4:
            out[i] = v // q_step
        elif v < q2:
            out[i] = -((v - q2) // q_step) - 1
        elif v < q34:
            out[i] = (v - q2) // q_step
        else:
            out[i] = -((v - q) // q_step) - 1
    return out


def _extract_levels_np(lam, q, q_step):
    q4, q2, q34 = q // 4, q // 2, (3 * q) // 4
    # ceil(a / s) == -((-a) // s)
    return np.select(
        [lam < q4, lam < q2, lam < q34],
        [lam // q_step, -((lam - q2) // q_step) - 1, (lam - q2) // q_step],
        -((lam - q) // q_step) - 1,
    ).astype(np.int64)


# --- DE availability ----------------------------------------------------------

@njit
def _available_mask_nb(h, l, h_fid):
    out = np.empty(h.shape[0], dtype=np.bool_)
    for i in range(h.shape[0]):
        hv = h[i]
        lv = l[i]
        bound = min(2 * (255 - lv), 2 * lv + 1)
        ok = abs(hv) <= bound and abs(2 * hv) <= bound and abs(2 * hv + 1) <= bound
        if h_fid >= 0 and hv > h_fid:
            ok = False
        out[i] = ok
    return out


def _available_mask_np(h, l, h_fid):
    bound = np.minimum(2 * (255 - l), 2 * l + 1)
    ok = (np.abs(h) <= bound) & (np.abs(2 * h) <= bound) & (np.abs(2 * h + 1) <= bound)
    if h_fid >= 0:
        ok &= h <= h_fid
    return ok


# --- quantization variable ---------------------------------------------------

@njit
def _quantize_nb(u, c, s, q):
    k, n = u.shape
    out = np.empty(k, dtype=np.int64)
    for i in range(k):
        acc = 0
        for j in range(n):
            acc += u[i, j] * s[j]
        out[i] = (c[i] - acc) % q
    return out


def _quantize_np(u, c, s, q):
    return (c - u @ s) % q


# --- mean SSIM over square sliding windows -----------------------------------

@njit
def _ssim_nb(a, b, win, c1, c2):
    rows, cols = a.shape
    npix = win * win
    total = 0.0
    count = 0
    for r in range(rows - win + 1):
        for c in range(cols - win + 1):
            sa = 0.0
            sb = 0.0
            saa = 0.0
            sbb = 0.0
            sab = 0.0
            for i in range(r, r + win):
                for j in range(c, c + win):
                    x = a[i, j]
                    y = b[i, j]
                    sa += x
                    sb += y
                    saa += x * x
                    sbb += y * y
                    sab += x * y
            ma = sa / npix
            mb = sb / npix
            va = saa / npix - ma * ma
            vb = sbb / npix - mb * mb
            cov = sab / npix - ma * mb
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
            count += 1
    return total / count


def _window_sums(x, win):
    ii = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    ii[1:, 1:] = x.cumsum(0).cumsum(1)
    return ii[win:, win:] - ii[:-win, win:] - ii[win:, :-win] + ii[:-win, :-win]


def _ssim_np(a, b, win, c1, c2):
    npix = win * win
    ma = _window_sums(a, win) / npix
    mb = _window_sums(b, win) / npix
    va = _window_sums(a * a, win) / npix - ma * ma
    vb = _window_sums(b * b, win) / npix - mb * mb
    cov = _window_sums(a * b, win) / npix - ma * mb
    smap = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    return float(smap.mean())


if USE_NUMBA:
    centered = _centered_nb
    decrypt_bits = _decrypt_bits_nb
    sign_factors = _sign_factors_nb
    extract_levels = _extract_levels_nb
    available_mask = _available_mask_nb
    quantize_rows = _quantize_nb
    ssim_mean = _ssim_nb
else:
    centered = _centered_np
    decrypt_bits = _decrypt_bits_np
    sign_factors = _sign_factors_np
    extract_levels = _extract_levels_np
    available_mask = _available_mask_np
    quantize_rows = _quantize_np
    ssim_mean = _ssim_np

PAIRS = {
    "centered": (_centered_nb, _centered_np),
    "decrypt_bits": (_decrypt_bits_nb, _decrypt_bits_np),
    "sign_factors": (_sign_factors_nb, _sign_factors_np),
    "extract_levels": (_extract_levels_nb, _extract_levels_np),
    "available_mask": (_available_mask_nb, _available_mask_np),
    "quantize_rows": (_quantize_nb, _quantize_np),
    "ssim_mean": (_ssim_nb, _ssim_np),
}
