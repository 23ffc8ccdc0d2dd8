"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. Both are always importable (``*_jit`` and
``*_numpy``) so they can be cross-checked and benchmarked; the unsuffixed
names are bound to whichever path ``NEWSFLOW_NO_NUMBA`` selects.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# tran53 permutation used by every Nilsimsa implementation.
TRAN = np.array([
    0x02, 0xD6, 0x9E, 0x6F, 0xF9, 0x1D, 0x04, 0xAB, 0xD0, 0x22, 0x16, 0x1F, 0xD8, 0x73, 0xA1, 0xAC,
    0x3B, 0x70, 0x62, 0x96, 0x1E, 0x6E, 0x8F, 0x39, 0x9D, 0x05, 0x14, 0x4A, 0xA6, 0xBE, 0xAE, 0x0E,
    0xCF, 0xB9, 0x9C, 0x9A, 0xC7, 0x68, 0x13, 0xE1, 0x2D, 0xA4, 0xEB, 0x51, 0x8D, 0x64, 0x6B, 0x50,
    0x23, 0x80, 0x03, 0x41, 0xEC, 0xBB, 0x71, 0xCC, 0x7A, 0x86, 0x7F, 0x98, 0xF2, 0x36, 0x5E, 0xEE,
    0x8E, 0xCE, 0x4F, 0xB8, 0x32, 0xB6, 0x5F, 0x59, 0xDC, 0x1B, 0x31, 0x4C, 0x7B, 0xF0, 0x63, 0x01,
    0x6C, 0xBA, 0x07, 0xE8, 0x12, 0x77, 0x49, 0x3C, 0xDA, 0x46, 0xFE, 0x2F, 0x79, 0x1C, 0x9B, 0x30,
    0xE3, 0x00, 0x06, 0x7E, 0x2E, 0x0F, 0x38, 0x33, 0x21, 0xAD, 0xA5, 0x54, 0xCA, 0xA7, 0x29, 0xFC,
    0x5A, 0x47, 0x69, 0x7D, 0xC5, 0x95, 0xB5, 0xF4, 0x0B, 0x90, 0xA3, 0x81, 0x6D, 0x25, 0x55, 0x35,
    0xF5, 0x75, 0x74, 0x0A, 0x26, 0xBF, 0x19, 0x5C, 0x1A, 0xC6, 0xFF, 0x99, 0x5D, 0x84, 0xAA, 0x66,
    0x3E, 0xAF, 0x78, 0xB3, 0x20, 0x43, 0xC1, 0xED, 0x24, 0xEA, 0xE6, 0x3F, 0x18, 0xF3, 0xA0, 0x42,
    0x57, 0x08, 0x53, 0x60, 0xC3, 0xC0, 0x83, 0x40, 0x82, 0xD7, 0x09, 0xBD, 0x44, 0x2A, 0x67, 0xA8,
    0x93, 0xE0, 0xC2, 0x56, 0x9F, 0xD9, 0xDD, 0x85, 0x15, 0xB4, 0x8A, 0x27, 0x28, 0x92, 0x76, 0xDE,
    0xEF, 0xF8, 0xB2, 0xB7, 0xC9, 0x3D, 0x45, 0x94, 0x4B, 0x11, 0x0D, 0x65, 0xD5, 0x34, 0x8B, 0x91,
    0x0C, 0xFA, 0x87, 0xE9, 0x7C, 0x5B, 0xB1, 0x4D, 0xE5, 0xD4, 0xCB, 0x10, 0xA2, 0x17, 0x89, 0xBC,
    0xDB, 0xB0, 0xE2, 0x97, 0x88, 0x52, 0xF7, 0x48, 0xD3, 0x61, 0x2C, 0x3A, 0x2B, 0xD1, 0x8C, 0xFB,
    0xF1, 0xCD, 0xE4, 0x6A, 0xE7, 0xA9, 0xFD, 0xC4, 0x37, 0xC8, 0xD2, 0xF6, 0xDF, 0x58, 0x72, 0x4E,
], dtype=np.int64)


# --------------------------------------------------------------------------
# Nilsimsa trigram accumulation
# --------------------------------------------------------------------------

@njit
def _tran3(tran, a, b, c, n):
    return ((tran[(a + n) & 255] ^ (tran[b] * (n + n + 1))) + tran[c ^ tran[n]]) & 255


def _nilsimsa_loop(data, tran):
    acc = np.zeros(256, dtype=np.int64)
    w0 = -1
    w1 = -1
    w2 = -1
    w3 = -1
    for k in range(data.shape[0]):
        ch = np.int64(data[k])
        if w1 > -1:
            acc[_tran3(tran, ch, w0, w1, 0)] += 1
        if w2 > -1:
            acc[_tran3(tran, ch, w0, w2, 1)] += 1
            acc[_tran3(tran, ch, w1, w2, 2)] += 1
        if w3 > -1:
            acc[_tran3(tran, ch, w0, w3, 3)] += 1
            acc[_tran3(tran, ch, w1, w3, 4)] += 1
            acc[_tran3(tran, ch, w2, w3, 5)] += 1
            acc[_tran3(tran, w3, w0, ch, 6)] += 1
            acc[_tran3(tran, w3, w2, ch, 7)] += 1
        w3 = w2
        w2 = w1
        w1 = w0
        w0 = ch
    return acc


_nilsimsa_loop_jit = njit(_nilsimsa_loop)


def _tran3_vec(a, b, c, n):
    return ((TRAN[(a + n) & 255] ^ (TRAN[b] * (2 * n + 1))) + TRAN[c ^ TRAN[n]]) & 255


def nilsimsa_accumulate_numpy(data):
    """Accumulator counts for a uint8 buffer, vectorised over window positions."""
    x = np.asarray(data, dtype=np.int64)
    n = x.shape[0]
    parts = []
    if n >= 3:
        c, p0, p1 = x[2:], x[1:-1], x[:-2]
        parts.append(_tran3_vec(c, p0, p1, 0))
    if n >= 4:
        c, p0, p1, p2 = x[3:], x[2:-1], x[1:-2], x[:-3]
        parts.append(_tran3_vec(c, p0, p2, 1))
        parts.append(_tran3_vec(c, p1, p2, 2))
    if n >= 5:
        c, p0, p1, p2, p3 = x[4:], x[3:-1], x[2:-2], x[1:-3], x[:-4]
        parts.append(_tran3_vec(c, p0, p3, 3))
        parts.append(_tran3_vec(c, p1, p3, 4))
        parts.append(_tran3_vec(c, p2, p3, 5))
        parts.append(_tran3_vec(p3, p0, c, 6))
        parts.append(_tran3_vec(p3, p2, c, 7))
    if not parts:
        return np.zeros(256, dtype=np.int64)
    return np.bincount(np.concatenate(parts), minlength=256).astype(np.int64)


def nilsimsa_accumulate_jit(data):
    return _nilsimsa_loop_jit(np.asarray(data, dtype=np.uint8), TRAN)


# --------------------------------------------------------------------------
# Sparse (CSR) products for logistic regression
# --------------------------------------------------------------------------

@njit
def _csr_matvec_loop(indptr, indices, data, w):
    n = indptr.shape[0] - 1
    out = np.zeros(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * w[indices[k]]
        out[i] = s
    return out


@njit
def _csr_rmatvec_loop(indptr, indices, data, v, n_features):
    out = np.zeros(n_features, dtype=np.float64)
    n = indptr.shape[0] - 1
    for i in range(n):
        vi = v[i]
        for k in range(indptr[i], indptr[i + 1]):
            out[indices[k]] += data[k] * vi
    return out


def _row_ids(indptr):
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def csr_matvec_numpy(indptr, indices, data, w):
    n = indptr.shape[0] - 1
    return np.bincount(_row_ids(indptr), weights=data * w[indices], minlength=n).astype(np.float64)


def csr_rmatvec_numpy(indptr, indices, data, v, n_features):
    rows = _row_ids(indptr)
    return np.bincount(indices, weights=data * v[rows], minlength=n_features).astype(np.float64)


def csr_matvec_jit(indptr, indices, data, w):
    return _csr_matvec_loop(indptr, indices, data, w)


def csr_rmatvec_jit(indptr, indices, data, v, n_features):
    return _csr_rmatvec_loop(indptr, indices, data, v, n_features)


if USE_NUMBA:
    nilsimsa_accumulate = nilsimsa_accumulate_jit
    csr_matvec = csr_matvec_jit
    csr_rmatvec = csr_rmatvec_jit
else:
    nilsimsa_accumulate = nilsimsa_accumulate_numpy
    csr_matvec = csr_matvec_numpy
    csr_rmatvec = csr_rmatvec_numpy
