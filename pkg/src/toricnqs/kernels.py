"""Hot numerical kernels, each in a numba and a pure-numpy flavour.

The public names (``conv2d_valid``, ``conv2d_grad_input``, ``conv2d_grad_weight``,
``hamiltonian_diagonal``, ``hamiltonian_matvec``, ``hamiltonian_coo``) are bound
to the numba versions unless ``TORICNQS_NUMBA=0``. Both flavours are importable
explicitly (``*_numba`` / ``*_numpy``) for testing and benchmarking.

Convolution conventions: ``xp`` is an already padded input of shape
``(B, Ci, H + KH - 1, W + KW - 1)`` and ``w`` has shape ``(Co, Ci, KH, KW)``;
the forward pass is a valid cross-correlation. Gradients follow the split
complex convention ``g = dl/dRe + i dl/dIm`` for a real loss ``l``, so they
carry a complex conjugate on the partner factor. Weight gradients are
returned per sample, shape ``(B, Co, Ci, KH, KW)``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import USE_NUMBA, njit

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range


# ---------------------------------------------------------------- convolutions


def _common(*arrays):
    dtype = np.result_type(*arrays)
    return [np.ascontiguousarray(a, dtype=dtype) for a in arrays]


@njit
def _conv2d_valid_loops(xp, w, out):
    B, Co, H, W = out.shape
    Ci, KH, KW = w.shape[1], w.shape[2], w.shape[3]
    for b in range(B):
        for o in range(Co):
            for i in range(Ci):
                for kh in range(KH):
                    for kw in range(KW):
                        wv = w[o, i, kh, kw]
                        if wv == 0:
                            continue
                        for y in range(H):
                            for x in range(W):
                                out[b, o, y, x] += wv * xp[b, i, y + kh, x + kw]


@njit
def _conv2d_grad_input_loops(g, w, gx):
    B, Co, H, W = g.shape
    Ci, KH, KW = w.shape[1], w.shape[2], w.shape[3]
    for b in range(B):
        for o in range(Co):
            for i in range(Ci):
                for kh in range(KH):
                    for kw in range(KW):
                        wv = np.conj(w[o, i, kh, kw])
                        if wv == 0:
                            continue
                        for y in range(H):
                            for x in range(W):
                                gx[b, i, y + kh, x + kw] += wv * g[b, o, y, x]


@njit
def _conv2d_grad_weight_loops(xp, g, gw):
    B, Co, H, W = g.shape
    Ci, KH, KW = gw.shape[2], gw.shape[3], gw.shape[4]
    for b in range(B):
        for o in range(Co):
            for i in range(Ci):
                for kh in range(KH):
                    for kw in range(KW):
                        acc = gw[b, o, i, kh, kw] * 0
                        for y in range(H):
                            for x in range(W):
                                acc += np.conj(xp[b, i, y + kh, x + kw]) * g[b, o, y, x]
                        gw[b, o, i, kh, kw] = acc


def conv2d_valid_numba(xp, w):
    xp, w = _common(xp, w)
    if xp.dtype.itemsize > 16 or xp.dtype == np.longdouble:
        # extended precision is only used by the finite-difference oracle
        return conv2d_valid_numpy(xp, w)
    B, _, Hp, Wp = xp.shape
    Co, _, KH, KW = w.shape
    out = np.zeros((B, Co, Hp - KH + 1, Wp - KW + 1), dtype=xp.dtype)
    _conv2d_valid_loops(xp, w, out)
    return out


def conv2d_grad_input_numba(g, w, padded_shape):
    g, w = _common(g, w)
    gx = np.zeros((g.shape[0], w.shape[1]) + tuple(padded_shape), dtype=g.dtype)
    _conv2d_grad_input_loops(g, w, gx)
    return gx


def conv2d_grad_weight_numba(xp, g, kernel_shape):
    xp, g = _common(xp, g)
    gw = np.zeros((g.shape[0], g.shape[1], xp.shape[1]) + tuple(kernel_shape), dtype=xp.dtype)
    _conv2d_grad_weight_loops(xp, g, gw)
    return gw


def conv2d_valid_numpy(xp, w):
    xp, w = _common(xp, w)
    KH, KW = w.shape[2:]
    win = sliding_window_view(xp, (KH, KW), axis=(2, 3))
    return np.einsum("bihwkl,oikl->bohw", win, w, optimize=True)


def conv2d_grad_input_numpy(g, w, padded_shape):
    g, w = _common(g, w)
    B, Co, H, W = g.shape
    KH, KW = w.shape[2:]
    gx = np.zeros((B, w.shape[1]) + tuple(padded_shape), dtype=g.dtype)
    wc = np.conj(w)
    for kh in range(KH):
        for kw in range(KW):
            gx[:, :, kh : kh + H, kw : kw + W] += np.einsum("oi,bohw->bihw", wc[:, :, kh, kw], g)
    return gx


def conv2d_grad_weight_numpy(xp, g, kernel_shape):
    xp, g = _common(xp, g)
    win = sliding_window_view(xp, tuple(kernel_shape), axis=(2, 3))
    return np.einsum("bihwkl,bohw->boikl", np.conj(win), g, optimize=True)


# ------------------------------------------------------------ Hamiltonian (ED)


def hamiltonian_diagonal_numpy(n_bits, plaq_masks, hz):
    idx = np.arange(1 << n_bits, dtype=np.int64)
    diag = np.zeros(idx.size)
    for m in plaq_masks:
        par = np.zeros(idx.size, dtype=np.int64)
        x = idx & m
        while np.any(x):
            par ^= x & 1
            x = x >> 1
        diag -= 1 - 2 * par
    if hz != 0.0:
        for i in range(n_bits):
            diag -= hz * (1 - 2 * ((idx >> i) & 1))
    return diag


@njit
def _popcount(x):
    # prange indices may be unsigned; uint64 - int64 promotes to float in numba
    x = np.int64(x)
    n = 0
    while x:
        n += 1
        x &= x - 1
    return n


@njit(parallel=True)
def hamiltonian_diagonal_numba(n_bits, plaq_masks, hz):
    dim = 1 << n_bits
    diag = np.empty(dim)
    for b in prange(dim):
        acc = 0.0
        for m in plaq_masks:
            acc -= 1 - 2 * (_popcount(b & m) & 1)
        if hz != 0.0:
            acc -= hz * (n_bits - 2 * _popcount(b))
        diag[b] = acc
    return diag


def hamiltonian_matvec_numpy(x, diag, vertex_masks, n_bits, hx, hy):
    """``y = H x`` in the computational basis (bit ``i`` set means ``s_i = -1``)."""
    idx = np.arange(x.size, dtype=np.int64)
    y = diag * x
    for m in vertex_masks:
        y -= x[idx ^ m]
    if hx != 0.0 or hy != 0.0:
        for i in range(n_bits):
            si = 1 - 2 * ((idx >> i) & 1)
            amp = -hx + 1j * hy * si if hy != 0.0 else -hx
            y = y + amp * x[idx ^ (1 << i)]
    return y


@njit(parallel=True)
def _matvec_real(x, diag, vertex_masks, n_bits, hx, y):
    for b in prange(x.size):
        acc = diag[b] * x[b]
        for m in vertex_masks:
            acc -= x[b ^ m]
        if hx != 0.0:
            for i in range(n_bits):
                acc -= hx * x[b ^ (1 << i)]
        y[b] = acc


@njit(parallel=True)
def _matvec_complex(x, diag, vertex_masks, n_bits, hx, hy, y):
    for b in prange(x.size):
        acc = diag[b] * x[b]
        for m in vertex_masks:
            acc -= x[b ^ m]
        for i in range(n_bits):
            si = 1 - 2 * ((b >> i) & 1)
            acc += (-hx + 1j * hy * si) * x[b ^ (1 << i)]
        y[b] = acc


def hamiltonian_matvec_numba(x, diag, vertex_masks, n_bits, hx, hy):
    if hy != 0.0 or np.iscomplexobj(x):
        x = np.ascontiguousarray(x, dtype=np.complex128)
        y = np.empty_like(x)
        _matvec_complex(x, diag, vertex_masks, n_bits, float(hx), float(hy), y)
    else:
        x = np.ascontiguousarray(x, dtype=np.float64)
        y = np.empty_like(x)
        _matvec_real(x, diag, vertex_masks, n_bits, float(hx), y)
    return y


def hamiltonian_coo_numpy(diag, vertex_masks, n_bits, hx, hy):
    """COO triplets ``(row, col, value)`` with ``value = <row|H|col>``."""
    dim = diag.size
    cols = np.arange(dim, dtype=np.int64)
    rows_l, cols_l, vals_l = [cols], [cols], [diag.astype(complex if hy else float)]
    for m in vertex_masks:
        rows_l.append(cols ^ m)
        cols_l.append(cols)
        vals_l.append(-np.ones(dim))
    if hx != 0.0 or hy != 0.0:
        for i in range(n_bits):
            si = 1 - 2 * ((cols >> i) & 1)
            rows_l.append(cols ^ (1 << i))
            cols_l.append(cols)
            vals_l.append(-hx - 1j * hy * si if hy else -hx * np.ones(dim))
    return np.concatenate(rows_l), np.concatenate(cols_l), np.concatenate(vals_l)


@njit
def _coo_loops(diag, vertex_masks, n_bits, hx, hy, rows, cols, vals):
    dim = diag.size
    k = 0
    single = hx != 0.0 or hy != 0.0
    for b in range(dim):
        rows[k] = b
        cols[k] = b
        vals[k] = diag[b]
        k += 1
        for m in vertex_masks:
            rows[k] = b ^ m
            cols[k] = b
            vals[k] = -1.0
            k += 1
        if single:
            for i in range(n_bits):
                si = 1 - 2 * ((b >> i) & 1)
                rows[k] = b ^ (1 << i)
                cols[k] = b
                vals[k] = -hx - 1j * hy * si
                k += 1


def hamiltonian_coo_numba(diag, vertex_masks, n_bits, hx, hy):
    dim = diag.size
    per = 1 + len(vertex_masks) + (n_bits if (hx != 0.0 or hy != 0.0) else 0)
    rows = np.empty(dim * per, dtype=np.int64)
    cols = np.empty(dim * per, dtype=np.int64)
    vals = np.empty(dim * per, dtype=np.complex128)
    _coo_loops(diag, vertex_masks, n_bits, float(hx), float(hy), rows, cols, vals)
    if hy == 0.0:
        vals = vals.real.copy()
    return rows, cols, vals


if USE_NUMBA:
    conv2d_valid = conv2d_valid_numba
    conv2d_grad_input = conv2d_grad_input_numba
    conv2d_grad_weight = conv2d_grad_weight_numba
    hamiltonian_diagonal = hamiltonian_diagonal_numba
    hamiltonian_matvec = hamiltonian_matvec_numba
    hamiltonian_coo = hamiltonian_coo_numba
else:
    conv2d_valid = conv2d_valid_numpy
    conv2d_grad_input = conv2d_grad_input_numpy
    conv2d_grad_weight = conv2d_grad_weight_numpy
    hamiltonian_diagonal = hamiltonian_diagonal_numpy
    hamiltonian_matvec = hamiltonian_matvec_numpy
    hamiltonian_coo = hamiltonian_coo_numpy
