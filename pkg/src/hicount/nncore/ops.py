"""Batched forward/backward kernels for the fixed layer vocabulary.

All kernels take (N, ...) batches and return (output, cache); the cache
holds exactly what the matching backward needs. Convolution is im2col +
one batched GEMM, which is where essentially all training compute goes.
"""
from __future__ import annotations

import numpy as np


def _im2col3x3(x: np.ndarray) -> np.ndarray:
    # x (N,C,H,W), zero-pad 1 -> cols (N, C*9, H*W)
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((n, c, 3, 3, h, w), dtype=x.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[:, :, ky, kx] = xp[:, :, ky:ky + h, kx:kx + w]
    return cols.reshape(n, c * 9, h * w)


def _col2im3x3(dcols: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    n, c, h, w = shape
    dc = dcols.reshape(n, c, 3, 3, h, w)
    dxp = np.zeros((n, c, h + 2, w + 2), dtype=dcols.dtype)
    for ky in range(3):
        for kx in range(3):
            dxp[:, :, ky:ky + h, kx:kx + w] += dc[:, :, ky, kx]
    return dxp[:, :, 1:h + 1, 1:w + 1]


def conv3x3_forward(x, kernel, bias):
    n, c, h, w = x.shape
    co = kernel.shape[0]
    cols = _im2col3x3(x)
    wm = kernel.reshape(co, c * 9)
    y = np.matmul(wm, cols)  # (N, co, H*W)
    y += bias[:, None]
    return y.reshape(n, co, h, w), (x.shape, cols)


def conv3x3_backward(dy, kernel, cache):
    in_shape, cols = cache
    n, co = dy.shape[:2]
    c = in_shape[1]
    dym = dy.reshape(n, co, -1)
    dkernel = np.tensordot(dym, cols, axes=([0, 2], [0, 2])).reshape(kernel.shape)
    dbias = dym.sum(axis=(0, 2))
    dcols = np.matmul(kernel.reshape(co, c * 9).T, dym)
    dx = _col2im3x3(dcols, in_shape)
    return dx, dkernel, dbias


def maxpool2x2_forward(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    xv = x[:, :, :2 * ho, :2 * wo]
    quads = np.stack([xv[:, :, 0::2, 0::2], xv[:, :, 0::2, 1::2],
                      xv[:, :, 1::2, 0::2], xv[:, :, 1::2, 1::2]])
    winner = quads.argmax(axis=0)  # first max wins on ties
    y = np.take_along_axis(quads, winner[None], axis=0)[0]
    return y, (x.shape, winner)


def maxpool2x2_backward(dy, cache):
    in_shape, winner = cache
    n, c, ho, wo = dy.shape
    dx = np.zeros(in_shape, dtype=dy.dtype)
    for s, (a, b) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        mask = winner == s
        dx[:, :, a:a + 2 * ho:2, b:b + 2 * wo:2] += np.where(mask, dy, 0)
    return dx


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dy, mask):
    return np.where(mask, dy, 0)


def linear_forward(x, kernel, bias):
    xf = x.reshape(x.shape[0], -1)
    return xf @ kernel.T + bias, (x.shape, xf)


def linear_backward(dy, kernel, cache):
    in_shape, xf = cache
    dkernel = dy.T @ xf
    dbias = dy.sum(axis=0)
    dx = (dy @ kernel).reshape(in_shape)
    return dx, dkernel, dbias


def softmax_forward(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return p, p


def softmax_backward(dy, p):
    # Jacobian-vector product: dz = p * (dy - <dy, p>)
    inner = (dy * p).sum(axis=1, keepdims=True)
    return p * (dy - inner)


def _bin_edges(extent: int, bins: int) -> tuple[np.ndarray, np.ndarray]:
    # adaptive bins [floor(i*e/b), ceil((i+1)*e/b)); never empty for extent >= 1
    idx = np.arange(bins)
    starts = (idx * extent) // bins
    ends = -((-(idx + 1) * extent) // bins)
    return starts, np.maximum(ends, starts + 1)


def adaptive_maxpool(x: np.ndarray, p: int):
    """Max-pool a (C, h, w) map onto a fixed (C, p, p) grid.

    Bin boundaries overlap when h or w is not a multiple of p; sub-size
    maps replicate the nearest valid cell. Returns the pooled map and the
    flat argmax index per output cell (for gradient scatter).
    """
    c, h, w = x.shape
    r0, r1 = _bin_edges(h, p)
    c0, c1 = _bin_edges(w, p)
    kr = int((r1 - r0).max())
    kc = int((c1 - c0).max())
    # clip window indices into each bin; duplicated cells cannot win new maxima
    rows = np.minimum(r0[:, None] + np.arange(kr), r1[:, None] - 1)  # (p, kr)
    colsi = np.minimum(c0[:, None] + np.arange(kc), c1[:, None] - 1)  # (p, kc)
    gathered = x[:, rows[:, None, :, None], colsi[None, :, None, :]]  # (c,p,p,kr,kc)
    flat = gathered.reshape(c, p, p, kr * kc)
    win = flat.argmax(axis=3)
    y = np.take_along_axis(flat, win[..., None], axis=3)[..., 0]
    wr = rows[np.arange(p)[None, :, None], win // kc]
    wc = colsi[np.arange(p)[None, None, :], win % kc]
    argflat = wr * w + wc  # (c, p, p) flat index into h*w
    return y, argflat


def adaptive_maxpool_backward(dy: np.ndarray, argflat: np.ndarray, in_shape: tuple[int, int, int]):
    c, h, w = in_shape
    dx = np.zeros((c, h * w), dtype=dy.dtype)
    ci = np.repeat(np.arange(c), dy.shape[1] * dy.shape[2])
    np.add.at(dx, (ci, argflat.ravel()), dy.ravel())
    return dx.reshape(in_shape)


def roipool_layer_forward(x, p: int):
    # whole-map adaptive pooling; per-sample loop (used rarely, never hot)
    n = x.shape[0]
    ys, args = [], []
    for i in range(n):
        y, a = adaptive_maxpool(x[i], p)
        ys.append(y)
        args.append(a)
    return np.stack(ys), (x.shape, args)


def roipool_layer_backward(dy, cache):
    in_shape, args = cache
    dx = np.zeros(in_shape, dtype=dy.dtype)
    for i in range(in_shape[0]):
        dx[i] = adaptive_maxpool_backward(dy[i], args[i], in_shape[1:])
    return dx
