"""1D convolution kernels: numba-jitted hot loops with a pure-numpy fallback.

The numpy path is selected by setting the environment variable
``PROTOMM_DISABLE_NUMBA=1`` before import (or automatically when numba is
not importable).  Both paths implement the same contract and are compared
in ``benchmarks/bench_kernels.py`` and in the test suite.

Shapes follow the (batch, channels, time) convention:
    x  : (B, C_in, T)
    w  : (C_out, C_in, K)
    y  : (B, C_out, T_out)   with  T_out = (T + 2*pad - K) // stride + 1
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_DISABLED = os.environ.get("PROTOMM_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    if _DISABLED:
        raise ImportError("numba disabled by PROTOMM_DISABLE_NUMBA")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def _out_len(T: int, K: int, stride: int, pad: int) -> int:
    return (T + 2 * pad - K) // stride + 1


def _pad_time(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad)))


# ---------------------------------------------------------------------------
# pure-numpy path (stride tricks + einsum)
# ---------------------------------------------------------------------------

def _conv1d_forward_np(x, w, stride, pad):
    xp = _pad_time(x, pad)
    win = sliding_window_view(xp, w.shape[2], axis=2)[:, :, ::stride, :]
    return np.einsum("bitk,oik->bot", win, w, optimize=True)


def _conv1d_grad_weight_np(x, gy, K, stride, pad):
    xp = _pad_time(x, pad)
    win = sliding_window_view(xp, K, axis=2)[:, :, ::stride, :]
    return np.einsum("bot,bitk->oik", gy, win, optimize=True)


def _conv1d_grad_input_np(gy, w, T, stride, pad):
    B, _, T_out = gy.shape
    C_in, K = w.shape[1], w.shape[2]
    gxp = np.zeros((B, C_in, T + 2 * pad), dtype=gy.dtype)
    for k in range(K):
        contrib = np.einsum("bot,oi->bit", gy, w[:, :, k], optimize=True)
        gxp[:, :, k : k + stride * T_out : stride] += contrib
    return gxp[:, :, pad : pad + T] if pad else gxp


# ---------------------------------------------------------------------------
# numba path: per-sample im2col feeding BLAS matmuls, parallel over the batch
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _im2col(xpb, K, stride, T_out):  # pragma: no cover - jitted
        C_in = xpb.shape[0]
        col = np.empty((C_in * K, T_out), dtype=xpb.dtype)
        for i in range(C_in):
            for k in range(K):
                row = i * K + k
                for t in range(T_out):
                    col[row, t] = xpb[i, t * stride + k]
        return col

    @njit(cache=True)
    def _flatten_filters(w):  # pragma: no cover - jitted
        C_out, C_in, K = w.shape
        w2 = np.empty((C_out, C_in * K), dtype=w.dtype)
        for o in range(C_out):
            for i in range(C_in):
                for k in range(K):
                    w2[o, i * K + k] = w[o, i, k]
        return w2

    @njit(cache=True, parallel=True)
    def _conv1d_forward_nb(xp, w, stride):  # pragma: no cover - jitted
        B, C_in, Tp = xp.shape
        C_out, _, K = w.shape
        T_out = (Tp - K) // stride + 1
        w2 = _flatten_filters(w)
        y = np.empty((B, C_out, T_out), dtype=xp.dtype)
        for b in prange(B):
            y[b] = np.dot(w2, _im2col(xp[b], K, stride, T_out))
        return y

    @njit(cache=True)
    def _conv1d_grad_weight_nb(xp, gy, K, stride):  # pragma: no cover
        B, C_in, _ = xp.shape
        C_out, T_out = gy.shape[1], gy.shape[2]
        gw2 = np.zeros((C_out, C_in * K), dtype=gy.dtype)
        for b in range(B):
            col = _im2col(xp[b], K, stride, T_out)
            gw2 += np.dot(np.ascontiguousarray(gy[b]), col.T)
        return gw2.reshape(C_out, C_in, K)

    @njit(cache=True, parallel=True)
    def _conv1d_grad_input_nb(gy, w, Tp, stride):  # pragma: no cover
        B, C_out, T_out = gy.shape
        C_in, K = w.shape[1], w.shape[2]
        w2 = _flatten_filters(w)
        gxp = np.zeros((B, C_in, Tp), dtype=gy.dtype)
        for b in prange(B):
            gcol = np.dot(w2.T, np.ascontiguousarray(gy[b]))
            for i in range(C_in):
                for k in range(K):
                    row = i * K + k
                    for t in range(T_out):
                        gxp[b, i, t * stride + k] += gcol[row, t]
        return gxp


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def conv1d_forward(x: np.ndarray, w: np.ndarray, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlation of x with filter bank w along the time axis."""
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: input has {x.shape[1]}, filters expect {w.shape[1]}")
    if _out_len(x.shape[2], w.shape[2], stride, pad) < 1:
        raise ValueError(
            f"input too short: T={x.shape[2]} with K={w.shape[2]}, stride={stride}, pad={pad}"
        )
    if HAVE_NUMBA:
        return _conv1d_forward_nb(_pad_time(x, pad), w, stride)
    return _conv1d_forward_np(x, w, stride, pad)


def conv1d_grad_weight(x: np.ndarray, gy: np.ndarray, K: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Gradient of the conv output w.r.t. the filter bank."""
    if HAVE_NUMBA:
        return _conv1d_grad_weight_nb(_pad_time(x, pad), gy, K, stride)
    return _conv1d_grad_weight_np(x, gy, K, stride, pad)


def conv1d_grad_input(gy: np.ndarray, w: np.ndarray, T: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Gradient of the conv output w.r.t. the (unpadded) input."""
    if HAVE_NUMBA:
        gxp = _conv1d_grad_input_nb(gy, w, T + 2 * pad, stride)
        return gxp[:, :, pad : pad + T] if pad else gxp
    return _conv1d_grad_input_np(gy, w, T, stride, pad)
