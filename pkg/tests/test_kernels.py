"""Numba and numpy conv paths must agree with each other and with a
brute-force oracle; gradients must match central finite differences."""

import numpy as np
import pytest

from protomm import kernels


def conv1d_oracle(x, w, stride, pad):
    B, C_in, T = x.shape
    C_out, _, K = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    T_out = (T + 2 * pad - K) // stride + 1
    y = np.zeros((B, C_out, T_out))
    for b in range(B):
        for o in range(C_out):
            for t in range(T_out):
                for i in range(C_in):
                    for k in range(K):
                        y[b, o, t] += xp[b, i, t * stride + k] * w[o, i, k]
    return y


@pytest.mark.parametrize("stride,pad,K,T", [(1, 0, 3, 10), (2, 5, 11, 40), (1, 2, 5, 7), (3, 1, 3, 12)])
def test_forward_matches_oracle(stride, pad, K, T):
    rng = np.random.default_rng(42)
    x = rng.standard_normal((2, 3, T))
    w = rng.standard_normal((4, 3, K))
    y = kernels.conv1d_forward(x, w, stride, pad)
    np.testing.assert_allclose(y, conv1d_oracle(x, w, stride, pad), atol=1e-10)


def test_numpy_and_numba_paths_agree():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 2, 30))
    w = rng.standard_normal((5, 2, 11))
    gy_shape = kernels.conv1d_forward(x, w, 2, 5).shape
    gy = rng.standard_normal(gy_shape)
    for fn_np, fn in [
        (lambda: kernels._conv1d_forward_np(x, w, 2, 5), lambda: kernels.conv1d_forward(x, w, 2, 5)),
        (lambda: kernels._conv1d_grad_weight_np(x, gy, 11, 2, 5), lambda: kernels.conv1d_grad_weight(x, gy, 11, 2, 5)),
        (lambda: kernels._conv1d_grad_input_np(gy, w, 30, 2, 5), lambda: kernels.conv1d_grad_input(gy, w, 30, 2, 5)),
    ]:
        np.testing.assert_allclose(fn(), fn_np(), atol=1e-10)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 2, 16))
    w = rng.standard_normal((3, 2, 5))
    stride, pad = 2, 2
    gy = rng.standard_normal(kernels.conv1d_forward(x, w, stride, pad).shape)

    def loss(x_, w_):
        return float((kernels.conv1d_forward(x_, w_, stride, pad) * gy).sum())

    gw = kernels.conv1d_grad_weight(x, gy, 5, stride, pad)
    gx = kernels.conv1d_grad_input(gy, w, 16, stride, pad)
    eps = 1e-6
    for arr, grad in [(w, gw), (x, gx)]:
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + eps
            up = loss(x, w)
            arr[idx] = orig - eps
            down = loss(x, w)
            arr[idx] = orig
            fd = (up - down) / (2 * eps)
            assert abs(fd - grad[idx]) < 1e-5 * max(1.0, abs(fd))


def test_too_short_input_rejected():
    x = np.zeros((1, 1, 2))
    w = np.zeros((1, 1, 5))
    with pytest.raises(ValueError, match="too short"):
        kernels.conv1d_forward(x, w, stride=1, pad=0)


def test_channel_mismatch_rejected():
    with pytest.raises(ValueError, match="channel"):
        kernels.conv1d_forward(np.zeros((1, 2, 10)), np.zeros((1, 3, 3)), 1, 1)
