"""Pure-numpy kernels for conv/pool data movement (NHWC layout).

These are the fallback used when the compiled extension is not built.
Both backends must produce bit-identical outputs: every float addition
here happens in the same per-element order as in the compiled version
(col2im accumulates window contributions in (ki, kj)-major order, and
max-pooling breaks ties in favour of the first maximum in row-major
window order). Arrays may be float32 or float64; outputs keep the
input's dtype.
"""

import numpy as np


def im2col(xp: np.ndarray, k: int) -> np.ndarray:
    """Gather k*k patches of a padded (B, Hp, Wp, C) array.

    Returns (B*H*W, k*k*C) with H = Hp-k+1, W = Wp-k+1; row index is
    (b*H + i)*W + j and column index (ki*k + kj)*C + c.
    """
    B, Hp, Wp, C = xp.shape
    H, W = Hp - k + 1, Wp - k + 1
    out = np.empty((B, H, W, k, k, C), dtype=xp.dtype)
    for ki in range(k):
        for kj in range(k):
            out[:, :, :, ki, kj, :] = xp[:, ki:ki + H, kj:kj + W, :]
    return out.reshape(B * H * W, k * k * C)


def col2im_add(cols: np.ndarray, k: int, B: int, Hp: int, Wp: int, C: int) -> np.ndarray:
    """Scatter-add the inverse of :func:`im2col` back onto a padded array."""
    H, W = Hp - k + 1, Wp - k + 1
    out = np.zeros((B, Hp, Wp, C), dtype=cols.dtype)
    blocks = cols.reshape(B, H, W, k, k, C)
    for ki in range(k):
        for kj in range(k):
            out[:, ki:ki + H, kj:kj + W, :] += blocks[:, :, :, ki, kj, :]
    return out


def maxpool_forward(x: np.ndarray, k: int):
    """Non-overlapping k*k max pooling on (B, H, W, C); dims must divide by k.

    Returns (out, idx) where idx holds the flat in-window argmax
    (di*k + dj, first maximum wins).
    """
    B, H, W, C = x.shape
    Ho, Wo = H // k, W // k
    win = x.reshape(B, Ho, k, Wo, k, C).transpose(0, 1, 3, 2, 4, 5).reshape(B, Ho, Wo, k * k, C)
    idx = win.argmax(axis=3)
    out = np.take_along_axis(win, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return out, idx.astype(np.int64)


def maxpool_backward(grad_out: np.ndarray, idx: np.ndarray, k: int, H: int, W: int) -> np.ndarray:
    """Route pooled gradients back to the argmax positions."""
    B, Ho, Wo, C = grad_out.shape
    grad = np.zeros((B, H, W, C), dtype=grad_out.dtype)
    bi, oi, oj, ci = np.indices((B, Ho, Wo, C), sparse=True)
    grad[bi, oi * k + idx // k, oj * k + idx % k, ci] = grad_out
    return grad
