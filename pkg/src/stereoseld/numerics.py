"""Dense-tensor kernels for the model forward pass.

Row-major numpy arrays (float32 for inference, float64 in tests) are the
tensor type; every op here is pure and is covered by a naive-loop oracle in
the test suite. Convolutions use cross-correlation semantics (no kernel
flip), which is also the convention of the weight file format.
"""

from __future__ import annotations

import numpy as np


def _check_float(name: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.dtype not in (np.float32, np.float64):
        raise ValueError(f"{name}: expected float32/float64, got {x.dtype}")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = _check_float("matmul a", a)
    b = _check_float("matmul b", b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul: expected 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    return a @ b


def softmax_rows(x: np.ndarray) -> np.ndarray:
    x = _check_float("softmax_rows", x)
    if x.ndim != 2:
        raise ValueError(f"softmax_rows: expected R x C matrix, got {x.shape}")
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def conv2d(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """3x3 cross-correlation, zero padding 1, stride 1. x: C x H x W, w: O x C x 3 x 3."""
    x = _check_float("conv2d x", x)
    w = _check_float("conv2d w", w)
    if x.ndim != 3 or w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ValueError(f"conv2d: expected CxHxW and OxCx3x3, got {x.shape}, {w.shape}")
    if x.shape[0] != w.shape[1]:
        raise ValueError(f"conv2d: channel mismatch, input {x.shape[0]} vs kernel {w.shape[1]}")
    c, h, wid = x.shape
    o = w.shape[0]
    # one GEMM per kernel tap over the padded-width grid: every shifted image
    # is a contiguous slice of the flattened zero-padded buffer, so the input
    # is never repacked (the 2-element tail absorbs the largest shift)
    wp = wid + 2
    flat = np.zeros((c, (h + 2) * wp + 2), dtype=x.dtype)
    flat[:, : (h + 2) * wp].reshape(c, h + 2, wp)[:, 1 : h + 1, 1 : wid + 1] = x
    span = h * wp
    acc = np.empty((o, span), dtype=x.dtype)
    tmp = np.empty_like(acc)
    taps = np.ascontiguousarray(w.transpose(2, 3, 0, 1))  # 3,3,O,C
    first = True
    for dy in range(3):
        for dx in range(3):
            off = dy * wp + dx
            np.matmul(taps[dy, dx], flat[:, off : off + span], out=acc if first else tmp)
            if not first:
                acc += tmp
            first = False
    out = acc.reshape(o, h, wp)[:, :, :wid]
    if bias is not None:
        out = out + bias.reshape(-1, 1, 1)
    return np.ascontiguousarray(out)


def depthwise_conv1d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Per-channel 1-D cross-correlation with 'same' padding. x: T x D, kernels: D x K (K odd)."""
    x = _check_float("depthwise_conv1d x", x)
    kernels = _check_float("depthwise_conv1d kernels", kernels)
    if x.ndim != 2 or kernels.ndim != 2:
        raise ValueError(f"depthwise_conv1d: expected TxD and DxK, got {x.shape}, {kernels.shape}")
    if x.shape[1] != kernels.shape[0]:
        raise ValueError(f"depthwise_conv1d: channel mismatch, {x.shape[1]} vs {kernels.shape[0]}")
    k = kernels.shape[1]
    if k % 2 == 0:
        raise ValueError(f"depthwise_conv1d: even kernel size {k} cannot be centred")
    pad = (k - 1) // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=0)  # T,D,K
    out = np.einsum("tdk,dk->td", win, kernels)
    if bias is not None:
        out = out + bias
    return out


def avgpool2d_stride2(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling, stride 2; ragged edges average over the cells present."""
    x = _check_float("avgpool2d_stride2", x)
    if x.ndim != 3:
        raise ValueError(f"avgpool2d_stride2: expected CxHxW, got {x.shape}")
    c, h, w = x.shape
    ho, wo = (h + 1) // 2, (w + 1) // 2
    acc = np.zeros((c, ho, wo), dtype=x.dtype)
    cnt = np.zeros((ho, wo), dtype=x.dtype)
    for di in (0, 1):
        for dj in (0, 1):
            sub = x[:, di::2, dj::2]
            acc[:, : sub.shape[1], : sub.shape[2]] += sub
            cnt[: sub.shape[1], : sub.shape[2]] += 1
    return acc / cnt


def norm_infer(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
    eps: float,
) -> np.ndarray:
    """(x - mean) / sqrt(var + eps) * gamma + beta, with numpy broadcasting.

    Serves batch norm (stored running stats) and layer norm (stats computed
    from x by the caller).
    """
    x = _check_float("norm_infer", x)
    if eps <= 0:
        raise ValueError(f"norm_infer: eps must be > 0, got {eps}")
    var = np.asarray(var)
    if np.any(var < 0):
        raise ValueError("norm_infer: negative variance")
    # factored to two passes over x; algebraically (x - mean)/sqrt(var+eps)*gamma + beta
    scale = gamma / np.sqrt(var + eps)
    return x * scale + (beta - mean * scale)
