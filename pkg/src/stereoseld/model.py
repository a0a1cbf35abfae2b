"""Inference forward pass: CNN encoder, Conformer stack, cross-modal fusion.

The encoder maps the 4 x 800 x 64 feature stack through four residual CNN
blocks (each two 3x3 convs, stride-2 average pooling) into a 50 x 512
sequence, then four self-attention Conformer layers. A cross-modal block
(queries from the running audio stream, keys/values from the other modality)
fuses external audio embeddings, then - when visual tokens are supplied -
two more fuse the pooled visual tokens. A feed-forward head emits
T x C x 3 x 4 multi-track DOA/distance/on-screen vectors, lanes 0..2 through
tanh, lane 3 as a logit.

Weights live in a flat name -> array map; conv weights use cross-correlation
semantics. All norms are inference-mode affine maps: batch-norm entries carry
stored running statistics, layer norms compute per-row statistics on the fly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .rng import SplitMix64, derive_seed

LN_EPS = 1e-5
BN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    n_classes: int = 13
    in_channels: int = 4
    cnn_channels: tuple[int, ...] = (64, 128, 256, 512)
    d_model: int = 512
    n_heads: int = 8
    ffn_mult: int = 4
    conv_kernel: int = 51
    n_conformer: int = 4
    n_cmc_audio: int = 1
    n_cmc_visual: int = 2
    clap_dim: int = 512
    visual_dim: int = 768
    visual_tokens: int = 577
    n_tracks: int = 3
    tanh_head: bool = True

    @property
    def head_out(self) -> int:
        return self.n_classes * self.n_tracks * 4


# ---------------------------------------------------------------------------
# elementwise pieces


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def swish(x):
    return x * sigmoid(x)


def glu(x):
    half = x.shape[-1] // 2
    return x[..., :half] * sigmoid(x[..., half:])


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return nx.norm_infer(x, gamma, beta, mean, var, LN_EPS)


def linear(x: np.ndarray, w: dict, prefix: str) -> np.ndarray:
    return nx.matmul(x, w[f"{prefix}.w"].T) + w[f"{prefix}.b"]


# ---------------------------------------------------------------------------
# CNN encoder


def _bn2d(x: np.ndarray, w: dict, prefix: str) -> np.ndarray:
    shape = (-1, 1, 1)
    return nx.norm_infer(
        x,
        w[f"{prefix}.gamma"].reshape(shape),
        w[f"{prefix}.beta"].reshape(shape),
        w[f"{prefix}.mean"].reshape(shape),
        w[f"{prefix}.var"].reshape(shape),
        BN_EPS,
    )


def cnn_stack(features: np.ndarray, w: dict, cfg: ModelConfig) -> np.ndarray:
    """Four residual conv blocks with stride-2 pooling; C x T x F in,
    T/16 x d_model out after frequency-mean pooling."""
    x = np.asarray(features, dtype=np.float32)
    if x.ndim != 3 or x.shape[0] != cfg.in_channels:
        raise ValueError(f"expected {cfg.in_channels}xTxF features, got {x.shape}")
    for i in range(len(cfg.cnn_channels)):
        p = f"cnn.{i}"
        y = nx.conv2d(x, w[f"{p}.conv1.w"], w[f"{p}.conv1.b"])
        y = _bn2d(y, w, f"{p}.bn1")
        np.maximum(y, 0.0, out=y)
        y = nx.conv2d(y, w[f"{p}.conv2.w"], w[f"{p}.conv2.b"])
        y = _bn2d(y, w, f"{p}.bn2")
        c_in, h, wid = x.shape
        res = np.matmul(w[f"{p}.proj.w"], x.reshape(c_in, h * wid)).reshape(-1, h, wid)
        y += res
        np.maximum(y, 0.0, out=y)
        x = nx.avgpool2d_stride2(y)
    # C x T x F -> T x C after mean over the frequency axis
    return np.ascontiguousarray(x.mean(axis=2).T)


# ---------------------------------------------------------------------------
# Conformer sublayers


def _ffn(x: np.ndarray, w: dict, prefix: str) -> np.ndarray:
    h = layer_norm(x, w[f"{prefix}.ln.g"], w[f"{prefix}.ln.b"])
    h = swish(linear(h, w, f"{prefix}.lin1"))
    return linear(h, w, f"{prefix}.lin2")


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    t, d = x.shape
    return x.reshape(t, n_heads, d // n_heads).transpose(1, 0, 2)


def _attention_core(q_in: np.ndarray, kv_in: np.ndarray, w: dict, prefix: str, n_heads: int):
    """Scaled dot-product cross-attention; returns (output, per-head weights)."""
    q = _split_heads(linear(q_in, w, f"{prefix}.wq"), n_heads)
    k = _split_heads(linear(kv_in, w, f"{prefix}.wk"), n_heads)
    v = _split_heads(linear(kv_in, w, f"{prefix}.wv"), n_heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    outs = []
    atts = []
    for h in range(n_heads):
        att = nx.softmax_rows((nx.matmul(q[h], k[h].T) * scale).astype(q.dtype))
        atts.append(att)
        outs.append(nx.matmul(att, v[h]))
    merged = np.concatenate(outs, axis=1)
    return linear(merged, w, f"{prefix}.wo"), np.stack(atts)


def _mhsa(x: np.ndarray, w: dict, prefix: str, n_heads: int) -> np.ndarray:
    xn = layer_norm(x, w[f"{prefix}.ln.g"], w[f"{prefix}.ln.b"])
    out, _ = _attention_core(xn, xn, w, prefix, n_heads)
    return out


def cross_attention(alpha: np.ndarray, beta: np.ndarray, w: dict, prefix: str, n_heads: int):
    an = layer_norm(alpha, w[f"{prefix}.ln_q.g"], w[f"{prefix}.ln_q.b"])
    bn = layer_norm(beta, w[f"{prefix}.ln_kv.g"], w[f"{prefix}.ln_kv.b"])
    return _attention_core(an, bn, w, prefix, n_heads)


def _conv_module(x: np.ndarray, w: dict, prefix: str) -> np.ndarray:
    h = layer_norm(x, w[f"{prefix}.ln.g"], w[f"{prefix}.ln.b"])
    h = glu(linear(h, w, f"{prefix}.pw1"))
    h = nx.depthwise_conv1d(h, w[f"{prefix}.dw.w"], w[f"{prefix}.dw.b"])
    h = nx.norm_infer(
        h,
        w[f"{prefix}.bn.gamma"],
        w[f"{prefix}.bn.beta"],
        w[f"{prefix}.bn.mean"],
        w[f"{prefix}.bn.var"],
        BN_EPS,
    )
    return linear(swish(h), w, f"{prefix}.pw2")


def conformer_layer(x: np.ndarray, w: dict, prefix: str, n_heads: int = 8) -> np.ndarray:
    """Standard macaron layer: half FFN, self-attention, depthwise conv,
    half FFN, final layer norm; residual throughout."""
    x = x + 0.5 * _ffn(x, w, f"{prefix}.ffn1")
    x = x + _mhsa(x, w, f"{prefix}.att", n_heads)
    x = x + _conv_module(x, w, f"{prefix}.conv")
    x = x + 0.5 * _ffn(x, w, f"{prefix}.ffn2")
    return layer_norm(x, w[f"{prefix}.final_ln.g"], w[f"{prefix}.final_ln.b"])


def cmc_block(
    alpha: np.ndarray,
    beta: np.ndarray,
    w: dict,
    prefix: str,
    n_heads: int = 8,
    return_attention: bool = False,
):
    """Cross-modal variant: both streams get their own entry half-FFN, the
    attention draws queries from alpha and keys/values from beta, and the
    remaining sublayers run on the alpha stream only."""
    if alpha.shape[1] != beta.shape[1]:
        raise ValueError(f"modality dims differ: {alpha.shape[1]} vs {beta.shape[1]}")
    a = alpha + 0.5 * _ffn(alpha, w, f"{prefix}.ffn1a")
    b = beta + 0.5 * _ffn(beta, w, f"{prefix}.ffn1b")
    att_out, att = cross_attention(a, b, w, f"{prefix}.att", n_heads)
    a = a + att_out
    a = a + _conv_module(a, w, f"{prefix}.conv")
    a = a + 0.5 * _ffn(a, w, f"{prefix}.ffn2")
    out = layer_norm(a, w[f"{prefix}.final_ln.g"], w[f"{prefix}.final_ln.b"])
    return (out, att) if return_attention else out


# ---------------------------------------------------------------------------
# full model


def seld_encoder(features: np.ndarray, w: dict, cfg: ModelConfig) -> np.ndarray:
    x = cnn_stack(features, w, cfg)
    for i in range(cfg.n_conformer):
        x = conformer_layer(x, w, f"conformer.{i}", cfg.n_heads)
    return x


def visual_pool_project(frames, w: dict) -> np.ndarray:
    """Token-wise mean over frames, then the 768 -> 512 linear map."""
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3 or frames.shape[0] == 0:
        raise ValueError(f"expected at least one frame of tokens, got shape {frames.shape}")
    pooled = frames.mean(axis=0)
    return linear(pooled, w, "visual_proj")


def forward(
    features: np.ndarray,
    clap: np.ndarray,
    visual,
    w: dict,
    cfg: ModelConfig,
) -> np.ndarray:
    """Full forward pass -> T x C x 3 x 4. `visual` may be None (audio-only
    path: the visual fusion blocks are skipped entirely)."""
    clap = np.asarray(clap, dtype=np.float32)
    if clap.ndim != 2 or clap.shape[0] < 1:
        raise ValueError(f"expected T_clap x D embedding, got {clap.shape}")
    if clap.shape[1] != cfg.clap_dim:
        raise ValueError(f"clap dim {clap.shape[1]} does not match config {cfg.clap_dim}")
    if cfg.clap_dim != cfg.d_model:
        clap = linear(clap, w, "clap_proj")
    x = seld_encoder(features, w, cfg)
    for i in range(cfg.n_cmc_audio):
        x = cmc_block(x, clap, w, f"cmc_a.{i}", cfg.n_heads)
    if visual is not None:
        v = visual_pool_project(visual, w)
        for i in range(cfg.n_cmc_visual):
            x = cmc_block(x, v, w, f"cmc_v.{i}", cfg.n_heads)
    h = relu(linear(x, w, "head.lin1"))
    out = linear(h, w, "head.lin2").reshape(x.shape[0], cfg.n_classes, cfg.n_tracks, 4)
    if cfg.tanh_head:
        out = np.concatenate([np.tanh(out[..., :3]), out[..., 3:]], axis=-1)
    return np.ascontiguousarray(out, dtype=np.float32)


# ---------------------------------------------------------------------------
# parameter table and deterministic initialisation


def _norm_shapes(prefix: str, dim: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.g": (dim,), f"{prefix}.b": (dim,)}


def _linear_shapes(prefix: str, d_out: int, d_in: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.w": (d_out, d_in), f"{prefix}.b": (d_out,)}


def _ffn_shapes(prefix: str, d: int, mult: int) -> dict[str, tuple[int, ...]]:
    out = _norm_shapes(f"{prefix}.ln", d)
    out.update(_linear_shapes(f"{prefix}.lin1", d * mult, d))
    out.update(_linear_shapes(f"{prefix}.lin2", d, d * mult))
    return out


def _bn_shapes(prefix: str, dim: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.{k}": (dim,) for k in ("gamma", "beta", "mean", "var")}


def _attention_shapes(prefix: str, d: int, cross: bool) -> dict[str, tuple[int, ...]]:
    out: dict[str, tuple[int, ...]] = {}
    if cross:
        out.update(_norm_shapes(f"{prefix}.ln_q", d))
        out.update(_norm_shapes(f"{prefix}.ln_kv", d))
    else:
        out.update(_norm_shapes(f"{prefix}.ln", d))
    for name in ("wq", "wk", "wv", "wo"):
        out.update(_linear_shapes(f"{prefix}.{name}", d, d))
    return out


def _conv_module_shapes(prefix: str, d: int, kernel: int) -> dict[str, tuple[int, ...]]:
    out = _norm_shapes(f"{prefix}.ln", d)
    out.update(_linear_shapes(f"{prefix}.pw1", 2 * d, d))
    out[f"{prefix}.dw.w"] = (d, kernel)
    out[f"{prefix}.dw.b"] = (d,)
    out.update(_bn_shapes(f"{prefix}.bn", d))
    out.update(_linear_shapes(f"{prefix}.pw2", d, d))
    return out


def _conformer_shapes(prefix: str, cfg: ModelConfig, cross: bool) -> dict[str, tuple[int, ...]]:
    d = cfg.d_model
    out: dict[str, tuple[int, ...]] = {}
    if cross:
        out.update(_ffn_shapes(f"{prefix}.ffn1a", d, cfg.ffn_mult))
        out.update(_ffn_shapes(f"{prefix}.ffn1b", d, cfg.ffn_mult))
    else:
        out.update(_ffn_shapes(f"{prefix}.ffn1", d, cfg.ffn_mult))
    out.update(_attention_shapes(f"{prefix}.att", d, cross))
    out.update(_conv_module_shapes(f"{prefix}.conv", d, cfg.conv_kernel))
    out.update(_ffn_shapes(f"{prefix}.ffn2", d, cfg.ffn_mult))
    out.update(_norm_shapes(f"{prefix}.final_ln", d))
    return out


def expected_param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = cfg.in_channels
    for i, c_out in enumerate(cfg.cnn_channels):
        p = f"cnn.{i}"
        shapes[f"{p}.conv1.w"] = (c_out, c_in, 3, 3)
        shapes[f"{p}.conv1.b"] = (c_out,)
        shapes.update(_bn_shapes(f"{p}.bn1", c_out))
        shapes[f"{p}.conv2.w"] = (c_out, c_out, 3, 3)
        shapes[f"{p}.conv2.b"] = (c_out,)
        shapes.update(_bn_shapes(f"{p}.bn2", c_out))
        shapes[f"{p}.proj.w"] = (c_out, c_in)
        c_in = c_out
    for i in range(cfg.n_conformer):
        shapes.update(_conformer_shapes(f"conformer.{i}", cfg, cross=False))
    for i in range(cfg.n_cmc_audio):
        shapes.update(_conformer_shapes(f"cmc_a.{i}", cfg, cross=True))
    for i in range(cfg.n_cmc_visual):
        shapes.update(_conformer_shapes(f"cmc_v.{i}", cfg, cross=True))
    if cfg.clap_dim != cfg.d_model:
        shapes.update(_linear_shapes("clap_proj", cfg.d_model, cfg.clap_dim))
    shapes.update(_linear_shapes("visual_proj", cfg.d_model, cfg.visual_dim))
    shapes.update(_linear_shapes("head.lin1", cfg.d_model, cfg.d_model))
    shapes.update(_linear_shapes("head.lin2", cfg.head_out, cfg.d_model))
    return shapes


def init_random_weights(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Deterministic fan-in-scaled uniform weights; norms start near identity.

    Every parameter draws from its own name-keyed stream, so the result is
    independent of iteration order and stable across platforms.
    """
    weights: dict[str, np.ndarray] = {}
    for name, shape in expected_param_shapes(cfg).items():
        gen = SplitMix64(derive_seed(seed, name))
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("gamma", "g"):
            arr = 1.0 + 0.1 * gen.uniform(-1.0, 1.0, shape)
        elif leaf in ("beta", "mean"):
            arr = 0.1 * gen.uniform(-1.0, 1.0, shape)
        elif leaf == "var":
            arr = 1.0 + 0.5 * gen.uniform(0.0, 1.0, shape)
        elif leaf == "b":
            arr = 0.01 * gen.uniform(-1.0, 1.0, shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[0])
            bound = 1.0 / math.sqrt(max(fan_in, 1))
            arr = gen.uniform(-bound, bound, shape)
        weights[name] = np.asarray(arr, dtype=np.float32)
    return weights
