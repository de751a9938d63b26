"""Deterministic dense transformer-block primitives.

Everything is float64 numpy with fixed summation order; no training,
no autograd. Weight bundles are generated from a recorded seed so every
run of the pipeline is reproducible without shipped weights.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, HeadDivisibility

WEIGHT_INIT_STD = 0.02
BUNDLE_MAGIC = b"AFWB"


def _as_matrix(m, name="matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got ndim={arr.ndim}")
    return arr


def matmul(a, b) -> np.ndarray:
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    # Accumulate rank-1 products in fixed k order instead of calling BLAS
    # gemm: gemm kernels handle remainder rows on a different code path, so
    # a row's rounding depends on its position and row permutations of the
    # input would not permute the output bitwise. Elementwise multiply-add
    # rounds identically in every row.
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k, None] * b[None, k, :]
    return out


def softmax_rows(m) -> np.ndarray:
    m = _as_matrix(m)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def layer_norm(m, gain, bias, eps: float = 1e-5) -> np.ndarray:
    m = _as_matrix(m)
    gain = np.asarray(gain, dtype=np.float64).reshape(-1)
    bias = np.asarray(bias, dtype=np.float64).reshape(-1)
    if gain.shape[0] != m.shape[1] or bias.shape[0] != m.shape[1]:
        raise ShapeMismatch(
            f"gain/bias length {gain.shape[0]}/{bias.shape[0]} != cols {m.shape[1]}"
        )
    mean = m.mean(axis=1, keepdims=True)
    var = m.var(axis=1, keepdims=True)
    return (m - mean) / np.sqrt(var + eps) * gain + bias


def gelu(x: np.ndarray) -> np.ndarray:
    """tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715 x^3)))."""
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


@dataclass
class WeightBundle:
    """Named parameter map plus the metadata needed to regenerate it."""

    params: dict[str, np.ndarray]
    d: int
    h: int
    layers: int
    seed: int
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.params[name]
        except KeyError:
            raise KeyError(f"weight bundle has no parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.params


def multi_head_attention(q, k, v, w: WeightBundle, prefix: str) -> np.ndarray:
    """Scaled dot-product attention with h heads and output projection.

    Projections live at {prefix}.wq/.wk/.wv/.wo, each d x d.
    """
    q = _as_matrix(q, "q")
    k = _as_matrix(k, "k")
    v = _as_matrix(v, "v")
    d, h = w.d, w.h
    if q.shape[1] != d or k.shape[1] != d or v.shape[1] != d:
        raise ShapeMismatch(f"inputs must have {d} columns")
    if k.shape[0] != v.shape[0]:
        raise ShapeMismatch("k and v must have the same row count")
    if d % h != 0:
        raise HeadDivisibility(f"head count {h} does not divide d={d}")
    dh = d // h

    qp = matmul(q, w[f"{prefix}.wq"])
    kp = matmul(k, w[f"{prefix}.wk"])
    vp = matmul(v, w[f"{prefix}.wv"])

    out = np.empty_like(qp)
    scale = 1.0 / math.sqrt(dh)
    for i in range(h):
        sl = slice(i * dh, (i + 1) * dh)
        attn = softmax_rows(matmul(qp[:, sl], kp[:, sl].T) * scale)
        out[:, sl] = matmul(attn, vp[:, sl])
    return matmul(out, w[f"{prefix}.wo"])


def feed_forward(m, w: WeightBundle, prefix: str) -> np.ndarray:
    """Position-wise FFN: linear -> GELU -> linear, hidden width 4d."""
    m = _as_matrix(m)
    w1, b1 = w[f"{prefix}.w1"], w[f"{prefix}.b1"]
    w2, b2 = w[f"{prefix}.w2"], w[f"{prefix}.b2"]
    if m.shape[1] != w1.shape[0]:
        raise ShapeMismatch(f"input cols {m.shape[1]} != w1 rows {w1.shape[0]}")
    return matmul(gelu(matmul(m, w1) + b1), w2) + b2


def add_norm(x, sublayer_out, gain, bias, eps: float = 1e-5) -> np.ndarray:
    x = _as_matrix(x, "x")
    sub = _as_matrix(sublayer_out, "sublayer_out")
    if x.shape != sub.shape:
        raise ShapeMismatch(f"residual shapes differ: {x.shape} vs {sub.shape}")
    return layer_norm(x + sub, gain, bias, eps)


def transformer_block(x, w: WeightBundle, prefix: str, kv=None) -> np.ndarray:
    """Self-attention (or cross-attention when kv is given) + FFN block."""
    kv = x if kv is None else kv
    attn = multi_head_attention(x, kv, kv, w, f"{prefix}.attn")
    x = add_norm(x, attn, w[f"{prefix}.ln1.gain"], w[f"{prefix}.ln1.bias"])
    ff = feed_forward(x, w, f"{prefix}.ffn")
    return add_norm(x, ff, w[f"{prefix}.ln2.gain"], w[f"{prefix}.ln2.bias"])


# ── bundle generation and I/O ─────────────────────────────────────────


def _block_shapes(prefix: str, d: int) -> dict[str, tuple]:
    return {
        f"{prefix}.attn.wq": (d, d),
        f"{prefix}.attn.wk": (d, d),
        f"{prefix}.attn.wv": (d, d),
        f"{prefix}.attn.wo": (d, d),
        f"{prefix}.ln1.gain": (d,),
        f"{prefix}.ln1.bias": (d,),
        f"{prefix}.ffn.w1": (d, 4 * d),
        f"{prefix}.ffn.b1": (4 * d,),
        f"{prefix}.ffn.w2": (4 * d, d),
        f"{prefix}.ffn.b2": (d,),
        f"{prefix}.ln2.gain": (d,),
        f"{prefix}.ln2.bias": (d,),
    }


def bundle_shape_spec(d: int, layers: int, text_vocab_size: int) -> dict[str, tuple]:
    """Every parameter the pipeline's two encoders and the seg head expect."""
    shapes: dict[str, tuple] = {
        "vlm.patch_proj.w": (768, d),
        "vlm.patch_proj.b": (d,),
        "vlm.text.embed": (text_vocab_size, d),
    }
    for i in range(layers):
        shapes.update(_block_shapes(f"vlm.vis.block{i}", d))
        shapes.update(_block_shapes(f"vlm.text.block{i}", d))
    # segmentation head: t-net, point encoder, cross-attention, score head
    shapes.update(
        {
            "affordseg.tnet.w1": (3, d),
            "affordseg.tnet.b1": (d,),
            "affordseg.tnet.w2": (d, d),
            "affordseg.tnet.b2": (d,),
            "affordseg.tnet.reg.w": (d, 9),
            "affordseg.tnet.reg.b": (9,),
            "affordseg.lift.w": (3, d),
            "affordseg.lift.b": (d,),
            "affordseg.cross.wq": (d, d),
            "affordseg.cross.wk": (d, d),
            "affordseg.cross.wv": (d, d),
            "affordseg.cross.wo": (d, d),
            "affordseg.cross_ln.gain": (d,),
            "affordseg.cross_ln.bias": (d,),
            "affordseg.out_ffn.w1": (d, 4 * d),
            "affordseg.out_ffn.b1": (4 * d,),
            "affordseg.out_ffn.w2": (4 * d, d),
            "affordseg.out_ffn.b2": (d,),
            "affordseg.out_ln.gain": (d,),
            "affordseg.out_ln.bias": (d,),
            "affordseg.head.w": (d, 1),
            "affordseg.head.b": (1,),
        }
    )
    for i in range(2):
        shapes.update(
            {
                f"affordseg.enc.block{i}.ffn.w1": (d, 4 * d),
                f"affordseg.enc.block{i}.ffn.b1": (4 * d,),
                f"affordseg.enc.block{i}.ffn.w2": (4 * d, d),
                f"affordseg.enc.block{i}.ffn.b2": (d,),
                f"affordseg.enc.block{i}.ln.gain": (d,),
                f"affordseg.enc.block{i}.ln.bias": (d,),
            }
        )
    return shapes


def generate_bundle(
    seed: int,
    d: int = 64,
    h: int = 4,
    layers: int = 2,
    text_vocab: list[str] | None = None,
) -> WeightBundle:
    """Seeded N(0, 0.02) init; layer-norm gains 1, biases and norms 0."""
    if d % h != 0:
        raise HeadDivisibility(f"h={h} does not divide d={d}")
    vocab = list(text_vocab) if text_vocab else ["<unk>"]
    if "<unk>" not in vocab:
        vocab = ["<unk>"] + vocab
    rng = np.random.Generator(np.random.PCG64(seed))
    params: dict[str, np.ndarray] = {}
    for name, shape in sorted(bundle_shape_spec(d, layers, len(vocab)).items()):
        if name.endswith(".gain"):
            params[name] = np.ones(shape)
        elif name.endswith((".bias", ".b", ".b1", ".b2")):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, WEIGHT_INIT_STD, size=shape)
    return WeightBundle(
        params, d=d, h=h, layers=layers, seed=seed,
        meta={"text_vocab": vocab, "rng": "pcg64", "tnet_layers": 1, "enc_blocks": 2},
    )


def save_bundle(bundle: WeightBundle, path) -> None:
    """JSON header (names, shapes, metadata) + concatenated f64-LE payloads."""
    names = sorted(bundle.params)
    header = {
        "d": bundle.d,
        "h": bundle.h,
        "layers": bundle.layers,
        "seed": bundle.seed,
        "meta": bundle.meta,
        "tensors": [{"name": n, "shape": list(bundle.params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(BUNDLE_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(bundle.params[n], dtype="<f8").tobytes())


def load_bundle(path) -> WeightBundle:
    with open(path, "rb") as f:
        if f.read(4) != BUNDLE_MAGIC:
            raise ValueError(f"{path}: not a weight bundle")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        params = {}
        for t in header["tensors"]:
            shape = tuple(t["shape"])
            count = int(np.prod(shape)) if shape else 1
            params[t["name"]] = np.frombuffer(f.read(count * 8), dtype="<f8").reshape(shape)
    return WeightBundle(
        params,
        d=header["d"],
        h=header["h"],
        layers=header["layers"],
        seed=header["seed"],
        meta=header.get("meta", {}),
    )
