"""Language-guided per-point affordance scoring.

Architecture: an input transform predicted by a small T-Net (residual to
identity), a per-point encoder (lift + two FFN blocks with add & norm),
multi-head cross-attention against the single pooled text embedding, an
output FFN with add & norm, and a sigmoid score head. Everything is
pointwise or max-pooled, so point permutations permute the output scores
bitwise.
"""

from __future__ import annotations

import numpy as np

from .core import AffordanceMap, PointCloud
from .cloudstore import CloudRecord
from .errors import GtMapMissing, ShapeMismatch
from .neural import (
    WeightBundle,
    add_norm,
    feed_forward,
    gelu,
    matmul,
    multi_head_attention,
)


def tnet(points: PointCloud, w: WeightBundle) -> np.ndarray:
    """Predict a residual 3x3 input transform: shared MLP, max-pool, regressor.

    Zero regressor weights yield exactly the identity.
    """
    x = matmul(points.points, w["affordseg.tnet.w1"]) + w["affordseg.tnet.b1"]
    x = gelu(x)
    x = matmul(x, w["affordseg.tnet.w2"]) + w["affordseg.tnet.b2"]
    pooled = x.max(axis=0)
    residual = pooled @ w["affordseg.tnet.reg.w"] + w["affordseg.tnet.reg.b"]
    return np.eye(3) + residual.reshape(3, 3)


def point_features(points: np.ndarray, w: WeightBundle) -> np.ndarray:
    """Lift transformed coordinates to d and run the encoder FFN blocks."""
    x = matmul(points, w["affordseg.lift.w"]) + w["affordseg.lift.b"]
    n_blocks = int(w.meta.get("enc_blocks", 2))
    for i in range(n_blocks):
        p = f"affordseg.enc.block{i}"
        ff = feed_forward(x, w, f"{p}.ffn")
        x = add_norm(x, ff, w[f"{p}.ln.gain"], w[f"{p}.ln.bias"])
    return x


def segment(cloud: PointCloud, text_vector, w: WeightBundle, affordance: str) -> AffordanceMap:
    """Score every point of a normalized cloud for one affordance."""
    text = np.asarray(text_vector, dtype=np.float64).reshape(1, -1)
    if text.shape[1] != w.d:
        raise ShapeMismatch(f"text embedding length {text.shape[1]} != d={w.d}")
    transform = tnet(cloud, w)
    pts = matmul(cloud.points, transform.T)
    feats = point_features(pts, w)

    cross = multi_head_attention(feats, text, text, w, "affordseg.cross")
    x = add_norm(feats, cross, w["affordseg.cross_ln.gain"], w["affordseg.cross_ln.bias"])
    ff = feed_forward(x, w, "affordseg.out_ffn")
    x = add_norm(x, ff, w["affordseg.out_ln.gain"], w["affordseg.out_ln.bias"])
    logits = (matmul(x, w["affordseg.head.w"]) + w["affordseg.head.b"]).reshape(-1)
    scores = 1.0 / (1.0 + np.exp(-logits))
    return AffordanceMap(cloud_id=cloud.id, affordance=affordance, scores=scores)


def segment_oracle(record: CloudRecord, affordance: str) -> AffordanceMap:
    """Pass through the stored ground-truth map for (cloud, affordance)."""
    gt = record.gt_map(affordance)
    if gt is None:
        raise GtMapMissing(
            f"no ground-truth map for affordance {affordance!r} on {record.cloud.id!r}"
        )
    return AffordanceMap(cloud_id=gt.cloud_id, affordance=affordance, scores=gt.scores)
