"""Vision-language understanding: patch encoding, text encoding, grounding.

Grounding runs behind a backend abstraction so a real detector can plug
in later:

  * ToyBackend    — deterministic similarity scoring over label prototypes
  * OracleBackend — returns the benchmark's ground-truth annotation
  * RemoteBackend — one JSON POST per call to an external detector
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import GroundingResult, InteractionQuery
from .errors import (
    BackendUnavailable,
    DecodeError,
    DegenerateImage,
    EmptyQuery,
    ObjectNotFound,
    ProtocolError,
    ShapeMismatch,
)
from .neural import WeightBundle, matmul, transformer_block

IMAGE_SIZE = 224
PATCH_SIZE = 16
NUM_PATCHES = (IMAGE_SIZE // PATCH_SIZE) ** 2  # 196
PATCH_DIM = PATCH_SIZE * PATCH_SIZE * 3  # 768


@dataclass(frozen=True)
class ImagePatchGrid:
    patches: np.ndarray  # (196, 768) in [0,1]
    source_id: str = ""

    def __post_init__(self):
        p = np.asarray(self.patches, dtype=np.float64)
        if p.shape != (NUM_PATCHES, PATCH_DIM):
            raise ShapeMismatch(f"expected ({NUM_PATCHES},{PATCH_DIM}), got {p.shape}")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("patch values must lie in [0,1]")
        object.__setattr__(self, "patches", p)


@dataclass(frozen=True)
class VisualToken:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if not np.isfinite(v).all():
            raise ValueError("visual token contains non-finite values")
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True)
class TextEmbedding:
    vector: np.ndarray
    tokens: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if not np.isfinite(v).all():
            raise ValueError("text embedding contains non-finite values")
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "tokens", tuple(self.tokens))


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear sampling at pixel centers ((i+0.5)*scale - 0.5), clamped.

    For an exact 2:1 downscale this reduces to 2x2 block averaging.
    """
    h, w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def patchify(image_bytes: bytes, source_id: str = "") -> ImagePatchGrid:
    """Decode, bilinear-resize to 224x224, cut 16x16 patches row-major."""
    try:
        img = Image.open(io.BytesIO(image_bytes)).convert("RGB")
    except (UnidentifiedImageError, OSError) as e:
        raise DecodeError(f"cannot decode image: {e}") from e
    if img.width < PATCH_SIZE or img.height < PATCH_SIZE:
        raise DegenerateImage(f"image {img.width}x{img.height} smaller than one patch")
    arr = np.asarray(img, dtype=np.float64)
    if img.size != (IMAGE_SIZE, IMAGE_SIZE):
        arr = _bilinear_resize(arr, IMAGE_SIZE, IMAGE_SIZE)
    arr = arr / 255.0
    n = IMAGE_SIZE // PATCH_SIZE
    # (n, 16, n, 16, 3) -> (n, n, 16, 16, 3) -> (196, 768) channel-interleaved
    patches = (
        arr.reshape(n, PATCH_SIZE, n, PATCH_SIZE, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(NUM_PATCHES, PATCH_DIM)
    )
    return ImagePatchGrid(patches, source_id)


def encode_image(grid: ImagePatchGrid, w: WeightBundle) -> VisualToken:
    """Patch projection, L self-attention blocks, mean-pool over patches."""
    x = matmul(grid.patches, w["vlm.patch_proj.w"]) + w["vlm.patch_proj.b"]
    for i in range(w.layers):
        x = transformer_block(x, w, f"vlm.vis.block{i}")
    return VisualToken(x.mean(axis=0))


def text_token_ids(tokens, vocab: list[str]) -> list[int]:
    index = {t: i for i, t in enumerate(vocab)}
    unk = index["<unk>"]
    return [index.get(t, unk) for t in tokens]


def encode_text(query: InteractionQuery, w: WeightBundle) -> TextEmbedding:
    """Embedding lookup, L blocks, mean-pool. Vocab comes from the bundle."""
    tokens = [query.action, query.object]
    return encode_tokens(tokens, w)


def encode_tokens(tokens: list[str], w: WeightBundle) -> TextEmbedding:
    if not tokens:
        raise EmptyQuery("no tokens to encode")
    vocab = w.meta["text_vocab"]
    ids = text_token_ids(tokens, vocab)
    x = w["vlm.text.embed"][ids]
    for i in range(w.layers):
        x = transformer_block(x, w, f"vlm.text.block{i}")
    return TextEmbedding(x.mean(axis=0), tuple(tokens))


def _validated_grounding(label, bbox, confidence) -> GroundingResult:
    try:
        return GroundingResult(label=str(label), bbox=tuple(bbox), confidence=float(confidence))
    except (TypeError, ValueError) as e:
        raise ProtocolError(f"invalid grounding payload: {e}") from e


class GroundingBackend:
    """Deterministic mapping (image, query) -> GroundingResult."""

    def ground(self, image_ref, query: InteractionQuery) -> GroundingResult:
        raise NotImplementedError


class OracleBackend(GroundingBackend):
    """Returns the stored annotation for (image_id, object) with confidence 1."""

    def __init__(self, annotations_by_image: dict[str, list[dict]]):
        self._annotations = annotations_by_image

    def ground(self, image_ref, query: InteractionQuery) -> GroundingResult:
        anns = self._annotations.get(image_ref)
        if anns is None:
            raise ObjectNotFound(f"unknown image {image_ref!r}")
        for ann in anns:
            if ann["label"] == query.object:
                return _validated_grounding(ann["label"], ann["bbox"], 1.0)
        raise ObjectNotFound(f"{query.object!r} not annotated in {image_ref!r}")


class ToyBackend(GroundingBackend):
    """Cosine similarity between the visual token and per-label prototypes.

    Confidence = (cos + 1)/2 clamped to [0,1]; the bbox comes from the
    image's annotations when known, else from the global label->region
    table. image_ref may be an image_id (resolved through the loader) or
    raw image bytes.
    """

    def __init__(
        self,
        weights: WeightBundle,
        label_regions: dict[str, list[float]],
        annotations_by_image: dict[str, list[dict]] | None = None,
        image_loader=None,
        prototypes: dict[str, np.ndarray] | None = None,
    ):
        self.weights = weights
        self.label_regions = label_regions
        self.annotations = annotations_by_image or {}
        self.image_loader = image_loader
        if prototypes is None:
            prototypes = {
                label: encode_tokens([label], weights).vector
                for label in sorted(label_regions)
            }
        self.prototypes = prototypes

    def _resolve_bbox(self, image_ref, label: str):
        if isinstance(image_ref, str) and image_ref in self.annotations:
            for ann in self.annotations[image_ref]:
                if ann["label"] == label:
                    return ann["bbox"]
            raise ObjectNotFound(f"{label!r} not annotated in {image_ref!r}")
        if label in self.label_regions:
            return self.label_regions[label]
        raise ObjectNotFound(f"no region known for {label!r}")

    def _image_bytes(self, image_ref) -> bytes:
        if isinstance(image_ref, bytes):
            return image_ref
        if self.image_loader is None:
            raise BackendUnavailable("toy backend has no image loader configured")
        return self.image_loader(image_ref)

    def ground(self, image_ref, query: InteractionQuery) -> GroundingResult:
        bbox = self._resolve_bbox(image_ref, query.object)
        if query.object not in self.prototypes:
            raise ObjectNotFound(f"no prototype for {query.object!r}")
        grid = patchify(self._image_bytes(image_ref), source_id=str(image_ref)[:64])
        token = encode_image(grid, self.weights).vector
        proto = self.prototypes[query.object]
        denom = np.linalg.norm(token) * np.linalg.norm(proto)
        cos = float(token @ proto / denom) if denom > 0 else 0.0
        confidence = min(1.0, max(0.0, (cos + 1.0) / 2.0))
        return _validated_grounding(query.object, bbox, confidence)


class RemoteBackend(GroundingBackend):
    """POST /ground against an external detector speaking the wire protocol."""

    def __init__(self, base_url: str, timeout: float = 30.0, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(
            timeout=timeout, limits=httpx.Limits(max_connections=8)
        )

    def ground(self, image_ref, query: InteractionQuery) -> GroundingResult:
        import httpx

        image_bytes = image_ref if isinstance(image_ref, bytes) else b""
        payload = {
            "image_b64": base64.b64encode(image_bytes).decode(),
            "action": query.action,
            "object": query.object,
        }
        try:
            resp = self._client.post(f"{self.base_url}/ground", json=payload)
        except httpx.HTTPError as e:
            raise BackendUnavailable(f"remote grounding failed: {e}") from e
        if resp.status_code == 404:
            raise ObjectNotFound(f"remote backend: {query.object!r} not found")
        if resp.status_code != 200:
            raise BackendUnavailable(f"remote backend returned {resp.status_code}")
        try:
            body = resp.json()
            return _validated_grounding(body["label"], body["bbox"], body["confidence"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"malformed remote response: {e}") from e
