"""Domain types shared by every stage, plus elementary 3D geometry.

Point clouds live in a canonical object frame (centered, max point norm 1)
and are immutable after construction. All coordinates are float64 meters.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NoActionFound, NoObjectFound, DecodeError

AFPC_MAGIC = b"AFPC"
AFPC_VERSION = 1

_PUNCT_RE = re.compile(r"[^a-z0-9\s]")


def _frozen_array(a, shape, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != shape:
        raise ValueError(f"{name} must be (N,{shape}), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PointCloud:
    """N points in 3D with optional unit normals."""

    points: np.ndarray
    normals: np.ndarray | None = None
    id: str = ""

    def __post_init__(self):
        pts = _frozen_array(self.points, 3, "points")
        if pts.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = _frozen_array(self.normals, 3, "normals")
            if nrm.shape[0] != pts.shape[0]:
                raise ValueError("normals length must match points")
            lengths = np.linalg.norm(nrm, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-6):
                raise ValueError("normals must be unit length within 1e-6")
            object.__setattr__(self, "normals", nrm)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (proper, orthonormal) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).copy()
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-6:
            raise ValueError("rotation is not orthonormal within 1e-6")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError("rotation determinant must be +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, first: "RigidTransform") -> "RigidTransform":
        """self ∘ first: apply `first`, then self."""
        return RigidTransform(
            self.rotation @ first.rotation,
            self.rotation @ first.translation + self.translation,
        )

    def to_json(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }


@dataclass(frozen=True)
class InteractionQuery:
    action: str
    object: str
    raw_text: str

    def __post_init__(self):
        if not self.action or not self.object:
            raise ValueError("action and object must be nonempty")


@dataclass(frozen=True)
class GroundingResult:
    label: str
    bbox: tuple[float, float, float, float]
    confidence: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise ValueError(f"invalid normalized bbox {self.bbox}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of range: {self.confidence}")
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        object.__setattr__(self, "confidence", float(self.confidence))

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "bbox": list(self.bbox),
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class AffordanceMap:
    """Per-point scores in [0,1] for one affordance on one cloud."""

    cloud_id: str
    affordance: str
    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).reshape(-1).copy()
        if s.size < 1:
            raise ValueError("scores must be nonempty")
        if not np.isfinite(s).all():
            raise ValueError("scores contain non-finite values")
        if s.min() < 0.0 or s.max() > 1.0:
            raise ValueError("scores must lie in [0,1]")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def n(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class SegmentationResult:
    """Final pipeline outcome: either a refusal or a scored cloud."""

    decision: str  # "proceed" | "refuse"
    reason_code: str | None = None
    message: str | None = None
    grounding: GroundingResult | None = None
    map: AffordanceMap | None = None
    transform: RigidTransform | None = None
    cloud_id: str | None = None
    timing_ms: dict = field(default_factory=dict)

    def __post_init__(self):
        proceed = self.decision == "proceed"
        if proceed != (self.map is not None) or proceed != (self.transform is not None):
            raise ValueError("map and transform must be present iff decision is proceed")

    def to_json(self) -> dict:
        out = {"decision": self.decision, "timing_ms": self.timing_ms}
        if self.decision == "refuse":
            out["reason_code"] = self.reason_code
            out["message"] = self.message
        if self.grounding is not None:
            out["grounding"] = self.grounding.to_json()
        if self.map is not None:
            out["cloud_id"] = self.cloud_id
            out["affordance"] = self.map.affordance
            out["scores"] = self.map.scores.tolist()
        if self.transform is not None:
            out["transform"] = self.transform.to_json()
        return out


# ── geometry ──────────────────────────────────────────────────────────


def apply_transform(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    """Rotate and translate every point; normals rotate only."""
    pts = cloud.points @ t.rotation.T + t.translation
    normals = cloud.normals @ t.rotation.T if cloud.normals is not None else None
    return PointCloud(pts, normals, cloud.id + "+xf")


def normalize_cloud(cloud: PointCloud) -> tuple[PointCloud, np.ndarray, float]:
    """Center at the centroid and scale so the max point norm is 1.

    Returns (normalized cloud, centroid, scale) so the caller can invert.
    A cloud whose points all coincide keeps scale 1.
    """
    centroid = cloud.points.mean(axis=0)
    centered = cloud.points - centroid
    scale = float(np.linalg.norm(centered, axis=1).max())
    if scale < 1e-12:
        scale = 1.0
    out = PointCloud(centered / scale, cloud.normals, cloud.id)
    return out, centroid, scale


# ── query parsing ─────────────────────────────────────────────────────


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT_RE.sub(" ", text.lower()).split()


def match_action(
    tokens: list[str], action_vocab: set[str], aliases: dict[str, str] | None = None
) -> str | None:
    """First action phrase in the token stream, longest match first.

    Multi-word actions ("pour water", "lay down") come from the alias
    table and canonicalize to their single-token form.
    """
    phrases = {a: a for a in action_vocab}
    phrases.update({k.lower(): v for k, v in (aliases or {}).items()})
    max_len = max((len(p.split()) for p in phrases), default=1)
    for i in range(len(tokens)):
        for ln in range(max_len, 0, -1):
            cand = " ".join(tokens[i : i + ln])
            if cand in phrases:
                return phrases[cand]
    return None


def match_object(tokens: list[str], object_vocab: set[str]) -> str | None:
    return next((tok for tok in tokens if tok in object_vocab), None)


def parse_query(
    text: str,
    action_vocab: set[str],
    object_vocab: set[str],
    aliases: dict[str, str] | None = None,
) -> InteractionQuery:
    """Extract (action, object) from free-form text.

    Raises NoActionFound / NoObjectFound so the decision layer can
    refuse with a reason (or fall back to locate-by-affordance) instead
    of aborting.
    """
    if not text.strip():
        raise NoActionFound("empty query")
    tokens = tokenize(text)
    action = match_action(tokens, action_vocab, aliases)
    if action is None:
        raise NoActionFound(f"no known action in {text!r}")
    obj = match_object(tokens, object_vocab)
    if obj is None:
        raise NoObjectFound(f"no known object in {text!r}")
    return InteractionQuery(action=action, object=obj, raw_text=text)


# ── point-cloud serialization ─────────────────────────────────────────


def write_afpc(cloud: PointCloud, path) -> None:
    """Binary cloud format: magic, version u16, N u32, coords, flag, normals."""
    with open(path, "wb") as f:
        f.write(AFPC_MAGIC)
        f.write(struct.pack("<HI", AFPC_VERSION, cloud.n))
        f.write(cloud.points.astype("<f8").tobytes())
        has_normals = cloud.normals is not None
        f.write(struct.pack("<B", 1 if has_normals else 0))
        if has_normals:
            f.write(cloud.normals.astype("<f8").tobytes())


def read_afpc(path, cloud_id: str = "") -> PointCloud:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != AFPC_MAGIC:
            raise DecodeError(f"bad magic {magic!r} in {path}")
        version, n = struct.unpack("<HI", f.read(6))
        if version != AFPC_VERSION:
            raise DecodeError(f"unsupported afpc version {version}")
        pts = np.frombuffer(f.read(n * 24), dtype="<f8").reshape(n, 3)
        (flag,) = struct.unpack("<B", f.read(1))
        normals = None
        if flag:
            normals = np.frombuffer(f.read(n * 24), dtype="<f8").reshape(n, 3)
    return PointCloud(pts, normals, cloud_id)


def read_xyz(path, cloud_id: str = "") -> PointCloud:
    """ASCII fallback: one 'x y z' triple per line."""
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DecodeError(f"{path}:{lineno}: expected 3 values")
            rows.append([float(v) for v in parts])
    if not rows:
        raise DecodeError(f"{path}: no points")
    return PointCloud(np.array(rows), None, cloud_id)


def load_cloud(path, cloud_id: str = "") -> PointCloud:
    p = str(path)
    if p.endswith(".xyz"):
        return read_xyz(path, cloud_id)
    return read_afpc(path, cloud_id)
