"""Label-indexed canonical point-cloud store plus rigid registration.

Registration is classic point-to-point ICP: nearest-neighbor matching
alternating with the closed-form Kabsch alignment, initialized by
centroid alignment. Nearest-neighbor search is exact: brute force up to
GRID_THRESHOLD points, a uniform-grid accelerator above it, both
producing identical indices (ties break to the lowest index).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import AffordanceMap, PointCloud, RigidTransform, load_cloud, write_afpc
from .errors import DegenerateCorrespondences, LabelNotInStore

GRID_THRESHOLD = 2000
STORE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CloudRecord:
    label: str
    cloud: PointCloud
    gt_maps: tuple[AffordanceMap, ...] = ()
    source: str = ""

    def __post_init__(self):
        maps = tuple(self.gt_maps)
        for m in maps:
            if m.n != self.cloud.n:
                raise ValueError(
                    f"gt map {m.affordance!r} has {m.n} scores for {self.cloud.n} points"
                )
        object.__setattr__(self, "gt_maps", maps)

    def gt_map(self, affordance: str) -> AffordanceMap | None:
        for m in self.gt_maps:
            if m.affordance == affordance:
                return m
        return None


@dataclass(frozen=True)
class StoreIndex:
    """Immutable snapshot: label -> ordered record ids, id -> record."""

    by_label: dict[str, tuple[str, ...]]
    records: dict[str, CloudRecord]

    def __post_init__(self):
        by_label = {
            label: tuple(sorted(ids)) for label, ids in self.by_label.items()
        }
        for label, ids in by_label.items():
            for rid in ids:
                if rid not in self.records:
                    raise ValueError(f"dangling record id {rid!r} under {label!r}")
        object.__setattr__(self, "by_label", by_label)
        object.__setattr__(self, "records", dict(self.records))

    @classmethod
    def build(cls, records: dict[str, CloudRecord]) -> "StoreIndex":
        by_label: dict[str, list[str]] = {}
        for rid, rec in records.items():
            by_label.setdefault(rec.label, []).append(rid)
        return cls({k: tuple(v) for k, v in by_label.items()}, records)

    def labels(self) -> list[str]:
        return sorted(self.by_label)


def retrieve(index: StoreIndex, label: str) -> CloudRecord:
    """First record for the exact label, lexicographic id tie-break."""
    ids = index.by_label.get(label)
    if not ids:
        raise LabelNotInStore(f"no cloud stored for label {label!r}")
    return index.records[ids[0]]


# ── store directory I/O ───────────────────────────────────────────────


def save_store(index: StoreIndex, root) -> None:
    root = Path(root)
    (root / "clouds").mkdir(parents=True, exist_ok=True)
    (root / "maps").mkdir(parents=True, exist_ok=True)
    meta = {"schema_version": STORE_SCHEMA_VERSION, "records": {}}
    for rid in sorted(index.records):
        rec = index.records[rid]
        write_afpc(rec.cloud, root / "clouds" / f"{rid}.afpc")
        map_names = []
        for m in rec.gt_maps:
            name = f"{rid}.{m.affordance}.json"
            with open(root / "maps" / name, "w") as f:
                json.dump(
                    {"schema_version": STORE_SCHEMA_VERSION, "cloud_id": m.cloud_id,
                     "affordance": m.affordance, "scores": m.scores.tolist()},
                    f,
                )
            map_names.append(name)
        meta["records"][rid] = {
            "label": rec.label,
            "source": rec.source,
            "maps": map_names,
        }
    with open(root / "index.json", "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)


def load_store(root) -> StoreIndex:
    root = Path(root)
    with open(root / "index.json") as f:
        meta = json.load(f)
    records = {}
    for rid, entry in meta["records"].items():
        cloud = load_cloud(root / "clouds" / f"{rid}.afpc", cloud_id=rid)
        maps = []
        for name in entry["maps"]:
            with open(root / "maps" / name) as f:
                m = json.load(f)
            maps.append(
                AffordanceMap(
                    cloud_id=m["cloud_id"],
                    affordance=m["affordance"],
                    scores=np.array(m["scores"]),
                )
            )
        records[rid] = CloudRecord(
            label=entry["label"], cloud=cloud, gt_maps=tuple(maps),
            source=entry.get("source", ""),
        )
    return StoreIndex.build(records)


def ingest_dir(src_dir) -> StoreIndex:
    """Build an index from loose cloud/map files.

    Expects clouds/<id>.afpc (or .xyz), maps/<id>.<affordance>.json and a
    labels.json mapping id -> object label. When an index.json already
    exists, it is loaded as-is.
    """
    root = Path(src_dir)
    if (root / "index.json").exists():
        return load_store(root)
    with open(root / "labels.json") as f:
        labels = json.load(f)
    records = {}
    for cloud_path in sorted((root / "clouds").iterdir()):
        if cloud_path.suffix not in (".afpc", ".xyz"):
            continue
        rid = cloud_path.stem
        cloud = load_cloud(cloud_path, cloud_id=rid)
        maps = []
        maps_dir = root / "maps"
        if maps_dir.exists():
            for map_path in sorted(maps_dir.glob(f"{rid}.*.json")):
                with open(map_path) as f:
                    m = json.load(f)
                maps.append(
                    AffordanceMap(
                        cloud_id=m.get("cloud_id", rid),
                        affordance=m["affordance"],
                        scores=np.array(m["scores"]),
                    )
                )
        if rid not in labels:
            raise LabelNotInStore(f"labels.json has no entry for {rid!r}")
        records[rid] = CloudRecord(
            label=labels[rid], cloud=cloud, gt_maps=tuple(maps), source=str(root)
        )
    return StoreIndex.build(records)


# ── nearest neighbors ─────────────────────────────────────────────────


def _nn_brute(query_pts: np.ndarray, ref_pts: np.ndarray) -> np.ndarray:
    # squared distances; argmin returns the lowest index on ties
    d2 = (
        np.sum(query_pts**2, axis=1)[:, None]
        - 2.0 * query_pts @ ref_pts.T
        + np.sum(ref_pts**2, axis=1)[None, :]
    )
    return np.argmin(d2, axis=1)


class _UniformGrid:
    """Exact NN over a hashed uniform grid with ring expansion."""

    def __init__(self, ref_pts: np.ndarray):
        self.pts = ref_pts
        lo = ref_pts.min(axis=0)
        hi = ref_pts.max(axis=0)
        extent = float(np.max(hi - lo))
        n = ref_pts.shape[0]
        ncells = max(1, int(round(n ** (1.0 / 3.0))))
        self.cell = extent / ncells if extent > 0 else 1.0
        self.lo = lo
        self.cells: dict[tuple[int, int, int], list[int]] = {}
        keys = np.floor((ref_pts - lo) / self.cell).astype(int)
        for i, key in enumerate(map(tuple, keys)):
            self.cells.setdefault(key, []).append(i)

    def query(self, q: np.ndarray) -> int:
        base = tuple(np.floor((q - self.lo) / self.cell).astype(int))
        best_i = -1
        best_d2 = np.inf
        ring = 0
        while True:
            found_any = False
            for key in self._ring(base, ring):
                idxs = self.cells.get(key)
                if not idxs:
                    continue
                found_any = True
                for i in idxs:
                    d = self.pts[i] - q
                    d2 = float(d @ d)
                    if d2 < best_d2 or (d2 == best_d2 and i < best_i):
                        best_d2 = d2
                        best_i = i
            # once a candidate exists, any point strictly closer must lie
            # within ring r where (r-1)*cell > sqrt(best_d2)
            if best_i >= 0 and (ring * self.cell) ** 2 >= best_d2:
                return best_i
            ring += 1
            if ring > 4096 and best_i >= 0:  # safety net
                return best_i
            del found_any

    @staticmethod
    def _ring(base, r):
        bx, by, bz = base
        if r == 0:
            yield base
            return
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                for dz in range(-r, r + 1):
                    if max(abs(dx), abs(dy), abs(dz)) == r:
                        yield (bx + dx, by + dy, bz + dz)


def nearest_neighbors(query_pts, ref_cloud) -> np.ndarray:
    """Exact nearest reference index per query point (ties -> lowest index)."""
    q = np.asarray(query_pts, dtype=np.float64).reshape(-1, 3)
    ref = ref_cloud.points if isinstance(ref_cloud, PointCloud) else np.asarray(
        ref_cloud, dtype=np.float64
    ).reshape(-1, 3)
    if ref.shape[0] <= GRID_THRESHOLD:
        return _nn_brute(q, ref)
    grid = _UniformGrid(ref)
    return np.array([grid.query(p) for p in q], dtype=np.intp)


# ── rigid alignment ───────────────────────────────────────────────────


def kabsch(src_pts, dst_pts) -> RigidTransform:
    """Least-squares rigid transform from matched point sets via SVD.

    det(R) = +1 is enforced by flipping the smallest singular direction,
    so reflections are never returned.
    """
    src = np.asarray(src_pts, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst_pts, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape or src.shape[0] < 3:
        raise DegenerateCorrespondences(
            f"need >= 3 matched pairs of equal length, got {src.shape} vs {dst.shape}"
        )
    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    h = (src - c_src).T @ (dst - c_dst)
    try:
        u, s, vt = np.linalg.svd(h)
    except np.linalg.LinAlgError as e:
        raise DegenerateCorrespondences(f"svd failed: {e}") from e
    # collinear/coincident inputs leave the rotation unconstrained
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateCorrespondences("correspondences are collinear or coincident")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    # re-orthonormalize to keep the RigidTransform invariant under float noise
    ur, _, vtr = np.linalg.svd(r)
    r = ur @ vtr
    if np.linalg.det(r) < 0:
        ur[:, 2] = -ur[:, 2]
        r = ur @ vtr
    t = c_dst - r @ c_src
    return RigidTransform(r, t)


def icp_register(
    source: PointCloud,
    target: PointCloud,
    max_iters: int = 50,
    tol: float = 1e-8,
    trim_fraction: float = 0.0,
) -> tuple[RigidTransform, list[float]]:
    """Point-to-point ICP; returns the transform and per-iteration RMS residuals."""
    if source.n < 3 or target.n < 3:
        raise DegenerateCorrespondences("both clouds need at least 3 points")
    src = source.points
    tgt = target.points

    # centroid alignment removes translation dominance before iteration 1
    current = RigidTransform(np.eye(3), tgt.mean(axis=0) - src.mean(axis=0))
    residuals: list[float] = []
    prev = np.inf
    for _ in range(max_iters):
        moved = src @ current.rotation.T + current.translation
        nn = nearest_neighbors(moved, tgt)
        matched = tgt[nn]
        d = np.linalg.norm(moved - matched, axis=1)
        if trim_fraction > 0.0:
            keep = max(3, int(np.ceil(len(d) * (1.0 - trim_fraction))))
            order = np.argsort(d, kind="stable")[:keep]
        else:
            order = slice(None)
        rms = float(np.sqrt(np.mean(d[order] ** 2)))
        residuals.append(rms)
        if prev - rms < tol:
            break
        prev = rms
        step = kabsch(moved[order], matched[order])
        current = step.compose(current)
    return current, residuals
