"""Benchmark runner: one pipeline pass per (image, applicable query),
metric computation against stored ground truth, and deterministic
aggregation (overall, per room type, per area, per affordance).

Refused samples produce no maps, so they are excluded from metric means
and reported as a refusal rate instead.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..errors import Afford3dError, DegenerateGroundTruth
from . import metrics
from .manifest import ROOM_AREA

REPORT_SCHEMA_VERSION = 1

METRIC_KEYS = ("miou_pct", "auc_pct", "sim", "mae")


def config_hash(config) -> str:
    doc = config.to_json() if hasattr(config, "to_json") else dict(config)
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _noise_for(sample_id: str, n: int, seed: int) -> np.ndarray:
    """Unit Gaussian noise keyed by sample id: identical across sigma runs."""
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode()).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
    return rng.standard_normal(n)


def run_benchmark(engine, manifest, noise_sigma: float = 0.0, noise_seed: int = 0) -> dict:
    """Evaluate every applicable (image, query) pair and aggregate."""
    queries = {q.query_id: q for q in manifest.queries}
    scene_room = {s.scene_id: s.room_type for s in manifest.scenes}
    rows = []
    for img in manifest.images:
        room = scene_room.get(img.scene_id, "")
        for qid in img.applicable_query_ids:
            q = queries[qid]
            sample_id = f"{img.image_id}:{qid}"
            row = {
                "sample_id": sample_id,
                "image_id": img.image_id,
                "query_id": qid,
                "scene_id": img.scene_id,
                "room_type": room,
                "area": ROOM_AREA.get(room, ""),
                "affordance": q.action,
            }
            try:
                result = engine.run_query(q.text, image_id=img.image_id)
            except Afford3dError as e:
                row.update(status="error", error=str(e))
                rows.append(row)
                continue
            if result.decision == "refuse":
                row.update(status="refused", reason_code=result.reason_code)
                rows.append(row)
                continue
            pred = np.array(result.map.scores)
            if noise_sigma > 0.0:
                pred = np.clip(
                    pred + noise_sigma * _noise_for(sample_id, len(pred), noise_seed),
                    0.0,
                    1.0,
                )
            record = engine.store.records.get(result.cloud_id)
            gt = record.gt_map(q.action) if record else None
            if gt is None:
                row.update(status="error", error="no ground-truth map")
                rows.append(row)
                continue
            row["status"] = "ok"
            row["miou"] = metrics.miou(pred, gt.scores)
            row["sim"] = metrics.sim(pred, gt.scores)
            row["mae"] = metrics.mae(pred, gt.scores)
            try:
                row["auc"] = metrics.auc(pred, gt.scores)
            except DegenerateGroundTruth:
                row["auc"] = None
            rows.append(row)

    rows.sort(key=lambda r: r["sample_id"])
    report = aggregate_rows(rows)
    report["config_hash"] = config_hash(engine.config)
    report["noise_sigma"] = noise_sigma
    return report


def _group_mean(group_rows: list[dict]) -> dict:
    ok = [r for r in group_rows if r["status"] == "ok"]
    out = {"n": len(ok)}
    if not ok:
        out.update({k: None for k in METRIC_KEYS})
        return out
    out["miou_pct"] = 100.0 * sum(r["miou"] for r in ok) / len(ok)
    out["sim"] = sum(r["sim"] for r in ok) / len(ok)
    out["mae"] = sum(r["mae"] for r in ok) / len(ok)
    auc_rows = [r for r in ok if r["auc"] is not None]
    out["n_auc"] = len(auc_rows)
    out["auc_pct"] = (
        100.0 * sum(r["auc"] for r in auc_rows) / len(auc_rows) if auc_rows else None
    )
    return out


def _weighted_overall(groups: dict[str, dict]) -> dict:
    """Overall = sample-count-weighted mean of per-group means.

    Computed this exact way so the invariant 'overall equals the weighted
    mean of per-environment aggregates' holds bit-exactly.
    """
    out = {"n": sum(g["n"] for g in groups.values())}
    for key, nkey in (("miou_pct", "n"), ("sim", "n"), ("mae", "n"), ("auc_pct", "n_auc")):
        num = 0.0
        den = 0
        for g in sorted(groups):
            grp = groups[g]
            if grp.get(key) is None:
                continue
            w = grp.get(nkey, grp["n"])
            num += grp[key] * w
            den += w
        out[key] = num / den if den else None
        if key == "auc_pct":
            out["n_auc"] = den
    return out


def aggregate_rows(rows: list[dict]) -> dict:
    """Deterministic reduction of raw rows into the metrics report."""
    rows = sorted(rows, key=lambda r: r["sample_id"])

    def group_by(key):
        groups: dict[str, list[dict]] = {}
        for r in rows:
            groups.setdefault(r.get(key) or "", []).append(r)
        return {k: _group_mean(v) for k, v in sorted(groups.items())}

    per_environment = group_by("room_type")
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "overall": _weighted_overall(per_environment),
        "per_environment": per_environment,
        "per_area": group_by("area"),
        "per_affordance": group_by("affordance"),
        "counts": {
            "total": len(rows),
            "ok": sum(1 for r in rows if r["status"] == "ok"),
            "refused": sum(1 for r in rows if r["status"] == "refused"),
            "error": sum(1 for r in rows if r["status"] == "error"),
            "degenerate_auc": sum(
                1 for r in rows if r["status"] == "ok" and r["auc"] is None
            ),
        },
        "refusal_rate": (
            sum(1 for r in rows if r["status"] == "refused") / len(rows) if rows else 0.0
        ),
        "rows": rows,
    }
    return report
