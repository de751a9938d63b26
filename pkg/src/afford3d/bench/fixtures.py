"""Synthetic benchmark fixtures.

The real 9,248-image corpus is not shipped; tests run against (a) a
small fully materialized fixture (12 images, 4 scenes, a cloud store on
disk) and (b) an in-memory manifest with full-scale counts used purely
for statistics validation.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..cloudstore import CloudRecord, StoreIndex, save_store
from ..core import AffordanceMap, PointCloud, normalize_cloud
from .manifest import ALL_ROOM_TYPES, ROOM_AREA, VALID_SOURCES, Manifest

OBJECT_VOCAB = [
    "sofa", "chair", "table", "bed", "bottle", "door", "vase", "bag",
    "apple", "cabinet", "shelf", "lamp", "microwave", "refrigerator",
    "sink", "toilet", "desk", "tv", "wardrobe", "box", "mirror", "cup",
]

AFFORDANCE_VOCAB = [
    "support", "move", "sit", "contain", "pour", "wrap", "open", "grasp",
    "lay", "pull", "push", "press", "hang", "place", "clean", "turn",
    "stack", "fold",
]

ACTION_ALIASES = {"pour water": "pour", "lay down": "lay", "sit on": "sit"}

OBJECT_ACTIONS = {
    "sofa": ["sit", "support", "lay"],
    "chair": ["sit", "support", "move"],
    "table": ["support", "place", "move"],
    "bed": ["lay", "sit", "support"],
    "bottle": ["open", "pour", "grasp", "contain"],
    "vase": ["pour", "contain", "grasp"],
    "bag": ["grasp", "open", "contain"],
    "cabinet": ["open", "contain", "pull"],
    "door": ["open", "pull", "push"],
    "lamp": ["turn", "press", "move"],
}

# the six fixture clouds (record id == cloud id)
FIXTURE_CLOUD_LABELS = ["sofa", "chair", "table", "bed", "bottle", "vase"]

FULL_SOURCE_COUNTS = {
    "Houzz": 4591,
    "Pinterest": 1496,
    "Shutterstock": 966,
    "Instagram": 933,
    "Archdaily": 785,
    "Designboom": 477,
}


def _make_cloud(rng, cloud_id: str, n: int) -> PointCloud:
    pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * np.array([1.0, 0.7, 0.4])
    cloud, _, _ = normalize_cloud(PointCloud(pts, None, cloud_id))
    return cloud


def _make_gt_map(rng, cloud: PointCloud, affordance: str) -> AffordanceMap:
    """Binary region: positives in one half-space, guaranteed both classes."""
    n = cloud.n
    axis = rng.integers(0, 3)
    cut = float(np.median(cloud.points[:, axis]))
    scores = (cloud.points[:, axis] > cut).astype(np.float64)
    if scores.sum() == 0:
        scores[0] = 1.0
    if scores.sum() == n:
        scores[0] = 0.0
    return AffordanceMap(cloud_id=cloud.id, affordance=affordance, scores=scores)


def build_fixture_store(seed: int = 7) -> StoreIndex:
    rng = np.random.Generator(np.random.PCG64(seed))
    records = {}
    for label in FIXTURE_CLOUD_LABELS:
        cloud_id = f"c_{label}_01"
        cloud = _make_cloud(rng, cloud_id, int(rng.integers(80, 161)))
        maps = tuple(
            _make_gt_map(rng, cloud, act) for act in OBJECT_ACTIONS[label]
        )
        records[cloud_id] = CloudRecord(
            label=label, cloud=cloud, gt_maps=maps, source="synthetic"
        )
    return StoreIndex.build(records)


def _write_image(path, rng) -> None:
    arr = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    Image.fromarray(arr, "RGB").save(path)


def build_fixture_manifest(store: StoreIndex, image_dir: str = "images") -> Manifest:
    """12 images over 4 scenes, every applicable query compatible."""
    scenes = [
        {"scene_id": "sc_living", "room_type": "living room"},
        {"scene_id": "sc_kitchen", "room_type": "kitchen"},
        {"scene_id": "sc_bedroom", "room_type": "bedroom"},
        {"scene_id": "sc_bath", "room_type": "bathroom"},
    ]
    for s in scenes:
        s["area"] = ROOM_AREA[s["room_type"]]

    cloud_by_label = {rec.label: rid for rid, rec in store.records.items()}
    scene_objects = {
        "sc_living": ["sofa", "chair", "table"],
        "sc_kitchen": ["table", "bottle", "chair"],
        "sc_bedroom": ["bed", "chair", "vase"],
        "sc_bath": ["vase", "bottle", "chair"],
    }

    queries = []
    qid_by_pair = {}
    for label in FIXTURE_CLOUD_LABELS:
        for act in OBJECT_ACTIONS[label]:
            qid = f"q_{act}_{label}"
            qid_by_pair[(act, label)] = qid
            queries.append(
                {"query_id": qid, "action": act, "object": label,
                 "text": f"Can you {act} the {label}?"}
            )
    # conversational variants and refusal probes (never marked applicable)
    queries += [
        {"query_id": "q_where_sit", "action": "sit", "object": "sofa",
         "text": "Where can I sit?"},
        {"query_id": "q_pour_water_vase", "action": "pour", "object": "vase",
         "text": "Could you pour water into the vase"},
        {"query_id": "q_give_apple", "action": "give", "object": "apple",
         "text": "give me an apple"},
        {"query_id": "q_take_table", "action": "take", "object": "table",
         "text": "take the table"},
    ]

    label_regions = {
        label: [0.1 + 0.02 * i, 0.2, 0.5 + 0.02 * i, 0.8]
        for i, label in enumerate(sorted(OBJECT_ACTIONS))
    }

    images = []
    idx = 0
    for s in scenes:
        labels = scene_objects[s["scene_id"]]
        for k in range(3):
            image_id = f"img_{idx:03d}"
            anns = []
            for j, label in enumerate(labels[: k + 1]):
                anns.append(
                    {
                        "label": label,
                        "bbox": [0.05 + 0.1 * j, 0.1, 0.45 + 0.1 * j, 0.9],
                        "cloud_id": cloud_by_label[label],
                        "affordances": OBJECT_ACTIONS[label],
                    }
                )
            applicable = sorted(
                qid_by_pair[(act, a["label"])]
                for a in anns
                for act in OBJECT_ACTIONS[a["label"]]
            )
            images.append(
                {
                    "image_id": image_id,
                    "scene_id": s["scene_id"],
                    "source": VALID_SOURCES[idx % len(VALID_SOURCES)],
                    "path": f"{image_dir}/{image_id}.png",
                    "annotations": anns,
                    "applicable_query_ids": applicable,
                }
            )
            idx += 1

    return Manifest.from_json(
        {
            "schema_version": 1,
            "scenes": scenes,
            "images": images,
            "queries": queries,
            "object_action_map": OBJECT_ACTIONS,
            "vocab": {"objects": OBJECT_VOCAB, "affordances": AFFORDANCE_VOCAB},
            "label_regions": label_regions,
            "action_aliases": ACTION_ALIASES,
            "non_affordance_actions": ["give", "take", "bring", "fetch"],
            "cloud_ids": sorted(store.records),
        }
    )


def materialize_fixture(root, seed: int = 7) -> tuple[Path, Path]:
    """Write manifest.json, images/, and the cloud store under root.

    Returns (manifest_path, store_dir).
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    store = build_fixture_store(seed)
    manifest = build_fixture_manifest(store)
    (root / "images").mkdir(exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    for img in manifest.images:
        _write_image(root / "images" / f"{img.image_id}.png", rng)
        img.path = str(root / "images" / f"{img.image_id}.png")
    store_dir = root / "store"
    save_store(store, store_dir)
    manifest_path = root / "manifest.json"
    manifest.save(manifest_path)
    return manifest_path, store_dir


def build_full_stats_manifest() -> Manifest:
    """Full-scale counts (9,248 images, 20 scenes, exact source split) with
    minimal per-image payload; used only for statistics validation."""
    scenes = [
        {"scene_id": f"sc_{i:02d}", "room_type": room, "area": ROOM_AREA[room]}
        for i, room in enumerate(ALL_ROOM_TYPES)
    ]
    sources = []
    for name, count in FULL_SOURCE_COUNTS.items():
        sources.extend([name] * count)
    n_images = len(sources)  # 9248
    images = [
        {
            "image_id": f"img_{i:05d}",
            "scene_id": scenes[i % len(scenes)]["scene_id"],
            "source": sources[i],
            "path": "",
            "annotations": [
                {"label": "sofa", "bbox": [0.1, 0.1, 0.9, 0.9],
                 "cloud_id": "c_sofa_01", "affordances": ["sit"]}
            ],
            "applicable_query_ids": ["q_sit_sofa"],
        }
        for i in range(n_images)
    ]
    return Manifest.from_json(
        {
            "schema_version": 1,
            "scenes": scenes,
            "images": images,
            "queries": [
                {"query_id": "q_sit_sofa", "action": "sit", "object": "sofa",
                 "text": "Can you sit on the sofa?"}
            ],
            "object_action_map": {"sofa": ["sit"]},
            "vocab": {"objects": OBJECT_VOCAB, "affordances": AFFORDANCE_VOCAB},
            "cloud_ids": ["c_sofa_01"],
        }
    )


def canonical_mutations(manifest: Manifest) -> dict[str, Manifest]:
    """Ten invalid variants, each violating exactly one manifest rule."""
    base = manifest.to_json()

    def variant(fn):
        doc = copy.deepcopy(base)
        fn(doc)
        return Manifest.from_json(doc)

    muts = {}
    muts["dangling_scene_id"] = variant(
        lambda d: d["images"][0].update(scene_id="sc_nowhere")
    )
    muts["dangling_cloud_id"] = variant(
        lambda d: d["images"][0]["annotations"][0].update(cloud_id="c_ghost")
    )
    muts["dangling_query_id"] = variant(
        lambda d: d["images"][0]["applicable_query_ids"].append("q_ghost")
    )
    muts["bad_source"] = variant(lambda d: d["images"][0].update(source="Flickr"))
    muts["area_mismatch"] = variant(lambda d: d["scenes"][0].update(area="Utility"))
    muts["unknown_room_type"] = variant(
        lambda d: d["scenes"][0].update(room_type="observatory")
    )
    muts["invalid_bbox"] = variant(
        lambda d: d["images"][0]["annotations"][0].update(bbox=[0.9, 0.1, 0.2, 0.8])
    )
    muts["unknown_affordance"] = variant(
        lambda d: d["images"][0]["annotations"][0]["affordances"].append("levitate")
    )
    muts["unknown_label"] = variant(
        lambda d: d["images"][0]["annotations"][0].update(label="unicorn")
    )
    muts["duplicate_image_id"] = variant(
        lambda d: d["images"].append(copy.deepcopy(d["images"][0]))
    )
    return muts
