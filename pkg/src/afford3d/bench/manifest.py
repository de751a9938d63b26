"""Benchmark manifest: schema, referential validation, summary statistics.

The manifest is one JSON document tying scenes, images, annotations,
queries, vocabularies, and the object-action compatibility map together.
Validation recomputes every summary statistic from the raw records and
reports every violated invariant with a path into the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

MANIFEST_SCHEMA_VERSION = 1

VALID_SOURCES = (
    "Houzz",
    "Pinterest",
    "Shutterstock",
    "Instagram",
    "Archdaily",
    "Designboom",
)

# six area groups and the room types each one contains
AREA_ROOMS = {
    "Living": ("living room", "family room", "game room"),
    "Dining & Kitchen": ("dining room", "kitchen", "pantry"),
    "Sleeping": ("master bedroom", "bedroom", "guest bedroom"),
    "Work & Study": ("home office", "study room", "children's room"),
    "Storage": ("storage room", "walk-in closet", "basement", "attic"),
    "Utility": ("bathroom", "laundry room", "garage", "home theater"),
}
ROOM_AREA = {room: area for area, rooms in AREA_ROOMS.items() for room in rooms}
ALL_ROOM_TYPES = tuple(ROOM_AREA)


@dataclass
class Scene:
    scene_id: str
    room_type: str
    area: str


@dataclass
class Annotation:
    label: str
    bbox: list[float]
    cloud_id: str
    affordances: list[str]


@dataclass
class ImageEntry:
    image_id: str
    scene_id: str
    source: str
    path: str
    annotations: list[Annotation]
    applicable_query_ids: list[str]


@dataclass
class Query:
    query_id: str
    action: str
    object: str
    text: str


@dataclass
class Manifest:
    scenes: list[Scene]
    images: list[ImageEntry]
    queries: list[Query]
    object_action_map: dict[str, list[str]]
    object_vocab: list[str]
    affordance_vocab: list[str]
    label_regions: dict[str, list[float]] = field(default_factory=dict)
    action_aliases: dict[str, str] = field(default_factory=dict)
    non_affordance_actions: list[str] = field(default_factory=list)
    cloud_ids: list[str] = field(default_factory=list)
    schema_version: int = MANIFEST_SCHEMA_VERSION

    @classmethod
    def from_json(cls, doc: dict) -> "Manifest":
        return cls(
            scenes=[Scene(**s) for s in doc["scenes"]],
            images=[
                ImageEntry(
                    image_id=i["image_id"],
                    scene_id=i["scene_id"],
                    source=i["source"],
                    path=i.get("path", ""),
                    annotations=[Annotation(**a) for a in i.get("annotations", [])],
                    applicable_query_ids=list(i.get("applicable_query_ids", [])),
                )
                for i in doc["images"]
            ],
            queries=[Query(**q) for q in doc["queries"]],
            object_action_map={k: list(v) for k, v in doc["object_action_map"].items()},
            object_vocab=list(doc["vocab"]["objects"]),
            affordance_vocab=list(doc["vocab"]["affordances"]),
            label_regions={k: list(v) for k, v in doc.get("label_regions", {}).items()},
            action_aliases=dict(doc.get("action_aliases", {})),
            non_affordance_actions=list(doc.get("non_affordance_actions", [])),
            cloud_ids=list(doc.get("cloud_ids", [])),
            schema_version=doc.get("schema_version", MANIFEST_SCHEMA_VERSION),
        )

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenes": [vars(s) for s in self.scenes],
            "images": [
                {
                    "image_id": i.image_id,
                    "scene_id": i.scene_id,
                    "source": i.source,
                    "path": i.path,
                    "annotations": [vars(a) for a in i.annotations],
                    "applicable_query_ids": i.applicable_query_ids,
                }
                for i in self.images
            ],
            "queries": [vars(q) for q in self.queries],
            "object_action_map": self.object_action_map,
            "vocab": {"objects": self.object_vocab, "affordances": self.affordance_vocab},
            "label_regions": self.label_regions,
            "action_aliases": self.action_aliases,
            "non_affordance_actions": self.non_affordance_actions,
            "cloud_ids": self.cloud_ids,
        }

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)

    def annotations_by_image(self) -> dict[str, list[dict]]:
        return {
            img.image_id: [
                {"label": a.label, "bbox": a.bbox, "affordances": a.affordances,
                 "cloud_id": a.cloud_id}
                for a in img.annotations
            ]
            for img in self.images
        }


def _r2(x: float) -> float:
    return round(x, 2)


def compute_stats(m: Manifest) -> dict:
    """Recompute every summary statistic from the raw records."""
    n_scenes = len(m.scenes)
    n_images = len(m.images)
    scene_objects: dict[str, set] = {s.scene_id: set() for s in m.scenes}
    scene_affordances: dict[str, set] = {s.scene_id: set() for s in m.scenes}
    scene_queries: dict[str, set] = {s.scene_id: set() for s in m.scenes}
    objects_per_image = []
    affordances_per_image = []
    queries_per_image = []
    source_counts = {s: 0 for s in VALID_SOURCES}
    for img in m.images:
        objects_per_image.append(len(img.annotations))
        affordances_per_image.append(sum(len(a.affordances) for a in img.annotations))
        queries_per_image.append(len(img.applicable_query_ids))
        if img.source in source_counts:
            source_counts[img.source] += 1
        if img.scene_id in scene_objects:
            scene_objects[img.scene_id].update(a.label for a in img.annotations)
            for a in img.annotations:
                scene_affordances[img.scene_id].update(a.affordances)
            scene_queries[img.scene_id].update(img.applicable_query_ids)

    def avg(values):
        return _r2(sum(values) / len(values)) if values else 0.0

    stats = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "totals": {
            "scenes": n_scenes,
            "objects": len(m.object_vocab),
            "affordances": len(m.affordance_vocab),
            "queries": len(m.queries),
            "images": n_images,
            "sources": sum(1 for c in source_counts.values() if c > 0),
        },
        "averages": {
            "images_per_scene": _r2(n_images / n_scenes) if n_scenes else 0.0,
            "objects_per_scene": avg([len(v) for v in scene_objects.values()]),
            "affordances_per_scene": avg([len(v) for v in scene_affordances.values()]),
            "queries_per_scene": avg([len(v) for v in scene_queries.values()]),
            "objects_per_image": avg(objects_per_image),
            "affordances_per_image": avg(affordances_per_image),
            "queries_per_image": avg(queries_per_image),
        },
        "distribution": {
            "max_objects_per_image": max(objects_per_image, default=0),
            "min_objects_per_image": min(objects_per_image, default=0),
            "max_affordances_per_image": max(affordances_per_image, default=0),
            "min_affordances_per_image": min(affordances_per_image, default=0),
        },
        "sources": {
            name: {
                "count": count,
                "percent": _r2(100.0 * count / n_images) if n_images else 0.0,
            }
            for name, count in source_counts.items()
        },
    }
    return stats


def validate_manifest(m: Manifest) -> tuple[dict | None, list[str]]:
    """Return (stats, []) when valid, else (None, error list with paths)."""
    errors: list[str] = []
    scene_ids = set()
    for i, s in enumerate(m.scenes):
        path = f"scenes[{i}]({s.scene_id})"
        if s.scene_id in scene_ids:
            errors.append(f"{path}: duplicate scene_id")
        scene_ids.add(s.scene_id)
        if s.room_type not in ROOM_AREA:
            errors.append(f"{path}: unknown room_type {s.room_type!r}")
        elif s.area != ROOM_AREA[s.room_type]:
            errors.append(
                f"{path}: room_type {s.room_type!r} belongs to area "
                f"{ROOM_AREA[s.room_type]!r}, not {s.area!r}"
            )

    query_ids = set()
    affordances = set(m.affordance_vocab)
    objects = set(m.object_vocab)
    known_actions = affordances | set(m.non_affordance_actions)
    for i, q in enumerate(m.queries):
        path = f"queries[{i}]({q.query_id})"
        if q.query_id in query_ids:
            errors.append(f"{path}: duplicate query_id")
        query_ids.add(q.query_id)
        if q.action not in known_actions:
            errors.append(f"{path}: action {q.action!r} not in affordance vocabulary")
        if q.object not in objects:
            errors.append(f"{path}: object {q.object!r} not in object vocabulary")

    known_clouds = set(m.cloud_ids)
    image_ids = set()
    for i, img in enumerate(m.images):
        path = f"images[{i}]({img.image_id})"
        if img.image_id in image_ids:
            errors.append(f"{path}: duplicate image_id")
        image_ids.add(img.image_id)
        if img.scene_id not in scene_ids:
            errors.append(f"{path}: dangling scene_id {img.scene_id!r}")
        if img.source not in VALID_SOURCES:
            errors.append(f"{path}: unknown source {img.source!r}")
        for j, a in enumerate(img.annotations):
            apath = f"{path}.annotations[{j}]"
            if a.label not in objects:
                errors.append(f"{apath}: label {a.label!r} not in object vocabulary")
            if known_clouds and a.cloud_id not in known_clouds:
                errors.append(f"{apath}: dangling cloud_id {a.cloud_id!r}")
            if not (
                len(a.bbox) == 4
                and 0.0 <= a.bbox[0] < a.bbox[2] <= 1.0
                and 0.0 <= a.bbox[1] < a.bbox[3] <= 1.0
            ):
                errors.append(f"{apath}: invalid bbox {a.bbox}")
            for aff in a.affordances:
                if aff not in affordances:
                    errors.append(f"{apath}: affordance {aff!r} not in vocabulary")
        for qid in img.applicable_query_ids:
            if qid not in query_ids:
                errors.append(f"{path}: dangling query_id {qid!r}")

    for label, acts in m.object_action_map.items():
        if label not in objects:
            errors.append(f"object_action_map[{label!r}]: unknown object label")
        for act in acts:
            if act not in affordances:
                errors.append(f"object_action_map[{label!r}]: unknown affordance {act!r}")

    if errors:
        return None, errors
    return compute_stats(m), []
