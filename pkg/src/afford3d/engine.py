"""Pipeline orchestrator: parse -> ground -> decide -> retrieve -> register
-> segment, producing one SegmentationResult per query.

The common path is image-only: no query-side depth exists, so the 2D/3D
alignment step degenerates to the identity transform over the retrieved
canonical cloud. When a query-side cloud is supplied, ICP registers it
against the canonical one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import affordseg, cloudstore, vlm
from .core import (
    InteractionQuery,
    PointCloud,
    RigidTransform,
    SegmentationResult,
    match_action,
    match_object,
    normalize_cloud,
    tokenize,
)
from .decision import CompatibilityTable, DecisionOutcome, decide, refuse
from .errors import (
    LabelNotInStore,
    NoActionFound,
    NoObjectFound,
    ObjectNotFound,
)
from .neural import WeightBundle


@dataclass
class EngineConfig:
    backend: str = "oracle"  # toy | oracle | remote
    remote_url: str = ""
    segmentation: str = "oracle"  # toy | oracle
    confidence_threshold: float = 0.5
    icp_max_iters: int = 50
    icp_tol: float = 1e-8
    icp_trim_fraction: float = 0.0
    seed: int = 0

    def to_json(self) -> dict:
        return dict(vars(self))


@dataclass
class Engine:
    """Immutable snapshot of everything a query needs."""

    manifest: object
    store: cloudstore.StoreIndex
    weights: WeightBundle
    backend: vlm.GroundingBackend
    table: CompatibilityTable
    config: EngineConfig
    image_loader: object = None
    annotations: dict = field(default_factory=dict)

    def run_query(
        self,
        text: str,
        image_id: str | None = None,
        image_bytes: bytes | None = None,
        query_cloud: PointCloud | None = None,
    ) -> SegmentationResult:
        timing: dict[str, float] = {}
        t0 = time.perf_counter()
        try:
            query = self._parse(text, image_id)
        except NoActionFound:
            outcome = refuse("UNPARSEABLE", raw_text=text)
            return _refusal(outcome, timing)
        except NoObjectFound:
            outcome = refuse("OBJECT_NOT_FOUND", object="matching object")
            return _refusal(outcome, timing)
        timing["parse"] = _ms(t0)

        t0 = time.perf_counter()
        grounding = None
        if query.action not in self.table.non_affordance_actions:
            image_ref = image_bytes if image_bytes is not None else image_id
            try:
                grounding = self.backend.ground(image_ref, query)
            except ObjectNotFound:
                grounding = None
        timing["ground"] = _ms(t0)

        t0 = time.perf_counter()
        outcome = decide(query, grounding, self.table, self.config.confidence_threshold)
        timing["decide"] = _ms(t0)
        if not outcome.proceed:
            return _refusal(outcome, timing, grounding)

        t0 = time.perf_counter()
        try:
            record = cloudstore.retrieve(self.store, outcome.label)
        except LabelNotInStore:
            out = refuse("OBJECT_NOT_FOUND", object=outcome.label)
            return _refusal(out, timing, grounding)
        timing["retrieve"] = _ms(t0)

        t0 = time.perf_counter()
        if query_cloud is not None:
            transform, _ = cloudstore.icp_register(
                query_cloud,
                record.cloud,
                max_iters=self.config.icp_max_iters,
                tol=self.config.icp_tol,
                trim_fraction=self.config.icp_trim_fraction,
            )
        else:
            transform = RigidTransform.identity()
        timing["register"] = _ms(t0)

        t0 = time.perf_counter()
        if self.config.segmentation == "oracle":
            amap = affordseg.segment_oracle(record, query.action)
        else:
            cloud, _, _ = normalize_cloud(record.cloud)
            text_emb = vlm.encode_text(query, self.weights)
            amap = affordseg.segment(cloud, text_emb.vector, self.weights, query.action)
        timing["segment"] = _ms(t0)

        return SegmentationResult(
            decision="proceed",
            grounding=grounding,
            map=amap,
            transform=transform,
            cloud_id=record.cloud.id,
            timing_ms=timing,
        )

    def _parse(self, text: str, image_id: str | None) -> InteractionQuery:
        if not text.strip():
            raise NoActionFound("empty query")
        actions = set(self.manifest.affordance_vocab) | self.table.non_affordance_actions
        objects = set(self.manifest.object_vocab)
        tokens = tokenize(text)
        action = match_action(tokens, actions, dict(self.manifest.action_aliases))
        if action is None:
            raise NoActionFound(f"no known action in {text!r}")
        obj = match_object(tokens, objects)
        if obj is None:
            # locate-by-affordance fallback: "Where can I sit?" resolves to
            # the first object in the scene supporting the action
            obj = self.resolve_object_fallback(action, image_id)
            if obj is None:
                raise NoObjectFound(f"nothing here supports {action!r}")
        return InteractionQuery(action=action, object=obj, raw_text=text)

    def resolve_object_fallback(self, action: str, image_id: str | None) -> str | None:
        """First object supporting the action: scene annotation order wins."""
        if image_id is not None and image_id in self.annotations:
            for ann in self.annotations[image_id]:
                if self.table.supports(ann["label"], action):
                    return ann["label"]
        candidates = self.table.objects_supporting(action)
        return candidates[0] if candidates else None


def build_text_vocab(manifest) -> list[str]:
    """Tokenizer vocabulary: object labels, actions, alias words, <unk>."""
    words: set[str] = set()
    words.update(manifest.object_vocab)
    words.update(manifest.affordance_vocab)
    words.update(manifest.non_affordance_actions)
    for phrase in manifest.action_aliases:
        words.update(phrase.lower().split())
    return ["<unk>"] + sorted(words)


def build_engine(
    manifest,
    store: cloudstore.StoreIndex,
    config: EngineConfig,
    weights: WeightBundle | None = None,
    image_loader=None,
) -> Engine:
    """Assemble an immutable engine snapshot from loaded artifacts."""
    from .neural import generate_bundle

    if weights is None:
        weights = generate_bundle(config.seed, text_vocab=build_text_vocab(manifest))
    annotations = manifest.annotations_by_image()
    table = CompatibilityTable.from_manifest(manifest)
    name = config.backend.lower()
    if name == "oracle":
        backend = vlm.OracleBackend(annotations)
    elif name == "toy":
        backend = vlm.ToyBackend(
            weights,
            label_regions=manifest.label_regions,
            annotations_by_image=annotations,
            image_loader=image_loader,
        )
    elif name == "remote":
        backend = vlm.RemoteBackend(config.remote_url)
    else:
        raise ValueError(f"unknown backend {config.backend!r}")
    return Engine(
        manifest=manifest,
        store=store,
        weights=weights,
        backend=backend,
        table=table,
        config=config,
        image_loader=image_loader,
        annotations=annotations,
    )


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


def _refusal(outcome: DecisionOutcome, timing, grounding=None) -> SegmentationResult:
    return SegmentationResult(
        decision="refuse",
        reason_code=outcome.reason_code,
        message=outcome.message,
        grounding=grounding,
        timing_ms=timing,
    )
