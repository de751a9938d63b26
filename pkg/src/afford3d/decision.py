"""Proceed/refuse gate between grounding and the 3D stages.

Refusals are values, not errors: the interactive console shows them
verbatim, and the benchmark counts them separately from metric rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import GroundingResult, InteractionQuery

DEFAULT_THRESHOLD = 0.5
DEFAULT_NON_AFFORDANCE_ACTIONS = frozenset({"give", "take", "bring", "fetch"})

REASON_TEMPLATES = {
    "PHYSICAL_ACT": "I can analyze and segment, but I cannot physically {action} objects.",
    "OBJECT_NOT_FOUND": "I could not find a {object} in this image.",
    "LOW_CONFIDENCE": "I am not confident enough that this is a {object} (confidence {confidence:.2f}).",
    "INCOMPATIBLE_PAIR": "A {object} does not support the action '{action}'.",
    "UNPARSEABLE": "I could not understand what to do from: {raw_text!r}.",
}

REASON_CODES = tuple(REASON_TEMPLATES)


@dataclass(frozen=True)
class CompatibilityTable:
    """object label -> set of supported affordance actions."""

    pairs: dict[str, frozenset[str]]
    non_affordance_actions: frozenset[str] = DEFAULT_NON_AFFORDANCE_ACTIONS

    def __post_init__(self):
        object.__setattr__(
            self, "pairs", {k: frozenset(v) for k, v in self.pairs.items()}
        )
        object.__setattr__(
            self, "non_affordance_actions", frozenset(self.non_affordance_actions)
        )

    @classmethod
    def from_manifest(cls, manifest) -> "CompatibilityTable":
        extra = frozenset(getattr(manifest, "non_affordance_actions", ()) or ())
        return cls(
            pairs=dict(manifest.object_action_map),
            non_affordance_actions=DEFAULT_NON_AFFORDANCE_ACTIONS | extra,
        )

    def supports(self, label: str, action: str) -> bool:
        return action in self.pairs.get(label, frozenset())

    def objects_supporting(self, action: str) -> list[str]:
        return sorted(label for label, acts in self.pairs.items() if action in acts)


@dataclass(frozen=True)
class DecisionOutcome:
    proceed: bool
    label: str | None = None
    reason_code: str | None = None
    message: str | None = None

    def __post_init__(self):
        if not self.proceed and not self.message:
            raise ValueError("refusals must carry a message")


def refuse(reason_code: str, **fmt) -> DecisionOutcome:
    return DecisionOutcome(
        proceed=False,
        reason_code=reason_code,
        message=REASON_TEMPLATES[reason_code].format(**fmt),
    )


def decide(
    query: InteractionQuery,
    grounding: GroundingResult | None,
    table: CompatibilityTable,
    threshold: float = DEFAULT_THRESHOLD,
) -> DecisionOutcome:
    """First matching rule wins; grounding=None means the object was not found.

    1. non-affordance action      -> PHYSICAL_ACT
    2. object not found           -> OBJECT_NOT_FOUND
    3. confidence below threshold -> LOW_CONFIDENCE
    4. (object, action) unsupported -> INCOMPATIBLE_PAIR
    5. otherwise proceed
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0,1], got {threshold}")
    if query.action in table.non_affordance_actions:
        return refuse("PHYSICAL_ACT", action=query.action)
    if grounding is None:
        return refuse("OBJECT_NOT_FOUND", object=query.object)
    if grounding.confidence < threshold:
        return refuse(
            "LOW_CONFIDENCE", object=query.object, confidence=grounding.confidence
        )
    if not table.supports(grounding.label, query.action):
        return refuse("INCOMPATIBLE_PAIR", object=grounding.label, action=query.action)
    return DecisionOutcome(proceed=True, label=grounding.label)
