import itertools

import pytest
from hypothesis import given, strategies as st

from afford3d.core import GroundingResult, InteractionQuery
from afford3d.decision import (
    REASON_CODES,
    CompatibilityTable,
    decide,
)

TABLE = CompatibilityTable(
    pairs={"sofa": {"sit", "support"}, "bottle": {"open", "pour"}},
    non_affordance_actions={"give", "take", "bring", "fetch"},
)


def grounding(label="sofa", conf=1.0):
    return GroundingResult(label, (0.1, 0.1, 0.9, 0.9), conf)


class TestRules:
    def test_physical_act_refused(self):
        out = decide(InteractionQuery("give", "apple", "give me an apple"), grounding(), TABLE)
        assert not out.proceed and out.reason_code == "PHYSICAL_ACT"
        assert "give" in out.message

    def test_physical_act_dominates_missing_grounding(self):
        out = decide(InteractionQuery("take", "table", "take the table"), None, TABLE)
        assert out.reason_code == "PHYSICAL_ACT"

    def test_object_not_found(self):
        out = decide(InteractionQuery("sit", "sofa", ""), None, TABLE)
        assert out.reason_code == "OBJECT_NOT_FOUND"

    def test_low_confidence(self):
        out = decide(InteractionQuery("sit", "sofa", ""), grounding(conf=0.3), TABLE, 0.5)
        assert out.reason_code == "LOW_CONFIDENCE"

    def test_incompatible_pair(self):
        out = decide(InteractionQuery("pour", "sofa", ""), grounding("sofa"), TABLE)
        assert out.reason_code == "INCOMPATIBLE_PAIR"

    def test_proceed(self):
        out = decide(InteractionQuery("sit", "sofa", ""), grounding("sofa"), TABLE)
        assert out.proceed and out.label == "sofa"

    def test_threshold_boundary_inclusive(self):
        # confidence == threshold is enough to proceed
        out = decide(InteractionQuery("sit", "sofa", ""), grounding(conf=0.5), TABLE, 0.5)
        assert out.proceed

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            decide(InteractionQuery("sit", "sofa", ""), grounding(), TABLE, 1.5)


class TestExhaustiveMatrix:
    def test_every_combination_yields_exactly_one_outcome(self):
        actions = ["give", "sit", "pour", "dance"]
        groundings = [None, grounding("sofa", 0.2), grounding("sofa", 0.9), grounding("bottle", 0.9)]
        seen_codes = set()
        for action, g in itertools.product(actions, groundings):
            out = decide(InteractionQuery(action, "sofa", ""), g, TABLE, 0.5)
            if out.proceed:
                assert out.label and out.reason_code is None
            else:
                assert out.reason_code in REASON_CODES and out.message
                seen_codes.add(out.reason_code)
        assert {"PHYSICAL_ACT", "OBJECT_NOT_FOUND", "LOW_CONFIDENCE", "INCOMPATIBLE_PAIR"} <= seen_codes

    def test_physical_act_dominates_everything(self):
        for g in [None, grounding("sofa", 0.01), grounding("bottle", 1.0)]:
            for action in ("give", "take", "bring", "fetch"):
                out = decide(InteractionQuery(action, "sofa", ""), g, TABLE)
                assert out.reason_code == "PHYSICAL_ACT"


class TestProperties:
    @given(
        conf=st.floats(0, 1),
        t1=st.floats(0, 1),
        t2=st.floats(0, 1),
    )
    def test_threshold_monotonicity(self, conf, t1, t2):
        q = InteractionQuery("sit", "sofa", "")
        g = grounding("sofa", conf)
        if t2 <= t1 and decide(q, g, TABLE, t1).proceed:
            assert decide(q, g, TABLE, t2).proceed

    def test_pure_function(self):
        q = InteractionQuery("sit", "sofa", "")
        g = grounding("sofa", 0.7)
        assert decide(q, g, TABLE) == decide(q, g, TABLE)


class TestTable:
    def test_from_manifest(self, fixture_manifest):
        table = CompatibilityTable.from_manifest(fixture_manifest)
        assert table.supports("sofa", "sit")
        assert not table.supports("sofa", "pour")
        assert "give" in table.non_affordance_actions

    def test_objects_supporting(self):
        assert TABLE.objects_supporting("sit") == ["sofa"]
        assert TABLE.objects_supporting("fly") == []
