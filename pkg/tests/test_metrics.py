import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afford3d.bench.metrics import auc, mae, miou, sim
from afford3d.errors import DegenerateGroundTruth, LengthMismatch, ZeroMassMap
from oracles import o_auc_pairwise


class TestMiou:
    def test_hand_case_one_third(self):
        assert miou([1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 1.0, 0.0]) == pytest.approx(1 / 3)

    def test_perfect(self):
        assert miou([0.9, 0.1], [1.0, 0.0]) == 1.0

    def test_disjoint(self):
        assert miou([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_both_empty_is_one(self):
        assert miou([0.1, 0.2], [0.0, 0.0]) == 1.0

    def test_binarize_threshold_half_inclusive(self):
        # prediction exactly at 0.5 counts as positive
        assert miou([0.5], [1.0]) == 1.0
        assert miou([0.5], [0.0]) == 0.0
        assert miou([0.49999], [0.0]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            miou([1.0], [1.0, 0.0])

    @given(
        st.lists(st.floats(0, 1), min_size=1, max_size=30),
    )
    @settings(max_examples=50, deadline=None)
    def test_identity_is_perfect(self, vals):
        assert miou(vals, vals) == 1.0


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.1, 0.2], [1.0, 1.0, 0.0, 0.0]) == 1.0

    def test_inverted(self):
        assert auc([0.1, 0.9], [1.0, 0.0]) == 0.0

    def test_all_tied_is_half(self):
        assert auc([0.5, 0.5, 0.5], [1.0, 0.0, 0.0]) == 0.5

    def test_degenerate_single_class(self):
        with pytest.raises(DegenerateGroundTruth):
            auc([0.1, 0.9], [1.0, 1.0])

    def test_matches_pairwise_oracle_exactly(self):
        rng = np.random.Generator(np.random.PCG64(40))
        for _ in range(100):
            n = int(rng.integers(2, 60))
            # half-integer predictions force abundant ties
            pred = rng.integers(0, 5, n) / 4.0
            gt = rng.integers(0, 2, n).astype(float)
            if gt.min() == gt.max():
                gt[0] = 1.0 - gt[0]
            assert auc(pred, gt) == o_auc_pairwise(pred.tolist(), gt.tolist())

    def test_permutation_invariant(self):
        rng = np.random.Generator(np.random.PCG64(41))
        pred = rng.uniform(0, 1, 25)
        gt = rng.integers(0, 2, 25).astype(float)
        gt[0], gt[1] = 0.0, 1.0
        base = auc(pred, gt)
        perm = rng.permutation(25)
        assert auc(pred[perm], gt[perm]) == base


class TestSim:
    def test_half_overlap(self):
        assert sim([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)

    def test_identical_maps(self):
        assert sim([0.2, 0.8], [0.2, 0.8]) == pytest.approx(1.0)

    def test_zero_mass_raises(self):
        with pytest.raises(ZeroMassMap):
            sim([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ZeroMassMap):
            sim([1.0, 0.0], [0.0, 0.0])

    def test_scale_invariant(self):
        # sim normalizes each map to unit mass first
        a = [0.1, 0.3, 0.6]
        b = [0.2, 0.6, 1.2]
        assert sim(a, b) == pytest.approx(1.0)

    @given(
        st.lists(st.floats(0.01, 1), min_size=1, max_size=20),
        st.lists(st.floats(0.01, 1), min_size=1, max_size=20),
    )
    @settings(max_examples=50, deadline=None)
    def test_range(self, a, b):
        n = min(len(a), len(b))
        v = sim(a[:n], b[:n])
        assert 0.0 <= v <= 1.0 + 1e-12


class TestMae:
    def test_hand_case(self):
        assert mae([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_zero_on_identity(self):
        assert mae([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_mean_not_sum(self):
        assert mae([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]) == 0.25

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_symmetry(self, vals):
        other = [1.0 - v for v in vals]
        assert mae(vals, other) == mae(other, vals)
