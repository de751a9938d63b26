"""Acceptance suite: one test per release criterion, each printing a
single PASS line with its measured numbers on success."""

import itertools
import math
import time

import numpy as np
import pytest

from afford3d.bench.fixtures import build_full_stats_manifest, canonical_mutations
from afford3d.bench.manifest import validate_manifest
from afford3d.bench.metrics import auc, mae, miou, sim
from afford3d.bench.report import emit_report
from afford3d.bench.runner import run_benchmark
from afford3d.cloudstore import icp_register, kabsch
from afford3d.core import GroundingResult, InteractionQuery, PointCloud
from afford3d.decision import REASON_CODES, CompatibilityTable, decide
from afford3d.errors import DegenerateCorrespondences
from afford3d.neural import generate_bundle, layer_norm, multi_head_attention, softmax_rows
from afford3d.affordseg import segment
from oracles import o_auc_pairwise


def ok(name, detail):
    print(f"\nACCEPTANCE PASS {name}: {detail}")


def rand_rotation(rng, max_angle_rad):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = rng.uniform(0, max_angle_rad)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + math.sin(ang) * k + (1 - math.cos(ang)) * (k @ k)


def test_metric_identities():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(100))
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 300))
        vals = rng.uniform(0, 1, n)
        vals[0], vals[1] = 0.9, 0.1  # guarantee both AUC classes
        worst = max(
            worst,
            abs(miou(vals, vals) - 1.0),
            abs(auc(vals, vals) - 1.0),
            abs(sim(vals, vals) - 1.0),
            abs(mae(vals, vals)),
        )
    assert worst <= 1e-12
    dt = time.perf_counter() - t0
    assert dt < 1.0
    ok("metric-identities", f"100 fixtures, worst deviation {worst:.2e}, {dt:.2f}s")


def test_auc_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(101))
    for i in range(500):
        n = int(rng.integers(2, 201))
        pred = rng.integers(0, 9, n) / 8.0  # abundant ties
        gt = rng.integers(0, 2, n).astype(float)
        gt[0], gt[-1] = 1.0, 0.0
        assert auc(pred, gt) == o_auc_pairwise(pred.tolist(), gt.tolist()), i
    dt = time.perf_counter() - t0
    assert dt < 5.0
    ok("auc-oracle-equivalence", f"500 instances N<=200 exactly equal, {dt:.2f}s")


def test_hand_derived_metric_values():
    assert miou([1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 1.0, 0.0]) == 1.0 / 3.0
    assert sim([0.5, 0.5], [1.0, 0.0]) == 0.5
    assert mae([1.0, 0.0], [0.0, 1.0]) == 1.0
    ok("hand-derived-values", "miou=1/3, sim=0.5, mae=1.0 all exact")


def test_icp_recovery():
    t0 = time.perf_counter()
    worst_rot, worst_tr = 0.0, 0.0
    for seed in range(50):
        rng = np.random.Generator(np.random.PCG64(1000 + seed))
        pts = rng.uniform(-1, 1, (100, 3))
        r = rand_rotation(rng, math.radians(30))
        t = rng.uniform(-0.5, 0.5, 3)
        xf, residuals = icp_register(PointCloud(pts), PointCloud(pts @ r.T + t))
        rot_err = math.acos(
            min(1.0, max(-1.0, (np.trace(xf.rotation @ r.T) - 1) / 2))
        )
        tr_err = float(np.linalg.norm(xf.translation - t))
        worst_rot, worst_tr = max(worst_rot, rot_err), max(worst_tr, tr_err)
        assert rot_err < 1e-6 and tr_err < 1e-6, seed
        assert all(
            residuals[i + 1] <= residuals[i] + 1e-12 for i in range(len(residuals) - 1)
        ), seed
    dt = time.perf_counter() - t0
    assert dt < 10.0
    ok("icp-recovery", f"50 pairs, worst rot {worst_rot:.2e} rad, "
                       f"worst trans {worst_tr:.2e}, {dt:.2f}s")


def test_kabsch_contract():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(102))
    produced = 0
    for i in range(1000):
        n = int(rng.integers(3, 60))
        src = rng.uniform(-1, 1, (n, 3))
        if i % 4 == 0:  # near-degenerate: nearly planar or nearly collinear
            src[:, 2] *= 10.0 ** -rng.integers(6, 13)
            if i % 8 == 0:
                src[:, 1] *= 1e-9
        dst = rng.uniform(-1, 1, (n, 3))
        try:
            out = kabsch(src, dst)
        except DegenerateCorrespondences:
            continue
        produced += 1
        r = out.rotation
        assert np.max(np.abs(r.T @ r - np.eye(3))) <= 1e-6, i
        assert abs(np.linalg.det(r) - 1.0) <= 1e-6, i
    dt = time.perf_counter() - t0
    assert dt < 5.0
    ok("kabsch-contract", f"{produced}/1000 sets produced rotations, all "
                          f"orthonormal det +1 within 1e-6, {dt:.2f}s")


def test_neural_invariants():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(103))

    for _ in range(100):
        m = rng.normal(0, 5, (int(rng.integers(1, 8)), int(rng.integers(1, 12))))
        assert np.max(np.abs(softmax_rows(m).sum(axis=1) - 1.0)) <= 1e-9

    for _ in range(100):
        d = int(rng.integers(8, 64))
        m = rng.normal(0, 3, (int(rng.integers(1, 10)), d))
        out = layer_norm(m, np.ones(d), np.zeros(d))
        assert np.max(np.abs(out.mean(axis=1))) <= 1e-6
        # population variance is 1 up to the eps regularizer
        assert np.max(np.abs(out.var(axis=1) - 1.0)) <= 1e-4

    w = generate_bundle(9, d=8, h=2, layers=1, text_vocab=["a"])
    attn_params = {
        "a.wq": w["vlm.vis.block0.attn.wq"],
        "a.wk": w["vlm.vis.block0.attn.wk"],
        "a.wv": w["vlm.vis.block0.attn.wv"],
        "a.wo": w["vlm.vis.block0.attn.wo"],
    }
    from afford3d.neural import WeightBundle

    wb = WeightBundle(attn_params, d=8, h=2, layers=1, seed=0)
    for _ in range(100):
        nk = int(rng.integers(2, 12))
        q = rng.normal(size=(3, 8))
        k = rng.normal(size=(nk, 8))
        v = rng.normal(size=(nk, 8))
        base = multi_head_attention(q, k, v, wb, "a")
        perm = rng.permutation(nk)
        out = multi_head_attention(q, k[perm], v[perm], wb, "a")
        assert np.max(np.abs(out - base)) <= 1e-9

    seg_w = generate_bundle(10, d=8, h=2, layers=1, text_vocab=["sit"])
    text = rng.normal(size=8)
    for _ in range(100):
        n = int(rng.integers(4, 40))
        cloud = PointCloud(rng.uniform(-1, 1, (n, 3)), id="c")
        base = segment(cloud, text, seg_w, "sit").scores
        perm = rng.permutation(n)
        out = segment(PointCloud(cloud.points[perm], id="p"), text, seg_w, "sit").scores
        assert np.array_equal(out, base[perm])  # bitwise

    dt = time.perf_counter() - t0
    assert dt < 10.0
    ok("neural-invariants", f"4 invariants x 100 cases each, {dt:.2f}s")


def test_oracle_end_to_end(oracle_engine, fixture_manifest):
    t0 = time.perf_counter()
    report = run_benchmark(oracle_engine, fixture_manifest)
    overall = report["overall"]
    assert overall["miou_pct"] == 100.0
    assert overall["auc_pct"] == 100.0
    assert overall["sim"] == 1.0
    assert overall["mae"] == 0.0
    compatible = [
        r for r in report["rows"]
        if oracle_engine.table.supports(
            r["query_id"].split("_")[-1], r["affordance"]
        )
    ]
    refused_compatible = [r for r in compatible if r["status"] == "refused"]
    assert refused_compatible == []
    dt = time.perf_counter() - t0
    assert dt < 30.0
    ok("oracle-end-to-end",
       f"{report['counts']['ok']} samples mIoU 100.0 AUC 100.0 SIM 1.0 MAE 0.0, "
       f"0 compatible refusals, {dt:.2f}s")


def test_noise_monotonicity(oracle_engine, fixture_manifest):
    t0 = time.perf_counter()
    maes, mious = [], []
    for sigma in (0.05, 0.1, 0.2):
        rep = run_benchmark(oracle_engine, fixture_manifest, noise_sigma=sigma)
        maes.append(rep["overall"]["mae"])
        mious.append(rep["overall"]["miou_pct"])
    assert maes[0] < maes[1] < maes[2]
    assert mious[0] >= mious[1] >= mious[2]
    dt = time.perf_counter() - t0
    assert dt < 60.0
    ok("noise-monotonicity",
       f"MAE {maes[0]:.4f}<{maes[1]:.4f}<{maes[2]:.4f}, "
       f"mIoU {mious[0]:.2f}>={mious[1]:.2f}>={mious[2]:.2f}, {dt:.2f}s")


def test_manifest_validation(fixture_manifest):
    t0 = time.perf_counter()
    full = build_full_stats_manifest()
    stats, errors = validate_manifest(full)
    assert errors == []
    assert stats["averages"]["images_per_scene"] == 462.40
    assert sum(s["count"] for s in stats["sources"].values()) == 9248
    assert round(stats["sources"]["Houzz"]["percent"], 1) == 49.6
    muts = canonical_mutations(fixture_manifest)
    assert len(muts) == 10
    for name, bad in muts.items():
        mstats, merrors = validate_manifest(bad)
        assert mstats is None and merrors, name
        assert all("[" in e for e in merrors), name  # errors carry a location
    dt = time.perf_counter() - t0
    assert dt < 30.0
    ok("manifest-validation",
       f"images_per_scene 462.40, sources sum 9248, Houzz 49.6%, "
       f"10/10 mutations rejected with located errors, {dt:.2f}s")


def test_decision_matrix(oracle_engine):
    t0 = time.perf_counter()
    table = CompatibilityTable(
        pairs={"sofa": {"sit"}, "bottle": {"open", "pour"}},
        non_affordance_actions={"give", "take", "bring", "fetch"},
    )

    def g(label="sofa", conf=1.0):
        return GroundingResult(label, (0.1, 0.1, 0.9, 0.9), conf)

    seen = set()
    actions = ["give", "take", "bring", "fetch", "sit", "open", "pour", "dance"]
    groundings = [None, g("sofa", 0.2), g("sofa", 0.9), g("bottle", 0.9)]
    for action, gr in itertools.product(actions, groundings):
        out = decide(InteractionQuery(action, "sofa", ""), gr, table, 0.5)
        if not out.proceed:
            seen.add(out.reason_code)
        if action in ("give", "take"):
            assert out.reason_code == "PHYSICAL_ACT", (action, gr)

    # UNPARSEABLE only arises upstream, from queries with no known action
    res = oracle_engine.run_query("zzz qqq", image_id="img_000")
    assert res.decision == "refuse" and res.reason_code == "UNPARSEABLE"
    seen.add(res.reason_code)

    assert seen == set(REASON_CODES)
    dt = time.perf_counter() - t0
    assert dt < 1.0
    ok("decision-matrix",
       f"all {len(REASON_CODES)} reason codes exercised, give/take always "
       f"PHYSICAL_ACT over {len(groundings)} groundings, {dt:.2f}s")


def test_determinism(oracle_engine, fixture_manifest, tmp_path):
    names = ("summary.csv", "environments.csv", "areas.csv",
             "per_affordance.csv", "raw_rows.json",
             "env_scatter.png", "env_radar.png")
    dirs = []
    for run in ("a", "b"):
        report = run_benchmark(oracle_engine, fixture_manifest, noise_sigma=0.1)
        out = tmp_path / run
        emit_report(report, out)
        dirs.append(out)
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
    ok("determinism", f"two full runs byte-identical across {len(names)} report files")
