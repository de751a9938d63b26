"""Report emission: delimited tables, raw-row JSON, and figures.

Outputs are fully deterministic for a fixed config and input so report
directories can be diffed byte-for-byte between runs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .runner import METRIC_KEYS, REPORT_SCHEMA_VERSION


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_csv(path, header_meta: dict, columns: list[str], rows: list[list]):
    with open(path, "w", newline="") as f:
        f.write("# " + " ".join(f"{k}={v}" for k, v in header_meta.items()) + "\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_report(report: dict, outdir, with_figures: bool = True) -> list[str]:
    """Write summary.csv, environments.csv, per_affordance.csv, raw_rows.json
    and (optionally) scatter/radar figures. Returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema": report.get("schema_version", REPORT_SCHEMA_VERSION),
        "config": report.get("config_hash", ""),
    }
    written = []

    overall = report["overall"]
    path = outdir / "summary.csv"
    _write_csv(
        path,
        meta,
        ["method", "miou_pct", "auc_pct", "sim", "mae", "n", "refusal_rate"],
        [[
            "pipeline",
            overall.get("miou_pct"),
            overall.get("auc_pct"),
            overall.get("sim"),
            overall.get("mae"),
            overall.get("n"),
            report.get("refusal_rate"),
        ]],
    )
    written.append(str(path))

    for name, key in (("environments.csv", "per_environment"),
                      ("areas.csv", "per_area"),
                      ("per_affordance.csv", "per_affordance")):
        groups = report.get(key, {})
        path = outdir / name
        _write_csv(
            path,
            meta,
            ["group", "miou_pct", "auc_pct", "sim", "mae", "n"],
            [
                [g] + [groups[g].get(k) for k in METRIC_KEYS] + [groups[g]["n"]]
                for g in sorted(groups)
            ],
        )
        written.append(str(path))

    path = outdir / "raw_rows.json"
    with open(path, "w") as f:
        json.dump(
            {
                "schema_version": report.get("schema_version", REPORT_SCHEMA_VERSION),
                "config_hash": report.get("config_hash", ""),
                "noise_sigma": report.get("noise_sigma", 0.0),
                "counts": report.get("counts", {}),
                "rows": report.get("rows", []),
            },
            f,
            indent=1,
            sort_keys=True,
        )
    written.append(str(path))

    if with_figures:
        written.extend(emit_figures(report, outdir))
    return written


def emit_figures(report: dict, outdir) -> list[str]:
    """Scatter (mIoU vs SIM, bubble size MAE) and AUC radar per room type."""
    outdir = Path(outdir)
    envs = {
        name: g
        for name, g in sorted(report.get("per_environment", {}).items())
        if g.get("miou_pct") is not None
    }
    written = []

    fig, ax = plt.subplots(figsize=(7, 5))
    if envs:
        x = [g["sim"] for g in envs.values()]
        y = [g["miou_pct"] for g in envs.values()]
        size = [200.0 * (g["mae"] + 0.05) for g in envs.values()]
        ax.scatter(x, y, s=size, alpha=0.6, edgecolors="k")
        for name, xi, yi in zip(envs, x, y):
            ax.annotate(name, (xi, yi), fontsize=7, xytext=(3, 3),
                        textcoords="offset points")
    ax.set_xlabel("SIM")
    ax.set_ylabel("mIoU (%)")
    ax.set_title("Per-environment mIoU vs SIM (bubble = MAE)")
    scatter_path = outdir / "env_scatter.png"
    fig.savefig(scatter_path, dpi=100, metadata={"Software": "afford3d"})
    plt.close(fig)
    written.append(str(scatter_path))

    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(111, polar=True)
    names = [n for n, g in envs.items() if g.get("auc_pct") is not None]
    if names:
        values = [envs[n]["auc_pct"] for n in names]
        angles = np.linspace(0, 2 * np.pi, len(names), endpoint=False).tolist()
        values_c = values + values[:1]
        angles_c = angles + angles[:1]
        ax.plot(angles_c, values_c, "o-", linewidth=1.5)
        ax.fill(angles_c, values_c, alpha=0.25)
        ax.set_xticks(angles)
        ax.set_xticklabels(names, fontsize=7)
        ax.set_ylim(0, 100)
    ax.set_title("AUC (%) per room type")
    radar_path = outdir / "env_radar.png"
    fig.savefig(radar_path, dpi=100, metadata={"Software": "afford3d"})
    plt.close(fig)
    written.append(str(radar_path))
    return written
