"""Operator command line.

All machine output goes to stdout as JSON; logs go to stderr. Exit codes:
0 success (refusals included), 1 validation failure, 2 infrastructure
error. A config file holds `key = value` lines (strings, numbers, true/
false, # comments); command-line flags override file values.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .bench.fixtures import materialize_fixture
from .bench.manifest import Manifest, validate_manifest
from .bench.report import emit_report
from .bench.runner import aggregate_rows, run_benchmark
from .cloudstore import ingest_dir, load_store, save_store
from .engine import EngineConfig, build_engine
from .errors import Afford3dError
from .service import build_engine_from_paths, stats_json_bytes

logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
log = logging.getLogger("afford3d")

EXIT_VALIDATION = 1
EXIT_INFRA = 2


def parse_config_file(path) -> dict:
    """`key = value` lines; # comments; quoted or bare strings; numbers; bools."""
    values: dict = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if val.startswith(('"', "'")) and val.endswith(val[0]) and len(val) >= 2:
                values[key] = val[1:-1]
            elif val.lower() in ("true", "false"):
                values[key] = val.lower() == "true"
            else:
                try:
                    values[key] = int(val)
                except ValueError:
                    try:
                        values[key] = float(val)
                    except ValueError:
                        values[key] = val
    return values


def _engine_config(cfg: dict) -> EngineConfig:
    return EngineConfig(
        backend=cfg.get("backend", "oracle"),
        remote_url=cfg.get("remote_url", ""),
        segmentation=cfg.get("segmentation", "oracle"),
        confidence_threshold=float(cfg.get("threshold", 0.5)),
        icp_max_iters=int(cfg.get("icp_max_iters", 50)),
        icp_tol=float(cfg.get("icp_tol", 1e-8)),
        icp_trim_fraction=float(cfg.get("icp_trim_fraction", 0.0)),
        seed=int(cfg.get("seed", 0)),
    )


def _merge(config_path, **flags) -> dict:
    cfg = parse_config_file(config_path) if config_path else {}
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    return cfg


def _emit(doc) -> None:
    click.echo(json.dumps(doc, indent=1, sort_keys=True))


@click.group()
def main():
    """Language-guided 3D affordance segmentation toolkit."""


@main.command()
@click.argument("src_dir", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Write the indexed store here.")
def ingest(src_dir, out):
    """Build a store index from cloud/map files in SRC_DIR."""
    try:
        index = ingest_dir(src_dir)
    except (OSError, Afford3dError, KeyError, ValueError) as e:
        log.error("ingest failed: %s", e)
        sys.exit(EXIT_INFRA)
    if out:
        save_store(index, out)
    _emit(
        {
            "records": len(index.records),
            "labels": index.labels(),
            "written": str(out) if out else None,
        }
    )


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True))
def validate(manifest_path):
    """Validate MANIFEST_PATH; print its statistics or the error list."""
    try:
        manifest = Manifest.load(manifest_path)
    except (OSError, KeyError, ValueError, TypeError) as e:
        log.error("cannot load manifest: %s", e)
        sys.exit(EXIT_INFRA)
    stats, errors = validate_manifest(manifest)
    if errors:
        _emit({"valid": False, "errors": errors})
        sys.exit(EXIT_VALIDATION)
    click.echo(stats_json_bytes(manifest).decode())


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True))
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--backend", type=click.Choice(["toy", "oracle", "remote"]), default=None)
@click.option("--segmentation", type=click.Choice(["toy", "oracle"]), default=None)
@click.option("--remote-url", default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--noise-sigma", type=float, default=0.0)
@click.option("--out", type=click.Path(), default="report")
@click.option("--figures/--no-figures", default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def bench(manifest_path, store_path, backend, segmentation, remote_url, threshold,
          seed, noise_sigma, out, figures, config_path):
    """Run the benchmark over MANIFEST_PATH and write report files."""
    cfg = _merge(config_path, backend=backend, segmentation=segmentation,
                 remote_url=remote_url, threshold=threshold, seed=seed)
    try:
        engine = build_engine_from_paths(manifest_path, store_path, _engine_config(cfg))
    except (OSError, Afford3dError, KeyError, ValueError) as e:
        log.error("cannot build engine: %s", e)
        sys.exit(EXIT_INFRA)
    stats, errors = validate_manifest(engine.manifest)
    if errors:
        _emit({"valid": False, "errors": errors})
        sys.exit(EXIT_VALIDATION)
    report = run_benchmark(engine, engine.manifest, noise_sigma=noise_sigma)
    written = emit_report(report, out, with_figures=figures)
    _emit(
        {
            "overall": report["overall"],
            "refusal_rate": report["refusal_rate"],
            "counts": report["counts"],
            "config_hash": report["config_hash"],
            "written": written,
        }
    )


@main.command()
@click.argument("image")
@click.argument("text")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--backend", type=click.Choice(["toy", "oracle", "remote"]), default=None)
@click.option("--segmentation", type=click.Choice(["toy", "oracle"]), default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def query(image, text, manifest_path, store_path, backend, segmentation, threshold,
          seed, config_path):
    """One pipeline pass: IMAGE is an image_id or a file path."""
    cfg = _merge(config_path, backend=backend, segmentation=segmentation,
                 threshold=threshold, seed=seed)
    try:
        engine = build_engine_from_paths(manifest_path, store_path, _engine_config(cfg))
    except (OSError, Afford3dError, KeyError, ValueError) as e:
        log.error("cannot build engine: %s", e)
        sys.exit(EXIT_INFRA)
    image_id = None
    image_bytes = None
    if image in engine.annotations:
        image_id = image
    elif Path(image).exists():
        image_bytes = Path(image).read_bytes()
    else:
        log.error("IMAGE %r is neither a known image_id nor a file", image)
        sys.exit(EXIT_INFRA)
    result = engine.run_query(text, image_id=image_id, image_bytes=image_bytes)
    _emit(result.to_json())  # refusal is a successful outcome: exit 0


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8703)
@click.option("--host", default="127.0.0.1")
@click.option("--backend", type=click.Choice(["toy", "oracle", "remote"]), default=None)
@click.option("--segmentation", type=click.Choice(["toy", "oracle"]), default=None)
@click.option("--cors-origin", multiple=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve(manifest_path, store_path, port, host, backend, segmentation, cors_origin,
          config_path):
    """Serve the /v1 JSON API."""
    import uvicorn

    from .service import create_app

    cfg = _merge(config_path, backend=backend, segmentation=segmentation)
    app = create_app(
        manifest_path=manifest_path,
        store_path=store_path,
        config=_engine_config(cfg),
        cors_origins=list(cors_origin) or None,
    )
    uvicorn.run(app, host=host, port=port)


@main.command("export-report")
@click.argument("raw_json", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv")
@click.option("--out", type=click.Path(), default="report")
@click.option("--figures/--no-figures", default=True)
def export_report(raw_json, fmt, out, figures):
    """Re-aggregate RAW_JSON rows and write the delimited tables again."""
    with open(raw_json) as f:
        doc = json.load(f)
    report = aggregate_rows(doc["rows"])
    report["config_hash"] = doc.get("config_hash", "")
    report["noise_sigma"] = doc.get("noise_sigma", 0.0)
    written = emit_report(report, out, with_figures=figures)
    _emit({"overall": report["overall"], "written": written})


@main.command("synth-fixture")
@click.argument("out_dir", type=click.Path())
@click.option("--seed", type=int, default=7)
def synth_fixture(out_dir, seed):
    """Materialize the small synthetic benchmark fixture under OUT_DIR."""
    manifest_path, store_dir = materialize_fixture(out_dir, seed=seed)
    _emit({"manifest": str(manifest_path), "store": str(store_dir)})


if __name__ == "__main__":
    main()
