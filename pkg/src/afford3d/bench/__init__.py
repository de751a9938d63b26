from .manifest import Manifest, validate_manifest, compute_stats
from .metrics import miou, auc, sim, mae
from .runner import run_benchmark, aggregate_rows, config_hash
from .report import emit_report, emit_figures

__all__ = [
    "Manifest",
    "validate_manifest",
    "compute_stats",
    "miou",
    "auc",
    "sim",
    "mae",
    "run_benchmark",
    "aggregate_rows",
    "config_hash",
    "emit_report",
    "emit_figures",
]
