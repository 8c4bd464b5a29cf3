"""
Experiment Harness — Shared Pieces
==================================
Benchmark configuration, per-item seeding, the worker pool, log-log slope
fits and result writing (one table file per figure/table plus a JSON run
manifest).

Config file: a JSON object whose keys are BenchConfig field names.
"""

import dataclasses
import hashlib
import json
import logging
import os
import subprocess
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

BASE_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
SCHEMA_VERSION = "1.0"
FLOAT_FORMAT = "%.10g"

EXP1_JOINT = [[0.4, 0.1], [0.1, 0.4]]
PC_TAU_GRID = [0.05, 0.03, 0.02, 0.014, 0.01, 0.007, 0.005, 0.003, 0.002, 0.001]
PRECISION_TAU_GRID = [0.1, 0.05, 0.02, 0.01, 0.005, 0.003, 0.002, 0.001]


@dataclass
class BenchConfig:
    seed: int = 1                       # exp2 tail slopes shift with the seed, see DESIGN.md
    out_dir: str = os.path.join(BASE_DIR, "results", "benchmarks")
    threads: int = 1
    fmt: str = "csv"
    L: Optional[float] = None           # None -> per-experiment default
    shots: int = 5
    trials: Optional[int] = None        # None -> per-experiment default
    tau_grid: Optional[List[float]] = None

    # Experiment 1
    exp1_L: float = 2.0
    exp1_bits: int = 6
    exp1_t_values: List[int] = field(default_factory=lambda: [3, 4, 5, 6, 7, 8])
    exp1_codec_mode: str = "grid"
    exp1_mc_trials: int = 2000

    # Experiment 2
    exp2_instances: int = 20
    exp2_trials: int = 120
    exp2_mi_range: List[float] = field(default_factory=lambda: [0.030, 0.323])
    exp2_classical_min: int = 50
    exp2_classical_max: int = 500_000
    exp2_classical_points: int = 41
    exp2_quantum_min: int = 8
    exp2_quantum_max: int = 8192
    exp2_L: float = 3.0

    # Experiment 3
    exp3_trials: int = 20
    exp3_max_depth: int = 3
    exp3_L: float = 3.0
    exp3_threshold: Optional[float] = None
    exp3_networks: List[str] = field(default_factory=lambda: ["asia", "synthetic12"])
    exp3_synthetic_nodes: int = 12
    exp3_synthetic_edge_prob: float = 0.22
    exp3_synthetic_seed: int = 11
    exp3_synthetic_edges: Optional[List[List[int]]] = None

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.fmt!r}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> BenchConfig:
    """Defaults <- JSON file <- explicit overrides (None values ignored)."""
    values = {}
    if path:
        with open(path, encoding="utf-8") as f:
            values.update(json.load(f))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in dataclasses.fields(BenchConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return BenchConfig(**values)


# ── Seeding and pool ───────────────────────────────────────────
def derive_seed(master_seed: int, *keys) -> int:
    text = "/".join(str(k) for k in (master_seed,) + keys)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def derive_rng(master_seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))


def run_pool(fn, items, threads: int = 1) -> list:
    """Results in submission order for any thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=threads)(delayed(fn)(item) for item in items)


# ── Fits ───────────────────────────────────────────────────────
def fit_loglog_slope(points, tail_only: bool = True) -> float:
    """Least-squares slope of log10 error on log10 budget.

    With tail_only, only budgets >= the geometric median of the distinct
    budgets are used.
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("points must be (budget, error) pairs")
    if np.any(data <= 0):
        raise ValueError("log-log fit needs positive budgets and errors")
    if tail_only:
        grid = np.unique(data[:, 0])
        cut = float(np.exp(np.median(np.log(grid))))
        data = data[data[:, 0] >= cut * (1 - 1e-12)]
    if len(data) < 3:
        raise ValueError(f"need at least 3 points for a slope, got {len(data)}")
    slope, _ = np.polyfit(np.log10(data[:, 0]), np.log10(data[:, 1]), 1)
    return float(slope)


# ── Results ────────────────────────────────────────────────────
@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    tables: Dict[str, pd.DataFrame]
    fitted_slopes: Dict[str, float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0

    @property
    def rows(self) -> list:
        return [row for table in self.tables.values() for row in table.to_dict("records")]


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=BASE_DIR,
                             capture_output=True, text=True, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _json_ready(value):
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if np.isnan(value) else value
    return value


def write_result(result: ExperimentResult, out_dir: str, fmt: str = "csv") -> list:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, table in result.tables.items():
        path = os.path.join(out_dir, f"{result.experiment}_{name}.{fmt}")
        if fmt == "csv":
            table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        else:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(_json_ready(table.to_dict("records")), f, indent=2)
        written.append(path)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": result.experiment,
        "config": result.config,
        "master_seed": result.config.get("seed"),
        "tables": {name: list(table.columns) for name, table in result.tables.items()},
        "fitted_slopes": result.fitted_slopes,
        "metadata": result.metadata,
        "runtime_seconds": round(result.runtime_seconds, 3),
        "git_describe": git_describe(),
    }
    path = os.path.join(out_dir, f"{result.experiment}_manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_json_ready(manifest), f, indent=2)
    written.append(path)
    logger.info("wrote %d files for %s to %s", len(written), result.experiment, out_dir)
    return written


def summarize(result: ExperimentResult):
    print(f"\n{'=' * 60}")
    print(f"  {result.experiment.upper()}  ({result.runtime_seconds:.1f}s)")
    print(f"{'=' * 60}")
    for name, value in result.fitted_slopes.items():
        print(f"  slope[{name}] = {value:+.3f}")
    for key, value in result.metadata.items():
        if not isinstance(value, (dict, list)):
            print(f"  {key}: {value}")
