"""
Experiment 2 — Error Scaling and Queries to Target Precision
============================================================
Plug-in MI on N samples versus the oracle-model QKLA estimator with M
Grover iterations and 5-shot medians, over K random 2x2 binary joints
with MI in [0.030, 0.323] bits.

Per budget: 90th-percentile absolute error over the Monte Carlo trials,
averaged across instances. The classical error is measured against the
analytic MI, the quantum error against the clipped KL the estimator
targets (L = 3). Quantum budget = shots * M.

Output:
  results/benchmarks/exp2_error_curves.csv
  results/benchmarks/exp2_precision_table.csv
  results/benchmarks/exp2_instances.csv
  results/benchmarks/exp2_manifest.json

Run: python src/experiments/exp2_precision.py
"""

import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

import dataclasses
import logging
import time

import numpy as np
import pandas as pd

from src.analysis.pc_skeleton import theoretical_query_ratio
from src.experiments.common import (
    PRECISION_TAU_GRID,
    BenchConfig,
    ExperimentResult,
    derive_rng,
    derive_seed,
    fit_loglog_slope,
    run_pool,
    summarize,
    write_result,
)
from src.models.qae_model import QaeSchedule, QueryLedger, qkla_estimate
from src.probability.distributions import (
    ClipParams,
    JointTable,
    clipped_kl,
    mutual_information,
    product_of_marginals,
    random_binary_joint,
)

logger = logging.getLogger(__name__)

ERROR_PERCENTILE = 90
CROSSOVER_GRID = np.geomspace(0.1, 0.001, 401)


def classical_budgets(config: BenchConfig) -> np.ndarray:
    grid = np.geomspace(config.exp2_classical_min, config.exp2_classical_max,
                        config.exp2_classical_points)
    return np.unique(np.round(grid).astype(int))


def quantum_grover_budgets(config: BenchConfig) -> np.ndarray:
    M = config.exp2_quantum_min
    budgets = []
    while M <= config.exp2_quantum_max:
        budgets.append(M)
        M *= 2
    return np.asarray(budgets)


def _instance_errors(job) -> list:
    """Per-instance 90th-percentile errors for every classical and quantum budget."""
    config, k, probs = job
    joint = JointTable(probs)
    p = joint.flatten()
    q = product_of_marginals(joint).flatten()
    L = config.L if config.L is not None else config.exp2_L
    clip = ClipParams(L)
    mi = mutual_information(joint)
    target = clipped_kl(p, q, clip)
    trials = config.trials or config.exp2_trials
    rows = []

    for index, N in enumerate(classical_budgets(config)):
        rng = derive_rng(config.seed, "exp2", "classical", k, index)
        counts = rng.multinomial(N, p.probs, size=trials)
        estimates = [mutual_information(JointTable.from_counts(c.reshape(joint.variable_cards)))
                     for c in counts]
        errors = np.abs(np.asarray(estimates) - mi)
        rows.append({"method": "classical", "grid_index": index, "instance": k,
                     "budget": int(N), "queries": int(N),
                     "p90_error": float(np.percentile(errors, ERROR_PERCENTILE))})

    for index, M in enumerate(quantum_grover_budgets(config)):
        rng = derive_rng(config.seed, "exp2", "quantum", k, index)
        schedule = QaeSchedule(M=int(M), k=config.shots, L=L)
        ledger = QueryLedger()
        estimates = [qkla_estimate(p, q, clip, schedule, rng, ledger, test_id=trial)
                     for trial in range(trials)]
        errors = np.abs(np.asarray(estimates) - target)
        rows.append({"method": "quantum", "grid_index": index, "instance": k,
                     "budget": int(M), "queries": ledger.total() // trials,
                     "p90_error": float(np.percentile(errors, ERROR_PERCENTILE))})
    return rows


def queries_to_precision(curve: pd.DataFrame, tau: float):
    """Smallest grid budget whose averaged error is <= tau, None if unreached."""
    reached = curve[curve["mean_p90_error"] <= tau]
    return int(reached["queries"].min()) if len(reached) else None


def crossover_tau(classical: pd.DataFrame, quantum: pd.DataFrame):
    for tau in CROSSOVER_GRID:
        n_q = queries_to_precision(quantum, tau)
        n_c = queries_to_precision(classical, tau)
        if n_q is not None and (n_c is None or n_q < n_c):
            return float(tau)
    return None


def run_exp2(config: BenchConfig) -> ExperimentResult:
    start = time.time()
    L = config.L if config.L is not None else config.exp2_L
    trials = config.trials or config.exp2_trials
    joints = [random_binary_joint(derive_seed(config.seed, "exp2", "instance", k),
                                  config.exp2_mi_range)
              for k in range(config.exp2_instances)]
    instances = pd.DataFrame([{"instance": k, "seed": config.seed,
                               "mutual_information": mutual_information(j),
                               "p00": j.probs[0, 0], "p01": j.probs[0, 1],
                               "p10": j.probs[1, 0], "p11": j.probs[1, 1]}
                              for k, j in enumerate(joints)])
    print(f"  {len(joints)} instances, MI in "
          f"[{instances['mutual_information'].min():.3f}, {instances['mutual_information'].max():.3f}]")

    jobs = [(config, k, np.asarray(j.probs)) for k, j in enumerate(joints)]
    per_instance = pd.DataFrame([row for rows in run_pool(_instance_errors, jobs, config.threads)
                                 for row in rows])

    curves = (per_instance
              .groupby(["method", "grid_index", "budget", "queries"], as_index=False)["p90_error"]
              .mean()
              .rename(columns={"p90_error": "mean_p90_error"})
              .sort_values(["method", "grid_index"])
              .reset_index(drop=True))
    curves.insert(0, "seed", config.seed)
    classical = curves[curves["method"] == "classical"]
    quantum = curves[curves["method"] == "quantum"]

    slopes = {
        "classical": fit_loglog_slope(classical[["queries", "mean_p90_error"]].to_numpy()),
        "quantum": fit_loglog_slope(quantum[["queries", "mean_p90_error"]].to_numpy()),
    }

    table_rows = []
    for index, tau in enumerate(config.tau_grid or PRECISION_TAU_GRID):
        n_c = queries_to_precision(classical, tau)
        n_q = queries_to_precision(quantum, tau)
        table_rows.append({
            "seed": config.seed,
            "grid_index": index,
            "tau": tau,
            "classical_queries": n_c,
            "quantum_queries": n_q,
            "ratio": n_c / n_q if n_c is not None and n_q is not None else None,
            "theoretical_ratio": theoretical_query_ratio(tau, L, config.shots),
        })
        logger.info("exp2 tau=%g: classical=%s quantum=%s", tau, n_c, n_q)
    table = pd.DataFrame(table_rows)

    metadata = {
        "instances": config.exp2_instances,
        "trials": trials,
        "error_percentile": ERROR_PERCENTILE,
        "slope_tail": "budgets >= geometric median of the grid",
        "crossover_tau": crossover_tau(classical, quantum),
        "quantum_error_reference": "clipped KL at L",
        "classical_error_reference": "analytic MI",
        "seed_sensitivity": ("quantum tail slope moves by about 0.1 across master seeds; "
                             "acceptance bands are checked at the default seed"),
    }
    return ExperimentResult(
        experiment="exp2",
        config=dataclasses.asdict(config),
        tables={"error_curves": curves, "precision_table": table, "instances": instances},
        fitted_slopes=slopes,
        metadata=metadata,
        runtime_seconds=time.time() - start,
    )


def main():
    config = BenchConfig()
    result = run_exp2(config)
    write_result(result, config.out_dir, config.fmt)
    summarize(result)
    print(result.tables["precision_table"].to_string(index=False))


if __name__ == "__main__":
    main()
