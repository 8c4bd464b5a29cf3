"""
Experiment 1 — Gate-Level QKLA on a 2x2 Joint
==============================================
State-vector simulation of canonical amplitude estimation for the KL
estimator on p_xy = [[0.4, 0.1], [0.1, 0.4]] against the product of its
marginals (L = 2, 6 arithmetic bits), for t = 3..8 phase qubits.

Reports per t:
  - max |gate-level - closed-form| outcome probability
  - 80th-percentile single-shot error and median error of the 5-shot
    median estimator, both against the represented quantized target
  - Pr[|a_hat - a| <= pi / M]

Output:
  results/benchmarks/exp1_error_decay.csv
  results/benchmarks/exp1_phase_distribution.csv
  results/benchmarks/exp1_manifest.json

Run: python src/experiments/exp1_statevector.py
"""

import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

import dataclasses
import logging
import math
import time

import numpy as np
import pandas as pd

from src.experiments.common import (
    EXP1_JOINT,
    BenchConfig,
    ExperimentResult,
    derive_rng,
    fit_loglog_slope,
    summarize,
    write_result,
)
from src.models.qae_model import (
    SINGLE_SHOT_SUCCESS,
    amplitude_grid,
    closed_form_distribution,
    qae_error_bound,
    success_probability,
)
from src.models.qkla_circuit import (
    FixedPointCodec,
    ancilla_probability,
    build_qkla_circuit,
    qkla_full_estimate,
    run_canonical_qae,
    uncomputation_residual,
)
from src.probability.distributions import JointTable, mutual_information, product_of_marginals

logger = logging.getLogger(__name__)

DISTRIBUTION_T = 5


def weighted_quantile(values, weights, q: float) -> float:
    order = np.argsort(values)
    cumulative = np.cumsum(np.asarray(weights)[order])
    position = int(np.searchsorted(cumulative, q * cumulative[-1] - 1e-12))
    return float(np.asarray(values)[order][min(position, len(order) - 1)])


def run_exp1(config: BenchConfig) -> ExperimentResult:
    start = time.time()
    joint = JointTable(np.asarray(EXP1_JOINT))
    p = joint.flatten()
    q = product_of_marginals(joint).flatten()
    L = config.L if config.L is not None else config.exp1_L
    codec = FixedPointCodec(L, config.exp1_bits, config.exp1_codec_mode)

    print(f"  Building circuit (L={L}, b={codec.b}, codec={codec.mode})...")
    circuit = build_qkla_circuit(p, q, codec)
    a = ancilla_probability(circuit)
    target = circuit.quantized_target
    residual = uncomputation_residual(circuit)
    logger.info("exp1: a=%.12f quantized target=%.6f residual=%.2e", a, target, residual)

    rows, distribution_rows = [], []
    for t in config.exp1_t_values:
        M = 2 ** t
        gate = run_canonical_qae(circuit, t)
        closed = closed_form_distribution(a, M)
        deviation = float(np.max(np.abs(gate.probs - closed.probs)))

        estimates = 2 * L * amplitude_grid(M) - L
        single_errors = np.abs(estimates - target)
        p80 = weighted_quantile(single_errors, gate.probs, 0.8)

        rng = derive_rng(config.seed, "exp1", t)
        median_errors = [abs(qkla_full_estimate(circuit, t, config.shots, rng, dist=gate) - target)
                         for _ in range(config.exp1_mc_trials)]

        top = np.argsort(gate.probs)[::-1][:2]
        rows.append({
            "t": t,
            "M": M,
            "seed": config.seed,
            "amplitude": a,
            "quantized_target": target,
            "max_deviation": deviation,
            "p80_error": p80,
            "median_shot_error": float(np.median(median_errors)),
            "success_probability": success_probability(gate, a, math.pi / M),
            "error_bound": 2 * L * qae_error_bound(a, M),
            "peak_1": int(min(top)),
            "peak_2": int(max(top)),
            "peak_mass": float(gate.probs[top].sum()),
        })
        if t == DISTRIBUTION_T:
            for m in range(M):
                distribution_rows.append({
                    "t": t, "m": m, "seed": config.seed,
                    "gate_probability": float(gate.probs[m]),
                    "closed_form_probability": float(closed.probs[m]),
                    "a_hat": float(amplitude_grid(M)[m]),
                    "kl_estimate": float(estimates[m]),
                })
        print(f"  t={t}  M={M:4d}  dev={deviation:.1e}  p80={p80:.4f}  "
              f"success={rows[-1]['success_probability']:.3f}")

    decay = pd.DataFrame(rows)
    slopes = {
        "p80_error": fit_loglog_slope(decay[["M", "p80_error"]].to_numpy(), tail_only=False),
        "median_shot_error": fit_loglog_slope(decay[["M", "median_shot_error"]].to_numpy(),
                                              tail_only=False),
    }
    metadata = {
        "analytic_mi": mutual_information(joint),
        "quantized_target": target,
        "amplitude": a,
        "uncomputation_residual": residual,
        "max_deviation": float(decay["max_deviation"].max()),
        "min_success_probability": float(decay["success_probability"].min()),
        "success_benchmark": SINGLE_SHOT_SUCCESS,
        "slope_fit": "all t values",
        "codec_mode": codec.mode,
    }
    return ExperimentResult(
        experiment="exp1",
        config=dataclasses.asdict(config),
        tables={"error_decay": decay, "phase_distribution": pd.DataFrame(distribution_rows)},
        fitted_slopes=slopes,
        metadata=metadata,
        runtime_seconds=time.time() - start,
    )


def main():
    config = BenchConfig()
    result = run_exp1(config)
    write_result(result, config.out_dir, config.fmt)
    summarize(result)


if __name__ == "__main__":
    main()
