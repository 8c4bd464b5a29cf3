"""
Amplitude Estimation — Oracle Model
===================================
Closed-form outcome law of canonical amplitude estimation, k-shot median
sampling, the QKLA/QCMIE estimators on top of it, parameter schedules and
the query ledger every benchmark number is read from.

The simulator knows the distributions, so the amplitude a = E_p[g_L] is
computed exactly and only the measurement outcomes are sampled.
"""

import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from src.probability.distributions import (
    ClipParams,
    DiscreteDistribution,
    JointTable,
    binary_kl,
    g_values,
    stratify,
)

logger = logging.getLogger(__name__)

SINGLE_SHOT_SUCCESS = 8.0 / math.pi ** 2
_ZERO_TOL = 1e-12


# ── Schedules ──────────────────────────────────────────────────
def next_power_of_two(value: int) -> int:
    if value < 1:
        raise ValueError(f"expected a positive integer, got {value}")
    return 1 << (int(value) - 1).bit_length()


@dataclass(frozen=True)
class QaeSchedule:
    M: int
    k: int
    L: float
    tau: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError(f"M must be a power of 2 and >= 2, got {self.M}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def queries(self) -> int:
        return self.M * self.k


def _check_precision(tau: float, L: float):
    if not tau > 0:
        raise ValueError(f"precision tau must be positive, got {tau}")
    if not L > 0:
        raise ValueError(f"clip bound L must be positive, got {L}")


def schedule_from_precision(tau: float, delta: float, L: float) -> QaeSchedule:
    """M = 2^ceil(log2 ceil(4 pi L / tau)), k = ceil(5 ln(1/delta))."""
    _check_precision(tau, L)
    if not 0 < delta < 1:
        raise ValueError(f"confidence delta must be in (0, 1), got {delta}")
    M = max(2, next_power_of_two(math.ceil(4 * math.pi * L / tau)))
    k = max(1, math.ceil(5 * math.log(1.0 / delta) - 1e-12))
    return QaeSchedule(M=M, k=k, L=L, tau=tau, delta=delta)


def empirical_schedule(tau: float, L: float, n_shots: int = 5) -> QaeSchedule:
    """M = next power of 2 above ceil(2 pi L / tau), half the worst case."""
    _check_precision(tau, L)
    M = max(2, next_power_of_two(math.ceil(2 * math.pi * L / tau)))
    return QaeSchedule(M=M, k=n_shots, L=L, tau=tau)


# ── Query ledger ───────────────────────────────────────────────
class QueryLedger:
    """Oracle-query and sample counts keyed by (method, test_id, stratum_id)."""

    def __init__(self):
        self._counts = Counter()
        self._lock = threading.Lock()

    def record(self, method: str, test_id, stratum_id, count: int):
        if count < 0:
            raise ValueError(f"query counts only grow, got {count}")
        with self._lock:
            self._counts[(method, test_id, stratum_id)] += int(count)

    def total(self, method: Optional[str] = None) -> int:
        with self._lock:
            return int(sum(v for (m, _, _), v in self._counts.items()
                           if method is None or m == method))

    def n_tests(self, method: Optional[str] = None) -> int:
        with self._lock:
            return len({(m, t) for (m, t, _) in self._counts
                        if method is None or m == method})

    def snapshot(self) -> Counter:
        with self._lock:
            return Counter(self._counts)

    def merge(self, other: "QueryLedger"):
        # copy under the other ledger's lock, never hold both
        counts = other.snapshot()
        with self._lock:
            self._counts.update(counts)

    def to_frame(self) -> pd.DataFrame:
        rows = [{"method": m, "test_id": t, "stratum_id": s, "queries": v}
                for (m, t, s), v in sorted(self.snapshot().items(), key=lambda kv: repr(kv[0]))]
        return pd.DataFrame(rows, columns=["method", "test_id", "stratum_id", "queries"])

    def __getstate__(self):
        return {"counts": dict(self.snapshot())}

    def __setstate__(self, state):
        self._counts = Counter(state["counts"])
        self._lock = threading.Lock()


# ── Outcome law ────────────────────────────────────────────────
def _fejer(x: np.ndarray, M: int) -> np.ndarray:
    """sin^2(pi x) / (M^2 sin^2(pi x / M)), period M, equal to 1 at x = 0 mod M."""
    r = x - M * np.round(x / M)
    out = np.ones_like(r)
    away = np.abs(r) > _ZERO_TOL
    ra = r[away]
    out[away] = np.sin(np.pi * ra) ** 2 / (M ** 2 * np.sin(np.pi * ra / M) ** 2)
    return out


def closed_form_distribution(a: float, M: int) -> DiscreteDistribution:
    if not -_ZERO_TOL <= a <= 1 + _ZERO_TOL:
        raise ValueError(f"amplitude a={a} outside [0, 1]")
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    a = min(max(a, 0.0), 1.0)
    omega = M * math.asin(math.sqrt(a)) / math.pi
    m = np.arange(M, dtype=float)
    probs = 0.5 * _fejer(m - omega, M) + 0.5 * _fejer(m + omega, M)
    return DiscreteDistribution(probs / probs.sum())


def amplitude_grid(M: int) -> np.ndarray:
    return np.sin(np.pi * np.arange(M) / M) ** 2


def success_probability(dist: DiscreteDistribution, a: float, radius: float) -> float:
    """Exact Pr[|a_hat - a| <= radius] under an outcome law over m."""
    hits = np.abs(amplitude_grid(dist.alphabet_size) - a) <= radius + _ZERO_TOL
    return float(dist.probs[hits].sum())


def qae_error_bound(a: float, M: int) -> float:
    return 2 * math.pi * math.sqrt(a * (1 - a)) / M + math.pi ** 2 / M ** 2


def median_failure_envelope(k: int) -> float:
    """exp(-k D(1/2 || 8/pi^2)), the k-shot median failure bound."""
    return math.exp(-k * binary_kl(0.5, SINGLE_SHOT_SUCCESS))


def estimate_from_outcomes(outcomes, M: int) -> float:
    """Lower median of sin^2(pi m / M) over the sampled outcomes."""
    values = np.sort(np.sin(np.pi * np.asarray(outcomes) / M) ** 2)
    if values.size == 0:
        raise ValueError("no outcomes to estimate from")
    return float(values[(values.size - 1) // 2])


def sample_estimate(a: float, schedule: QaeSchedule, rng: np.random.Generator,
                    dist: Optional[DiscreteDistribution] = None):
    """k outcomes from the closed-form law, median amplitude and k*M queries."""
    if dist is None:
        dist = closed_form_distribution(a, schedule.M)
    outcomes = rng.choice(schedule.M, size=schedule.k, p=dist.probs)
    return estimate_from_outcomes(outcomes, schedule.M), schedule.queries


# ── Estimators ─────────────────────────────────────────────────
def qkla_estimate(p: DiscreteDistribution, q: DiscreteDistribution, clip: ClipParams,
                  schedule: QaeSchedule, rng: np.random.Generator, ledger: QueryLedger,
                  test_id=None, stratum_id=None) -> float:
    a = float(np.dot(p.probs, g_values(p, q, clip)))
    a_hat, queries = sample_estimate(a, schedule, rng)
    ledger.record("quantum", test_id, stratum_id, queries)
    return 2.0 * clip.L * a_hat - clip.L


def qcmie_estimate(joint: JointTable, clip: ClipParams, tau: float, delta: float,
                   rng: np.random.Generator, ledger: QueryLedger,
                   schedule: Optional[QaeSchedule] = None, test_id=None) -> float:
    """Stratified QKLA: sum over p(z) > 0 of p(z) * estimate(p(X,Y|z) || p(X|z)p(Y|z)).

    Without an explicit schedule each stratum runs at precision tau and
    confidence delta / |Z+|; a given schedule (fixed shots) is used as is.
    """
    strata = stratify(joint)
    if schedule is None:
        schedule = schedule_from_precision(tau, delta / len(strata), clip.L)
    logger.debug("QCMIE test %s: %d strata, M=%d, k=%d",
                 test_id, len(strata), schedule.M, schedule.k)
    estimate = 0.0
    for stratum in strata:
        child = np.random.default_rng(rng.integers(0, 2 ** 63 - 1))
        estimate += stratum.weight * qkla_estimate(
            stratum.joint_xy, stratum.product_xy, clip, schedule, child, ledger,
            test_id=test_id, stratum_id=stratum.z_index,
        )
    return estimate
