"""
PC Skeleton Discovery
=====================
Original-order PC edge deletion over a complete undirected graph with a
pluggable conditional-independence test:

  1. classical   plug-in CMI on N = ceil(2 / tau^2) fresh samples per test
  2. quantum     stratified QKLA (oracle model) on the exact joint
  3. exact       exact CMI, for margin checks

A test declares X _|_ Y | Z iff |estimate| <= threshold (threshold = tau
unless configured). Recovered skeletons are scored with precision / recall /
F1 over unordered node pairs.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, Optional, Tuple

import networkx as nx
import numpy as np
from sklearn.metrics import precision_recall_fscore_support

from src.models.qae_model import QueryLedger, empirical_schedule, qcmie_estimate
from src.probability.bayesnet import (
    BayesNet,
    Skeleton,
    ancestral_sample,
    exact_joint,
    marginal_xyz,
)
from src.probability.distributions import (
    ClipParams,
    JointTable,
    conditional_mutual_information,
    mixed_radix_index,
    plugin_cmi_estimate,
)

logger = logging.getLogger(__name__)

METHODS = ("classical", "quantum")


# ── Types ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class CiDecision:
    estimate: float
    independent: bool
    queries: int
    method: str


@dataclass(frozen=True)
class PcConfig:
    """threshold defaults to tau, the per-test precision target."""

    tau: float
    max_depth: int = 3
    threshold: Optional[float] = None
    method: str = "quantum"
    L: float = 3.0
    n_shots: int = 5
    delta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.method not in METHODS:
            raise ValueError(f"unknown CI method {self.method!r}, expected one of {METHODS}")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")

    @property
    def decision_threshold(self) -> float:
        return self.tau if self.threshold is None else self.threshold


@dataclass
class PcResult:
    skeleton: Skeleton
    separating_sets: Dict[Tuple[int, int], Tuple[int, ...]] = field(default_factory=dict)
    n_tests: int = 0


CiTest = Callable[[int, int, Tuple[int, ...], int], CiDecision]


# ── Budgets and bounds ─────────────────────────────────────────
def classical_sample_size(tau: float) -> int:
    return math.ceil(2.0 / tau ** 2 - 1e-9)


def ci_test_count_bound(n: int, d: int) -> int:
    """n^2 * sum_{l <= d} C(n, l), an explicit form of the O(n^{d+2}) test count."""
    return n * n * sum(math.comb(n, level) for level in range(d + 1))


def theoretical_query_ratio(tau: float, L: float = 3.0, n_shots: int = 5) -> float:
    """Classical 2/tau^2 over quantum n_shots * 2 pi L / tau; 1/(15 pi tau) at L=3, 5 shots."""
    return (2.0 / tau ** 2) / (n_shots * 2 * math.pi * L / tau)


# ── CI tests ───────────────────────────────────────────────────
def classical_ci_test(sampler, x: int, y: int, z_set, config: PcConfig,
                      ledger: QueryLedger, rng: np.random.Generator,
                      test_id=None) -> CiDecision:
    """`sampler(n, rng)` returns an (n, num_nodes) array of fresh samples."""
    n_samples = classical_sample_size(config.tau)
    data = sampler(n_samples, rng)
    z_set = sorted(z_set)
    if z_set:
        z_cards = data[:, z_set].max(axis=0) + 1
        z_code = mixed_radix_index(data[:, z_set], z_cards)
    else:
        z_code = np.zeros(n_samples, dtype=np.int64)
    estimate = plugin_cmi_estimate(np.column_stack([data[:, x], data[:, y], z_code]))
    ledger.record("classical", test_id, None, n_samples)
    return CiDecision(estimate, estimate <= config.decision_threshold, n_samples, "classical")


def quantum_ci_test(joint: JointTable, x: int, y: int, z_set, config: PcConfig,
                    ledger: QueryLedger, rng: np.random.Generator,
                    test_id=None) -> CiDecision:
    table = marginal_xyz(joint, x, y, z_set)
    schedule = empirical_schedule(config.tau, config.L, config.n_shots)
    before = ledger.total("quantum")
    estimate = qcmie_estimate(table, ClipParams(config.L), config.tau, config.delta,
                              rng, ledger, schedule=schedule, test_id=test_id)
    queries = ledger.total("quantum") - before
    return CiDecision(estimate, abs(estimate) <= config.decision_threshold, queries, "quantum")


def make_ci_test(config: PcConfig, ledger: QueryLedger, rng: np.random.Generator,
                 joint: Optional[JointTable] = None,
                 net: Optional[BayesNet] = None) -> CiTest:
    if config.method == "quantum":
        if joint is None:
            raise ValueError("quantum CI tests need the exact joint")
        return lambda x, y, z, tid: quantum_ci_test(joint, x, y, z, config, ledger, rng, tid)
    if net is None:
        raise ValueError("classical CI tests need a network to sample from")

    def sampler(n, generator):
        return ancestral_sample(net, n, generator)

    return lambda x, y, z, tid: classical_ci_test(sampler, x, y, z, config, ledger, rng, tid)


def exact_ci_test(joint: JointTable, threshold: float) -> CiTest:
    def test(x, y, z_set, test_id=None):
        cmi = conditional_mutual_information(marginal_xyz(joint, x, y, z_set))
        return CiDecision(cmi, cmi <= threshold, 0, "exact")
    return test


# ── PC loop ────────────────────────────────────────────────────
def run_pc(num_nodes: int, ci_test: CiTest, max_depth: int = 3) -> PcResult:
    graph = nx.complete_graph(num_nodes)
    separating_sets = {}
    n_tests = 0
    for depth in range(max_depth + 1):
        if all(graph.degree(node) - 1 < depth for node in graph.nodes):
            break
        for x in sorted(graph.nodes):
            for y in sorted(graph.neighbors(x)):
                if not graph.has_edge(x, y):
                    continue
                candidates = sorted(set(graph.neighbors(x)) - {y})
                if len(candidates) < depth:
                    continue
                for z_set in combinations(candidates, depth):
                    decision = ci_test(x, y, z_set, n_tests)
                    n_tests += 1
                    if decision.independent:
                        graph.remove_edge(x, y)
                        separating_sets[(min(x, y), max(x, y))] = z_set
                        logger.debug("removed %d-%d | %s (estimate %.5f)",
                                     x, y, z_set, decision.estimate)
                        break
        logger.info("PC depth %d: %d edges left after %d tests",
                    depth, graph.number_of_edges(), n_tests)
    skeleton = Skeleton(num_nodes, frozenset(graph.edges))
    return PcResult(skeleton, separating_sets, n_tests)


def pc_skeleton(net_or_joint, config: PcConfig, ledger: QueryLedger,
                rng: Optional[np.random.Generator] = None,
                joint: Optional[JointTable] = None):
    """PC with the configured CI method; returns (Skeleton, ledger)."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    net = net_or_joint if isinstance(net_or_joint, BayesNet) else None
    if isinstance(net_or_joint, JointTable):
        joint = net_or_joint
    if joint is None and config.method == "quantum":
        joint = exact_joint(net)
    num_nodes = net.num_nodes if net is not None else joint.num_variables
    ci_test = make_ci_test(config, ledger, rng, joint=joint, net=net)
    result = run_pc(num_nodes, ci_test, config.max_depth)
    return result.skeleton, ledger


# ── Scoring ────────────────────────────────────────────────────
def _pair_indicator(skeleton: Skeleton) -> np.ndarray:
    pairs = combinations(range(skeleton.num_nodes), 2)
    return np.array([int(skeleton.has_edge(u, v)) for u, v in pairs], dtype=int)


def skeleton_f1(predicted: Skeleton, truth: Skeleton) -> Tuple[float, float, float]:
    if predicted.num_nodes != truth.num_nodes:
        raise ValueError(
            f"node-count mismatch: {predicted.num_nodes} vs {truth.num_nodes}"
        )
    if not predicted.edges and not truth.edges:
        return 1.0, 1.0, 1.0
    precision, recall, f1, _ = precision_recall_fscore_support(
        _pair_indicator(truth), _pair_indicator(predicted),
        average="binary", pos_label=1, zero_division=0,
    )
    return float(precision), float(recall), float(f1)
