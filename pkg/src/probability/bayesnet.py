"""
Discrete Bayesian Networks
==========================
DAG + CPT networks with the Asia benchmark, seeded random DAGs and CPTs,
brute-force exact joints, conditional slices for CI testing, ancestral
sampling and JSON (de)serialization.

CPT layout: cpts[node] has shape (prod(parent cards), card[node]); rows are
indexed by the mixed-radix parent configuration with parents in ascending
node order, the lowest-index parent most significant.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from src.probability.distributions import (
    JointTable,
    Stratum,
    mixed_radix_index,
    stratify,
)

logger = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 2 ** 20
CPT_TOL = 1e-9
CPT_CLAMP = (0.05, 0.95)

# ── Asia network (Lauritzen & Spiegelhalter), state 1 = "yes" ──
ASIA_NODES = [
    "Smoking", "VisitAsia", "Tuberculosis", "LungCancer",
    "Bronchitis", "TbOrCa", "XRay", "Dyspnea",
]
ASIA_EDGES = [
    ("VisitAsia",    "Tuberculosis"),
    ("Smoking",      "LungCancer"),
    ("Smoking",      "Bronchitis"),
    ("Tuberculosis", "TbOrCa"),
    ("LungCancer",   "TbOrCa"),
    ("TbOrCa",       "XRay"),
    ("TbOrCa",       "Dyspnea"),
    ("Bronchitis",   "Dyspnea"),
]
# P(node = 1 | parent configuration), rows in mixed-radix parent order
ASIA_P_YES = {
    "Smoking":      [0.5],
    "VisitAsia":    [0.01],
    "Tuberculosis": [0.01, 0.05],              # VisitAsia = 0, 1
    "LungCancer":   [0.01, 0.10],              # Smoking = 0, 1
    "Bronchitis":   [0.30, 0.60],              # Smoking = 0, 1
    "TbOrCa":       [0.0, 1.0, 1.0, 1.0],      # (Tuberculosis, LungCancer)
    "XRay":         [0.05, 0.98],              # TbOrCa = 0, 1
    "Dyspnea":      [0.10, 0.70, 0.80, 0.90],  # (Bronchitis, TbOrCa)
}


# ── Types ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class Dag:
    num_nodes: int
    edges: FrozenSet[Tuple[int, int]]

    def __post_init__(self):
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"edge ({u}, {v}) outside {self.num_nodes} nodes")
        object.__setattr__(self, "edges", edges)
        if not nx.is_directed_acyclic_graph(self.graph):
            raise ValueError("edge set contains a directed cycle")

    @property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.num_nodes))
        g.add_edges_from(self.edges)
        return g

    def parents(self, node: int) -> List[int]:
        return sorted(u for u, v in self.edges if v == node)

    def topological_order(self) -> List[int]:
        return list(nx.lexicographical_topological_sort(self.graph))


@dataclass(frozen=True)
class Skeleton:
    num_nodes: int
    edges: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        normalized = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            normalized.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(normalized))

    def __len__(self):
        return len(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges


@dataclass(frozen=True)
class BayesNet:
    dag: Dag
    cardinalities: Tuple[int, ...]
    cpts: Tuple[np.ndarray, ...]
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        n = self.dag.num_nodes
        if len(self.cardinalities) != n or len(self.cpts) != n:
            raise ValueError(f"need {n} cardinalities and CPTs")
        cpts = []
        for node, table in enumerate(self.cpts):
            table = np.asarray(table, dtype=float)
            rows = int(np.prod([self.cardinalities[p] for p in self.dag.parents(node)]))
            expected = (rows, self.cardinalities[node])
            if table.shape != expected:
                raise ValueError(f"CPT of node {node} has shape {table.shape}, expected {expected}")
            if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > CPT_TOL):
                raise ValueError(f"CPT rows of node {node} are not distributions")
            table.setflags(write=False)
            cpts.append(table)
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        object.__setattr__(self, "cpts", tuple(cpts))
        if self.names is not None and len(self.names) != n:
            raise ValueError(f"need {n} node names")

    @property
    def num_nodes(self) -> int:
        return self.dag.num_nodes

    def index(self, name: str) -> int:
        return list(self.names).index(name)


# ── Construction ───────────────────────────────────────────────
def dag_from_edges(num_nodes: int, edges) -> Dag:
    return Dag(num_nodes, frozenset(tuple(e) for e in edges))


def _binary_rows(p_yes) -> np.ndarray:
    p_yes = np.asarray(p_yes, dtype=float)
    return np.column_stack([1.0 - p_yes, p_yes])


def asia_network() -> BayesNet:
    idx = {name: i for i, name in enumerate(ASIA_NODES)}
    dag = dag_from_edges(len(ASIA_NODES), [(idx[u], idx[v]) for u, v in ASIA_EDGES])
    cpts = tuple(_binary_rows(ASIA_P_YES[name]) for name in ASIA_NODES)
    return BayesNet(dag, (2,) * len(ASIA_NODES), cpts, tuple(ASIA_NODES))


def random_dag(n: int, edge_prob: float, seed) -> Dag:
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    if not 0 <= edge_prob <= 1:
        raise ValueError(f"edge probability {edge_prob} outside [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                edges.add((int(order[i]), int(order[j])))
    logger.debug("random DAG: n=%d p=%.3f seed=%s -> %d edges", n, edge_prob, seed, len(edges))
    return Dag(n, frozenset(edges))


def random_cpts(dag: Dag, seed, clamp=CPT_CLAMP) -> BayesNet:
    rng = np.random.default_rng(seed)
    lo, hi = clamp
    cpts = []
    for node in range(dag.num_nodes):
        rows = 2 ** len(dag.parents(node))
        p_yes = np.clip(rng.dirichlet([1.0, 1.0], size=rows)[:, 1], lo, hi)
        cpts.append(_binary_rows(p_yes))
    names = tuple(f"X{i}" for i in range(dag.num_nodes))
    return BayesNet(dag, (2,) * dag.num_nodes, tuple(cpts), names)


# ── Exact joint and slices ─────────────────────────────────────
def exact_joint(net: BayesNet, max_states: int = DEFAULT_STATE_CAP) -> JointTable:
    cards = net.cardinalities
    states = int(np.prod(cards))
    if states > max_states:
        raise RuntimeError(f"joint has {states} states, cap is {max_states}")
    joint = np.ones(cards)
    for node in range(net.num_nodes):
        parents = net.dag.parents(node)
        factor = net.cpts[node].reshape([cards[p] for p in parents] + [cards[node]])
        scope = parents + [node]
        factor = np.transpose(factor, np.argsort(scope))
        shape = [cards[v] if v in scope else 1 for v in range(net.num_nodes)]
        joint = joint * factor.reshape(shape)
    return JointTable(joint)


def node_marginal(joint: JointTable, node: int) -> np.ndarray:
    return np.asarray(joint.marginal([node]).probs)


def marginal_xyz(joint: JointTable, x_var: int, y_var: int,
                 z_vars: Sequence[int] = ()) -> JointTable:
    """(X, Y, Z) table with Z the mixed-radix code of z_vars in ascending order."""
    z_vars = sorted(z_vars)
    if x_var == y_var or x_var in z_vars or y_var in z_vars or len(set(z_vars)) != len(z_vars):
        raise ValueError(f"variable sets overlap: x={x_var}, y={y_var}, z={z_vars}")
    table = joint.marginal([x_var, y_var] + z_vars).probs
    cx, cy = table.shape[:2]
    return JointTable(table.reshape(cx, cy, -1))


def conditional_slice(joint: JointTable, x_var: int, y_var: int,
                      z_vars: Sequence[int] = ()) -> List[Stratum]:
    return stratify(marginal_xyz(joint, x_var, y_var, z_vars))


# ── Sampling ───────────────────────────────────────────────────
def ancestral_sample(net: BayesNet, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """(n_samples, num_nodes) integer array, one configuration per row."""
    if n_samples < 0:
        raise ValueError(f"sample count must be >= 0, got {n_samples}")
    data = np.zeros((n_samples, net.num_nodes), dtype=np.int64)
    for node in net.dag.topological_order():
        parents = net.dag.parents(node)
        if parents:
            rows = mixed_radix_index(data[:, parents], [net.cardinalities[p] for p in parents])
        else:
            rows = np.zeros(n_samples, dtype=np.int64)
        cumulative = np.cumsum(net.cpts[node], axis=1)[rows]
        draws = rng.random(n_samples)[:, None]
        data[:, node] = np.minimum((draws >= cumulative).sum(axis=1),
                                   net.cardinalities[node] - 1)
    return data


# ── Skeleton ───────────────────────────────────────────────────
def true_skeleton(dag: Dag) -> Skeleton:
    return Skeleton(dag.num_nodes, frozenset(dag.edges))


# ── JSON ───────────────────────────────────────────────────────
def network_to_dict(net: BayesNet) -> dict:
    names = list(net.names) if net.names else [f"X{i}" for i in range(net.num_nodes)]
    return {
        "nodes": names,
        "cardinalities": list(net.cardinalities),
        "edges": sorted([list(e) for e in net.dag.edges]),
        "cpts": [table.tolist() for table in net.cpts],
    }


def network_from_dict(data: dict) -> BayesNet:
    dag = dag_from_edges(len(data["nodes"]), data["edges"])
    cpts = tuple(np.asarray(table, dtype=float) for table in data["cpts"])
    return BayesNet(dag, tuple(data["cardinalities"]), cpts, tuple(data["nodes"]))


def save_network(net: BayesNet, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(network_to_dict(net), f, indent=2)


def load_network(path: str) -> BayesNet:
    with open(path, encoding="utf-8") as f:
        return network_from_dict(json.load(f))
