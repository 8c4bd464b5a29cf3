"""
Discrete Distributions and Information Measures
================================================
Probability vectors, joint tables, KL and clipped KL, mutual information,
conditional mutual information, plug-in estimators and random instances.

All logarithms are base 2 (bits) unless a function says otherwise.
0 * log 0 = 0 everywhere.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

PROB_TOL = 1e-9
DEFAULT_REJECTION_CAP = 100_000


# ── Types ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class DiscreteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if probs.size == 0:
            raise ValueError("distribution needs at least one outcome")
        if np.any(probs < -PROB_TOL):
            raise ValueError(f"negative probability: min={probs.min():.3e}")
        total = probs.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total:.12f}, expected 1")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def alphabet_size(self) -> int:
        return int(self.probs.size)

    @classmethod
    def uniform(cls, size: int) -> "DiscreteDistribution":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def from_weights(cls, weights) -> "DiscreteDistribution":
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        return cls(weights / total)


@dataclass(frozen=True)
class JointTable:
    """Joint pmf as a tensor with one axis per variable."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim == 0:
            raise ValueError("joint table needs at least one variable")
        if np.any(probs < -PROB_TOL):
            raise ValueError(f"negative probability: min={probs.min():.3e}")
        total = probs.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"joint mass is {total:.12f}, expected 1")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def variable_cards(self) -> tuple:
        return tuple(self.probs.shape)

    @property
    def num_variables(self) -> int:
        return self.probs.ndim

    @classmethod
    def from_counts(cls, counts) -> "JointTable":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise ValueError("count table is empty")
        return cls(counts / total)

    def marginal(self, axes: Sequence[int]) -> "JointTable":
        """Marginal over `axes`, returned with axes in the order given."""
        axes = list(axes)
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated axes in marginal: {axes}")
        drop = tuple(a for a in range(self.num_variables) if a not in axes)
        summed = self.probs.sum(axis=drop) if drop else self.probs
        kept = sorted(axes)
        return JointTable(np.transpose(summed, [kept.index(a) for a in axes]))

    def flatten(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.probs.reshape(-1))


@dataclass(frozen=True)
class ClipParams:
    L: float
    b: Optional[int] = None

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"clip bound L must be positive, got {self.L}")
        if self.b is not None and self.b < 1:
            raise ValueError(f"fixed-point bits b must be >= 1, got {self.b}")


@dataclass(frozen=True)
class Stratum:
    """One conditioning value z with p(z) > 0."""

    z_index: int
    weight: float
    joint_xy: DiscreteDistribution
    product_xy: DiscreteDistribution


def _check_alphabet(p: DiscreteDistribution, q: DiscreteDistribution):
    if p.alphabet_size != q.alphabet_size:
        raise ValueError(
            f"alphabet mismatch: {p.alphabet_size} vs {q.alphabet_size}"
        )


# ── KL and clipped KL ──────────────────────────────────────────
def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    _check_alphabet(p, q)
    support = p.probs > 0
    if np.any(q.probs[support] == 0):
        return float("inf")
    ratio = p.probs[support] / q.probs[support]
    return float(np.sum(p.probs[support] * np.log2(ratio)))


def clipped_log_ratios(p: DiscreteDistribution, q: DiscreteDistribution,
                       clip: ClipParams) -> np.ndarray:
    """Vector of clip_L(log2 p(x)/q(x)) over the whole alphabet."""
    _check_alphabet(p, q)
    pp, qq = p.probs, q.probs
    out = np.zeros(pp.size)
    both = (pp > 0) & (qq > 0)
    out[both] = np.log2(pp[both] / qq[both])
    out[(pp > 0) & (qq == 0)] = clip.L
    out[(pp == 0) & (qq > 0)] = -clip.L
    return np.clip(out, -clip.L, clip.L)


def clipped_log_ratio(p: DiscreteDistribution, q: DiscreteDistribution,
                      x: int, clip: ClipParams) -> float:
    if not 0 <= x < p.alphabet_size:
        raise ValueError(f"outcome index {x} out of range")
    return float(clipped_log_ratios(p, q, clip)[x])


def g_values(p: DiscreteDistribution, q: DiscreteDistribution,
             clip: ClipParams) -> np.ndarray:
    """g_L(x) = (l_L(x) + L) / 2L, the amplitude-encoded values in [0, 1]."""
    return (clipped_log_ratios(p, q, clip) + clip.L) / (2.0 * clip.L)


def clipped_kl(p: DiscreteDistribution, q: DiscreteDistribution,
               clip: ClipParams) -> float:
    return float(np.dot(p.probs, clipped_log_ratios(p, q, clip)))


def clipped_kl_affine(p: DiscreteDistribution, q: DiscreteDistribution,
                      clip: ClipParams) -> float:
    a = float(np.dot(p.probs, g_values(p, q, clip)))
    return 2.0 * clip.L * a - clip.L


def _raw_log_ratios(p: DiscreteDistribution, q: DiscreteDistribution) -> np.ndarray:
    _check_alphabet(p, q)
    support = p.probs > 0
    if np.any(q.probs[support] == 0):
        raise ValueError("support of p is not contained in support of q")
    rho = np.zeros(p.alphabet_size)
    rho[support] = np.log2(p.probs[support] / q.probs[support])
    return rho


def clipping_bias_bound(p: DiscreteDistribution, q: DiscreteDistribution,
                        clip: ClipParams) -> float:
    """E_p[(|rho| - L) 1{|rho| > L}], an upper bound on |KL - clipped KL|."""
    excess = np.abs(_raw_log_ratios(p, q)) - clip.L
    return float(np.dot(p.probs, np.where(excess > 0, excess, 0.0)))


def coarse_clipping_bias_bound(p: DiscreteDistribution, q: DiscreteDistribution,
                               clip: ClipParams) -> float:
    """(log2 1/p_min + log2 1/q_min) * Pr_p[|rho| > L] over supp(p)."""
    rho = _raw_log_ratios(p, q)
    support = p.probs > 0
    tail = float(np.sum(p.probs[support & (np.abs(rho) > clip.L)]))
    if tail == 0.0:
        return 0.0
    p_min = p.probs[support].min()
    q_min = q.probs[support].min()
    return (np.log2(1.0 / p_min) + np.log2(1.0 / q_min)) * tail


def covering_clip_bound(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Smallest L for which clipping changes nothing on supp(p)."""
    rho = _raw_log_ratios(p, q)
    return float(np.max(np.abs(rho[p.probs > 0])))


def binary_kl(p: float, q: float) -> float:
    """D(p || q) between Bernoulli laws, in nats."""
    terms = 0.0
    if p > 0:
        terms += p * np.log(p / q)
    if p < 1:
        terms += (1 - p) * np.log((1 - p) / (1 - q))
    return float(terms)


# ── Mutual information ─────────────────────────────────────────
def product_of_marginals(joint: JointTable) -> JointTable:
    if joint.num_variables != 2:
        raise ValueError(f"expected a 2-variable joint, got {joint.num_variables}")
    px = joint.probs.sum(axis=1)
    py = joint.probs.sum(axis=0)
    return JointTable(np.outer(px, py))


def mutual_information(joint: JointTable) -> float:
    product = product_of_marginals(joint)
    return kl_divergence(joint.flatten(), product.flatten())


def mixed_radix_index(values: np.ndarray, cards: Sequence[int]) -> np.ndarray:
    """Flatten columns of `values` to one index, first column most significant."""
    values = np.asarray(values, dtype=np.int64)
    if values.ndim == 1:
        values = values[:, None]
    index = np.zeros(values.shape[0], dtype=np.int64)
    for column, card in zip(values.T, cards):
        index = index * int(card) + column
    return index


def as_three_way(joint: JointTable) -> np.ndarray:
    """(X, Y, Z) tensor with every axis after the second folded into Z."""
    if joint.num_variables < 2:
        raise ValueError("conditional table needs X and Y axes")
    cx, cy = joint.variable_cards[:2]
    return joint.probs.reshape(cx, cy, -1)


def stratify(joint: JointTable) -> list:
    """Per-stratum weights and (X,Y) conditionals for strata with p(z) > 0."""
    table = as_three_way(joint)
    strata = []
    for z in range(table.shape[2]):
        weight = float(table[:, :, z].sum())
        if weight <= 0.0:
            continue
        pxy = table[:, :, z] / weight
        prod = np.outer(pxy.sum(axis=1), pxy.sum(axis=0))
        strata.append(Stratum(
            z_index=z,
            weight=weight,
            joint_xy=DiscreteDistribution(pxy.reshape(-1)),
            product_xy=DiscreteDistribution(prod.reshape(-1)),
        ))
    return strata


def conditional_mutual_information(joint: JointTable) -> float:
    total = 0.0
    for stratum in stratify(joint):
        total += stratum.weight * kl_divergence(stratum.joint_xy, stratum.product_xy)
    return max(total, 0.0)


# ── Plug-in estimators ─────────────────────────────────────────
def empirical_joint(samples) -> JointTable:
    """Frequency table of integer-coded samples (one column per variable)."""
    data = np.asarray(samples, dtype=np.int64)
    if data.size == 0:
        raise ValueError("no samples")
    if data.ndim == 1:
        data = data[:, None]
    if np.any(data < 0):
        raise ValueError("sample values must be nonnegative integer codes")
    cards = data.max(axis=0) + 1
    flat = mixed_radix_index(data, cards)
    counts = np.bincount(flat, minlength=int(np.prod(cards)))
    return JointTable.from_counts(counts.reshape(tuple(int(c) for c in cards)))


def plugin_mi_estimate(samples) -> float:
    data = np.asarray(samples)
    if data.size == 0:
        raise ValueError("plug-in MI needs at least one sample")
    return mutual_information(empirical_joint(data))


def plugin_cmi_estimate(samples) -> float:
    data = np.asarray(samples)
    if data.size == 0:
        raise ValueError("plug-in CMI needs at least one sample")
    return conditional_mutual_information(empirical_joint(data))


# ── Random instances ───────────────────────────────────────────
def random_binary_joint(rng_seed, mi_range, max_tries: int = DEFAULT_REJECTION_CAP) -> JointTable:
    lo, hi = mi_range
    if not 0 <= lo < hi:
        raise ValueError(f"invalid MI range [{lo}, {hi}]")
    rng = np.random.default_rng(rng_seed)
    for attempt in range(1, max_tries + 1):
        table = JointTable(rng.dirichlet(np.ones(4)).reshape(2, 2))
        mi = mutual_information(table)
        if lo <= mi <= hi:
            logger.debug("random joint accepted after %d draws (MI=%.4f)", attempt, mi)
            return table
    raise RuntimeError(f"no joint with MI in [{lo}, {hi}] after {max_tries} draws")
