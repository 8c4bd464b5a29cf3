import math

import numpy as np
import pytest

from src.probability.distributions import (
    ClipParams,
    DiscreteDistribution,
    JointTable,
    binary_kl,
    clipped_kl,
    clipped_kl_affine,
    clipped_log_ratio,
    clipping_bias_bound,
    coarse_clipping_bias_bound,
    conditional_mutual_information,
    covering_clip_bound,
    empirical_joint,
    kl_divergence,
    mixed_radix_index,
    mutual_information,
    plugin_cmi_estimate,
    plugin_mi_estimate,
    product_of_marginals,
    random_binary_joint,
)

D = DiscreteDistribution
EXP1 = np.array([[0.4, 0.1], [0.1, 0.4]])
EXP1_MI = 0.2780719051126377


def dirichlet_pair(rng, size=4):
    return D(rng.dirichlet(np.ones(size))), D(rng.dirichlet(np.ones(size)))


# ── Types ──────────────────────────────────────────────────────
def test_distribution_validation():
    with pytest.raises(ValueError):
        D([0.5, 0.6])
    with pytest.raises(ValueError):
        D([1.2, -0.2])
    assert D([0.25] * 4).alphabet_size == 4


def test_clip_params_validation():
    with pytest.raises(ValueError):
        ClipParams(0.0)
    with pytest.raises(ValueError):
        ClipParams(1.0, b=0)


def test_joint_marginal_order():
    joint = JointTable(np.arange(8, dtype=float).reshape(2, 2, 2) / 28)
    m = joint.marginal([2, 0]).probs
    assert m.shape == (2, 2)
    assert np.allclose(m, joint.probs.sum(axis=1).T)


# ── KL ─────────────────────────────────────────────────────────
def test_kl_basic_cases():
    p = D([0.3, 0.7])
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(D([1, 0]), D([0.5, 0.5])) == pytest.approx(1.0)
    assert kl_divergence(D([0.5, 0.5]), D([1, 0])) == math.inf


def test_kl_alphabet_mismatch():
    with pytest.raises(ValueError):
        kl_divergence(D([1.0]), D([0.5, 0.5]))


def test_clipped_log_ratio_cases():
    clip2 = ClipParams(2.0)
    assert clipped_log_ratio(D([0.5, 0.5]), D([0.5, 0.5]), 0, clip2) == 0.0
    p, q = D([0.4, 0.6]), D([0.05, 0.95])
    assert clipped_log_ratio(p, q, 0, clip2) == 2.0
    assert clipped_log_ratio(D([0.2, 0.8]), D([0.1, 0.9]), 0, ClipParams(0.5)) == 0.5


def test_clipped_log_ratio_support_conventions():
    clip = ClipParams(1.5)
    p, q = D([0.5, 0.0, 0.5, 0.0]), D([0.0, 0.5, 0.5, 0.0])
    assert clipped_log_ratio(p, q, 0, clip) == 1.5
    assert clipped_log_ratio(p, q, 1, clip) == -1.5
    assert clipped_log_ratio(p, q, 3, clip) == 0.0


def test_clipped_kl_on_exp1_joint():
    joint = JointTable(EXP1)
    p, q = joint.flatten(), product_of_marginals(joint).flatten()
    assert clipped_kl(p, q, ClipParams(2.0)) == pytest.approx(EXP1_MI, abs=1e-12)


def test_clipped_kl_equals_kl_when_covered():
    rng = np.random.default_rng(5)
    for _ in range(200):
        p, q = dirichlet_pair(rng)
        clip = ClipParams(covering_clip_bound(p, q))
        assert clipped_kl(p, q, clip) == pytest.approx(kl_divergence(p, q), abs=1e-12)


def test_affine_identity():
    rng = np.random.default_rng(6)
    for L in (0.25, 1.0, 3.0):
        for _ in range(100):
            p, q = dirichlet_pair(rng, 6)
            clip = ClipParams(L)
            assert abs(clipped_kl(p, q, clip) - clipped_kl_affine(p, q, clip)) < 1e-12


def test_clipped_kl_can_be_negative():
    # the large positive ratio is clipped, the mild negative one is not
    p, q = D([0.1, 0.9]), D([0.0001, 0.9999])
    expected = 0.1 * 1.0 + 0.9 * math.log2(0.9 / 0.9999)
    assert clipped_kl(p, q, ClipParams(1.0)) == pytest.approx(expected, abs=1e-12)
    assert expected < 0
    assert kl_divergence(p, q) > 0


def test_bias_bound_values():
    p, q = D([0.9, 0.1]), D([0.1, 0.9])
    assert clipping_bias_bound(p, q, ClipParams(1.0)) == pytest.approx(math.log2(9) - 1)
    assert clipping_bias_bound(p, p, ClipParams(1.0)) == 0.0


def test_bias_bound_support_violation():
    with pytest.raises(ValueError):
        clipping_bias_bound(D([0.5, 0.5]), D([1.0, 0.0]), ClipParams(1.0))


def test_bias_bounds_dominate_on_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p, q = dirichlet_pair(rng)
        clip = ClipParams(rng.uniform(0.1, 3.0))
        eta = abs(kl_divergence(p, q) - clipped_kl(p, q, clip))
        bound = clipping_bias_bound(p, q, clip)
        assert eta <= bound + 1e-12
        assert bound <= coarse_clipping_bias_bound(p, q, clip) + 1e-12


def test_binary_kl():
    assert binary_kl(0.5, 0.5) == 0.0
    assert binary_kl(0.5, 8 / math.pi ** 2) == pytest.approx(0.2437, abs=1e-3)


# ── MI / CMI ───────────────────────────────────────────────────
def test_mutual_information_cases():
    assert mutual_information(JointTable(np.outer([0.3, 0.7], [0.6, 0.4]))) == pytest.approx(0, abs=1e-12)
    assert mutual_information(JointTable(EXP1)) == pytest.approx(EXP1_MI, abs=1e-12)
    assert mutual_information(JointTable([[0.5, 0], [0, 0.5]])) == pytest.approx(1.0)


def test_cmi_zero_on_conditionally_independent_joint():
    table = np.zeros((2, 2, 3))
    pz = [0.2, 0.5, 0.3]
    for z, (a, b) in enumerate([(0.1, 0.8), (0.5, 0.5), (0.9, 0.3)]):
        table[:, :, z] = pz[z] * np.outer([1 - a, a], [1 - b, b])
    assert conditional_mutual_information(JointTable(table)) == pytest.approx(0, abs=1e-12)


def test_cmi_single_stratum_is_mi():
    joint = JointTable(EXP1[:, :, None])
    assert conditional_mutual_information(joint) == pytest.approx(EXP1_MI, abs=1e-12)


def test_cmi_matches_cellwise_formula():
    rng = np.random.default_rng(8)
    for _ in range(50):
        p = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        pz = p.sum(axis=(0, 1))
        pxz = p.sum(axis=1)
        pyz = p.sum(axis=0)
        brute = sum(p[x, y, z] * math.log2(p[x, y, z] * pz[z] / (pxz[x, z] * pyz[y, z]))
                    for x in range(2) for y in range(2) for z in range(2))
        assert conditional_mutual_information(JointTable(p)) == pytest.approx(brute, abs=1e-12)


def test_cmi_skips_empty_strata():
    table = np.zeros((2, 2, 2))
    table[:, :, 0] = EXP1
    assert conditional_mutual_information(JointTable(table)) == pytest.approx(EXP1_MI)


# ── Plug-in estimators ─────────────────────────────────────────
def test_plugin_mi_degenerate_and_exact():
    assert plugin_mi_estimate([(1, 0)] * 10) == 0.0
    samples = [(0, 0)] * 8 + [(0, 1)] * 2 + [(1, 0)] * 2 + [(1, 1)] * 8
    assert plugin_mi_estimate(samples) == pytest.approx(EXP1_MI, abs=1e-12)


def test_plugin_mi_converges_on_product():
    rng = np.random.default_rng(9)
    samples = rng.integers(0, 2, size=(200_000, 2))
    assert plugin_mi_estimate(samples) < 1e-3


def test_plugin_cmi_exact_stratified():
    base = [(0, 0)] * 8 + [(0, 1)] * 2 + [(1, 0)] * 2 + [(1, 1)] * 8
    indep = [(0, 0), (0, 1), (1, 0), (1, 1)] * 5
    samples = [(x, y, 0) for x, y in base] + [(x, y, 1) for x, y in indep]
    assert plugin_cmi_estimate(samples) == pytest.approx(0.5 * EXP1_MI, abs=1e-12)


def test_plugin_empty_input():
    with pytest.raises(ValueError):
        plugin_mi_estimate([])
    with pytest.raises(ValueError):
        plugin_cmi_estimate([])


def test_empirical_joint_and_mixed_radix():
    joint = empirical_joint([(0, 2), (1, 0), (1, 0), (0, 2)])
    assert joint.variable_cards == (2, 3)
    assert joint.probs[1, 0] == 0.5
    assert mixed_radix_index(np.array([[1, 2], [0, 1]]), [2, 3]).tolist() == [5, 1]


# ── Random instances ───────────────────────────────────────────
def test_random_binary_joint_range_and_determinism():
    mis = []
    for seed in range(20):
        joint = random_binary_joint(seed, (0.030, 0.323))
        mi = mutual_information(joint)
        assert 0.030 <= mi <= 0.323
        mis.append(mi)
    assert np.array_equal(random_binary_joint(3, (0.03, 0.323)).probs,
                          random_binary_joint(3, (0.03, 0.323)).probs)
    assert max(mis) - min(mis) > 0.1


def test_random_binary_joint_errors():
    with pytest.raises(ValueError):
        random_binary_joint(0, (0.5, 0.1))
    with pytest.raises(RuntimeError):
        random_binary_joint(0, (0.99, 0.999), max_tries=50)
