import math

import numpy as np
import pytest

from src.analysis.pc_skeleton import (
    PcConfig,
    ci_test_count_bound,
    classical_sample_size,
    exact_ci_test,
    make_ci_test,
    pc_skeleton,
    quantum_ci_test,
    run_pc,
    skeleton_f1,
    theoretical_query_ratio,
)
from src.models.qae_model import QueryLedger
from src.probability.bayesnet import BayesNet, Dag, Skeleton, dag_from_edges, exact_joint, true_skeleton
from src.probability.distributions import JointTable


def binary_net(num_nodes, edges, p_yes):
    dag = dag_from_edges(num_nodes, edges)
    cpts = tuple(np.column_stack([1 - np.asarray(p, float), np.asarray(p, float)]) for p in p_yes)
    return BayesNet(dag, (2,) * num_nodes, cpts)


@pytest.fixture(scope="module")
def chain():
    return binary_net(3, [(0, 1), (1, 2)], [[0.5], [0.1, 0.9], [0.1, 0.9]])


@pytest.fixture(scope="module")
def collider():
    # 0 -> 2 <- 1, 2 -> 3
    return binary_net(4, [(0, 2), (1, 2), (2, 3)],
                      [[0.5], [0.5], [0.1, 0.6, 0.7, 0.95], [0.2, 0.8]])


# ── Budgets ────────────────────────────────────────────────────
@pytest.mark.parametrize("tau,expected", [
    (0.05, 800), (0.005, 80_000), (0.03, 2223), (0.001, 2_000_000),
])
def test_classical_sample_size(tau, expected):
    assert classical_sample_size(tau) == expected


def test_ci_test_count_bound():
    assert ci_test_count_bound(3, 1) == 36
    assert ci_test_count_bound(8, 3) == 64 * (1 + 8 + 28 + 56)


def test_theoretical_ratio():
    for tau in (0.05, 0.01, 0.001):
        assert theoretical_query_ratio(tau) == pytest.approx(1 / (15 * math.pi * tau))
        assert theoretical_query_ratio(tau) * tau == pytest.approx(1 / 47.12, rel=1e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        PcConfig(tau=0.0)
    with pytest.raises(ValueError):
        PcConfig(tau=0.01, max_depth=-1)
    with pytest.raises(ValueError):
        PcConfig(tau=0.01, method="bootstrap")
    assert PcConfig(tau=0.01).decision_threshold == 0.01
    assert PcConfig(tau=0.01, threshold=0.002).decision_threshold == 0.002


# ── Single CI tests ────────────────────────────────────────────
def test_quantum_test_queries_per_stratum():
    joint = JointTable(np.array([[0.4, 0.1], [0.1, 0.4]]))
    ledger = QueryLedger()
    decision = quantum_ci_test(joint, 0, 1, (), PcConfig(tau=0.005), ledger,
                               np.random.default_rng(0), test_id=0)
    assert decision.queries == 20_480
    assert not decision.independent
    assert ledger.total("quantum") == 20_480


def test_classical_test_queries(chain):
    ledger = QueryLedger()
    test = make_ci_test(PcConfig(tau=0.05, method="classical"), ledger,
                        np.random.default_rng(0), net=chain)
    decision = test(0, 2, (1,), 0)
    assert decision.queries == 800
    assert decision.independent
    assert ledger.total("classical") == 800


def test_make_ci_test_requirements(chain):
    with pytest.raises(ValueError):
        make_ci_test(PcConfig(tau=0.01), QueryLedger(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_ci_test(PcConfig(tau=0.01, method="classical"), QueryLedger(), np.random.default_rng(0))


# ── PC loop ────────────────────────────────────────────────────
def test_independent_nodes_give_empty_skeleton():
    net = binary_net(3, [], [[0.3], [0.6], [0.5]])
    result = run_pc(3, exact_ci_test(exact_joint(net), 1e-10))
    assert len(result.skeleton) == 0
    assert result.n_tests == 3


def test_exact_chain_recovery(chain):
    result = run_pc(3, exact_ci_test(exact_joint(chain), 1e-10), max_depth=3)
    assert result.skeleton == true_skeleton(chain.dag)
    assert result.separating_sets == {(0, 2): (1,)}
    assert result.n_tests <= ci_test_count_bound(3, 1)


def test_depth_zero_keeps_chain_ends(chain):
    result = run_pc(3, exact_ci_test(exact_joint(chain), 1e-10), max_depth=0)
    assert len(result.skeleton) == 3


def test_exact_collider_recovery(collider):
    result = run_pc(4, exact_ci_test(exact_joint(collider), 1e-10))
    assert result.skeleton == true_skeleton(collider.dag)
    assert result.separating_sets[(0, 1)] == ()


@pytest.mark.parametrize("method,tau", [("quantum", 0.01), ("classical", 0.05)])
def test_chain_recovery_by_method(chain, method, tau):
    skeleton, ledger = pc_skeleton(chain, PcConfig(tau=tau, method=method, seed=1), QueryLedger())
    assert skeleton == true_skeleton(chain.dag)
    assert skeleton_f1(skeleton, true_skeleton(chain.dag)) == (1.0, 1.0, 1.0)
    assert ledger.total(method) > 0


def test_quantum_collider_recovery(collider):
    skeleton, _ = pc_skeleton(collider, PcConfig(tau=0.01, seed=2), QueryLedger())
    assert skeleton == true_skeleton(collider.dag)


def test_pc_on_joint_table(collider):
    joint = exact_joint(collider)
    skeleton, _ = pc_skeleton(joint, PcConfig(tau=0.01, seed=2), QueryLedger())
    assert skeleton == true_skeleton(collider.dag)
    with pytest.raises(ValueError):
        pc_skeleton(joint, PcConfig(tau=0.05, method="classical"), QueryLedger())


def test_quantum_ledger_decomposes_by_test(collider):
    config = PcConfig(tau=0.01)
    ledger = QueryLedger()
    test = make_ci_test(config, ledger, np.random.default_rng(0), joint=exact_joint(collider))
    result = run_pc(4, test, config.max_depth)
    assert ledger.n_tests("quantum") == result.n_tests
    frame = ledger.to_frame()
    per_test = frame.groupby("test_id")["queries"].sum()
    # binary variables with positive probabilities: 2^|Z| strata per test
    strata = frame.groupby("test_id")["stratum_id"].count()
    assert (per_test == strata * 5 * 2048).all()
    assert ledger.total() == int(per_test.sum())


def test_pc_deterministic(collider):
    runs = []
    for _ in range(2):
        ledger = QueryLedger()
        skeleton, _ = pc_skeleton(collider, PcConfig(tau=0.05, method="classical", seed=4), ledger)
        runs.append((skeleton, ledger.total()))
    assert runs[0] == runs[1]


def test_margin_sound_tests_recover_faithful_network(collider):
    # any test whose answer agrees with the exact CMI at a margin recovers the skeleton
    joint = exact_joint(collider)
    exact = exact_ci_test(joint, 1e-10)
    noisy_rng = np.random.default_rng(5)

    def perturbed(x, y, z_set, test_id):
        decision = exact(x, y, z_set, test_id)
        noise = noisy_rng.uniform(-0.005, 0.005)
        estimate = decision.estimate + noise
        return type(decision)(estimate, abs(estimate) <= 0.01, 0, "exact")

    result = run_pc(4, perturbed)
    assert result.skeleton == true_skeleton(collider.dag)


# ── Scoring ────────────────────────────────────────────────────
def test_f1_cases():
    empty = Skeleton(4)
    truth = Skeleton(4, frozenset({(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)}))
    assert skeleton_f1(empty, empty) == (1.0, 1.0, 1.0)
    assert skeleton_f1(empty, truth) == (0.0, 0.0, 0.0)
    assert skeleton_f1(truth, truth) == (1.0, 1.0, 1.0)
    partial = Skeleton(4, frozenset({(0, 1), (0, 2), (0, 3)}))
    precision, recall, f1 = skeleton_f1(partial, truth)
    assert (precision, recall) == (1.0, pytest.approx(0.6))
    assert f1 == pytest.approx(0.75)


def test_f1_node_mismatch():
    with pytest.raises(ValueError):
        skeleton_f1(Skeleton(3), Skeleton(4))


def test_f1_on_dag_skeleton():
    dag = Dag(3, frozenset({(0, 1)}))
    assert skeleton_f1(true_skeleton(dag), Skeleton(3, frozenset({(1, 0)}))) == (1.0, 1.0, 1.0)
