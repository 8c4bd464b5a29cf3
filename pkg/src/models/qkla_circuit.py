"""
QKLA Circuit — Gate-Level Construction
======================================
Builds the composed unitary A (state preparation, log-ratio XOR oracle,
uniformly controlled R_y, uncomputation), the Grover iterate
G = -A S_0 A^dag S_chi and the canonical amplitude-estimation circuit,
and returns exact phase-register distributions from the state vector.

Register layout (little-endian): sample qubits 0..n_q-1, arithmetic
qubits n_q..n_q+b-1, ancilla n_q+b, phase qubits after the ancilla.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from src.models.qae_model import estimate_from_outcomes
from src.probability.distributions import (
    ClipParams,
    DiscreteDistribution,
    clipped_log_ratios,
)
from src.simulation.statevector import (
    MAX_QUBITS,
    UnitaryMatrix,
    apply_unitary,
    embed_unitary,
    inverse_qft,
    measurement_distribution,
    zero_state,
)

logger = logging.getLogger(__name__)

GS_RESIDUAL_TOL = 1e-9
CODEC_MODES = ("grid", "midpoint")


# ── Fixed-point codec ──────────────────────────────────────────
@dataclass(frozen=True)
class FixedPointCodec:
    """b-bit code for values in [-L, L].

    "grid" rounds to the nearest of -L + j*2L/2^b (j = 0..2^b-1), so -L and 0
    are exact. "midpoint" decodes code v to -L + 2L(v + 0.5)/2^b.
    """

    L: float
    b: int
    mode: str = "grid"

    def __post_init__(self):
        ClipParams(self.L, self.b)
        if self.mode not in CODEC_MODES:
            raise ValueError(f"unknown codec mode {self.mode!r}, expected one of {CODEC_MODES}")

    @property
    def levels(self) -> int:
        return 2 ** self.b

    @property
    def step(self) -> float:
        return 2.0 * self.L / self.levels

    def encode(self, value):
        scaled = (np.asarray(value, dtype=float) + self.L) / self.step
        if self.mode == "grid":
            code = np.round(scaled)
        else:
            code = np.floor(scaled)
        return np.clip(code, 0, self.levels - 1).astype(np.int64)

    def decode(self, code):
        code = np.asarray(code, dtype=float)
        offset = 0.0 if self.mode == "grid" else 0.5
        return -self.L + self.step * (code + offset)

    def g_value(self, code):
        return np.clip((self.decode(code) + self.L) / (2.0 * self.L), 0.0, 1.0)


@dataclass(frozen=True)
class QklaCircuit:
    prep_oracle: UnitaryMatrix
    log_oracle: UnitaryMatrix
    controlled_rotation: UnitaryMatrix
    a_operator: UnitaryMatrix
    codec: FixedPointCodec
    layout: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    quantized_target: float = float("nan")
    grover: Optional[UnitaryMatrix] = None

    @property
    def num_qubits(self) -> int:
        return sum(size for _, size in self.layout.values())

    @property
    def ancilla(self) -> int:
        return self.layout["ancilla"][0]


def _register_layout(n_sample: int, b: int) -> Dict[str, Tuple[int, int]]:
    return {"sample": (0, n_sample), "arith": (n_sample, b), "ancilla": (n_sample + b, 1)}


def _log2_size(size: int, what: str) -> int:
    if size < 2 or size & (size - 1):
        raise ValueError(f"{what} size {size} is not a power of 2 (>= 2)")
    return size.bit_length() - 1


# ── Components ─────────────────────────────────────────────────
def build_prep_oracle(p: DiscreteDistribution) -> UnitaryMatrix:
    """Real orthogonal matrix whose first column is sqrt(p)."""
    dim = p.alphabet_size
    _log2_size(dim, "alphabet")
    columns = [np.sqrt(p.probs)]
    # candidates e_1, ..., e_{dim-1}, then e_0
    for index in list(range(1, dim)) + [0]:
        if len(columns) == dim:
            break
        vec = np.zeros(dim)
        vec[index] = 1.0
        for _ in range(2):
            for col in columns:
                vec = vec - np.dot(col, vec) * col
        residual = np.linalg.norm(vec)
        if residual < GS_RESIDUAL_TOL:
            continue
        columns.append(vec / residual)
    if len(columns) != dim:
        raise RuntimeError("Gram-Schmidt completion failed to span the space")
    return UnitaryMatrix(np.column_stack(columns))


def log_oracle_codes(p: DiscreteDistribution, q: DiscreteDistribution,
                     codec: FixedPointCodec) -> np.ndarray:
    return codec.encode(clipped_log_ratios(p, q, ClipParams(codec.L, codec.b)))


def build_log_oracle(p: DiscreteDistribution, q: DiscreteDistribution,
                     codec: FixedPointCodec) -> UnitaryMatrix:
    """Permutation |w>|r> -> |w>|r XOR code(l_L(w))> on sample + arith."""
    codes = log_oracle_codes(p, q, codec)
    n_words = p.alphabet_size
    _log2_size(n_words, "alphabet")
    dim = n_words * codec.levels
    matrix = np.zeros((dim, dim))
    w = np.arange(dim) % n_words
    r = np.arange(dim) // n_words
    target = w + n_words * (r ^ codes[w])
    matrix[target, np.arange(dim)] = 1.0
    return UnitaryMatrix(matrix)


def ry_matrix(phi: float) -> np.ndarray:
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -s], [s, c]])


def build_controlled_rotation(codec: FixedPointCodec) -> UnitaryMatrix:
    """R_y(2 arcsin sqrt g(v)) on the ancilla for every arithmetic code v."""
    levels = codec.levels
    matrix = np.zeros((2 * levels, 2 * levels))
    g = codec.g_value(np.arange(levels))
    for v in range(levels):
        rot = ry_matrix(2 * math.asin(math.sqrt(g[v])))
        rows = [v, v + levels]
        matrix[np.ix_(rows, rows)] = rot
    return UnitaryMatrix(matrix)


def quantized_clipped_kl(p: DiscreteDistribution, q: DiscreteDistribution,
                         codec: FixedPointCodec) -> float:
    values = codec.decode(log_oracle_codes(p, q, codec))
    return float(np.dot(p.probs, values))


def assemble_a_operator(prep: UnitaryMatrix, log_oracle: UnitaryMatrix,
                        rotation: UnitaryMatrix, codec: FixedPointCodec,
                        quantized_target: float = float("nan")) -> QklaCircuit:
    n_sample = prep.num_qubits
    b = rotation.num_qubits - 1
    if b != codec.b:
        raise ValueError(f"rotation acts on {b} arithmetic qubits, codec has {codec.b}")
    if log_oracle.num_qubits != n_sample + b:
        raise ValueError(
            f"log oracle spans {log_oracle.num_qubits} qubits, expected {n_sample + b}"
        )
    layout = _register_layout(n_sample, b)
    n = n_sample + b + 1
    sample = list(range(n_sample))
    arith = list(range(n_sample, n_sample + b))
    ancilla = [n_sample + b]
    full_prep = embed_unitary(prep, sample, n)
    full_log = embed_unitary(log_oracle, sample + arith, n)
    full_rot = embed_unitary(rotation, arith + ancilla, n)
    a_op = full_log.adjoint() @ full_rot @ full_log @ full_prep
    return QklaCircuit(
        prep_oracle=prep,
        log_oracle=log_oracle,
        controlled_rotation=rotation,
        a_operator=a_op,
        codec=codec,
        layout=layout,
        quantized_target=quantized_target,
    )


def build_grover(circuit: QklaCircuit) -> UnitaryMatrix:
    """G = -A S_0 A^dag S_chi with S_chi flipping ancilla = 1."""
    dim = circuit.a_operator.dim
    index = np.arange(dim)
    s_chi = np.where((index >> circuit.ancilla) & 1, -1.0, 1.0)
    s_zero = np.ones(dim)
    s_zero[0] = -1.0
    a = circuit.a_operator.entries
    return UnitaryMatrix(-(a * s_zero) @ a.conj().T * s_chi)


def build_qkla_circuit(p: DiscreteDistribution, q: DiscreteDistribution,
                       codec: FixedPointCodec) -> QklaCircuit:
    circuit = assemble_a_operator(
        build_prep_oracle(p),
        build_log_oracle(p, q, codec),
        build_controlled_rotation(codec),
        codec,
        quantized_target=quantized_clipped_kl(p, q, codec),
    )
    return replace(circuit, grover=build_grover(circuit))


def prepared_state(circuit: QklaCircuit):
    start = zero_state(circuit.num_qubits, circuit.layout)
    return apply_unitary(start, circuit.a_operator, list(range(circuit.num_qubits)))


def ancilla_probability(circuit: QklaCircuit) -> float:
    dist = measurement_distribution(prepared_state(circuit), [circuit.ancilla])
    return float(dist.probs[1])


def uncomputation_residual(circuit: QklaCircuit) -> float:
    """Probability mass left on arith != 0 after A|0>."""
    state = prepared_state(circuit)
    dist = measurement_distribution(state, state.qubits("arith"))
    return float(1.0 - dist.probs[0])


# ── Canonical amplitude estimation ─────────────────────────────
def _controlled(u: np.ndarray) -> UnitaryMatrix:
    """Block diag(I, U); the control is the most significant local qubit."""
    dim = u.shape[0]
    matrix = np.eye(2 * dim, dtype=complex)
    matrix[dim:, dim:] = u
    return UnitaryMatrix(matrix)


def run_canonical_qae(circuit: QklaCircuit, t: int,
                      max_qubits: int = MAX_QUBITS) -> DiscreteDistribution:
    if t < 1:
        raise ValueError(f"phase register needs t >= 1, got {t}")
    n = circuit.num_qubits
    if n + t > max_qubits:
        raise RuntimeError(f"{n + t} qubits exceeds the {max_qubits}-qubit budget")
    grover = circuit.grover if circuit.grover is not None else build_grover(circuit)
    layout = dict(circuit.layout)
    layout["phase"] = (n, t)
    system = list(range(n))
    phase = list(range(n, n + t))

    state = apply_unitary(zero_state(n + t, layout), circuit.a_operator, system)
    hadamard = UnitaryMatrix(np.array([[1, 1], [1, -1]]) / math.sqrt(2))
    for qubit in phase:
        state = apply_unitary(state, hadamard, [qubit])
    power = grover.entries
    for j, qubit in enumerate(phase):
        if j > 0:
            power = power @ power
        state = apply_unitary(state, _controlled(power), system + [qubit])
    state = inverse_qft(state, phase)
    logger.debug("canonical QAE with t=%d on %d qubits done", t, n + t)
    return measurement_distribution(state, phase)


def qkla_full_estimate(circuit: QklaCircuit, t: int, k: int,
                       rng: np.random.Generator,
                       dist: Optional[DiscreteDistribution] = None) -> float:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dist = run_canonical_qae(circuit, t) if dist is None else dist
    outcomes = rng.choice(2 ** t, size=k, p=dist.probs)
    a_hat = estimate_from_outcomes(outcomes, 2 ** t)
    return 2.0 * circuit.codec.L * a_hat - circuit.codec.L
