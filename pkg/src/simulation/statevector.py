"""
Dense State-Vector Simulator
============================
Complex amplitude vectors over n qubits, unitary application on qubit
subsets, (inverse) QFT and exact Born marginals.

Qubit order is little-endian: qubit 0 is the least significant bit of the
basis-state index, and the first qubit of a target list is the least
significant bit of the local operator index.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from src.probability.distributions import DiscreteDistribution

logger = logging.getLogger(__name__)

MAX_QUBITS = 20
NORM_TOL = 1e-10


# ── Types ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class UnitaryMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"unitary must be square, got shape {entries.shape}")
        dim = entries.shape[0]
        if dim < 1 or dim & (dim - 1):
            raise ValueError(f"unitary dimension {dim} is not a power of 2")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def adjoint(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries.conj().T)

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries @ other.entries)


@dataclass(frozen=True)
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray
    register_map: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2 ** self.num_qubits:
            raise ValueError(
                f"{amps.size} amplitudes for {self.num_qubits} qubits"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not unit-norm (|psi|^2 = {norm:.12f})")
        for name, (start, size) in self.register_map.items():
            if start < 0 or size < 1 or start + size > self.num_qubits:
                raise ValueError(f"register {name!r} outside the {self.num_qubits}-qubit state")
        object.__setattr__(self, "amplitudes", amps)

    def qubits(self, register: str) -> list:
        start, size = self.register_map[register]
        return list(range(start, start + size))

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))


def zero_state(num_qubits: int, register_map=None) -> QuantumState:
    return basis_state(num_qubits, 0, register_map)


def basis_state(num_qubits: int, index: int, register_map=None) -> QuantumState:
    if num_qubits > MAX_QUBITS:
        raise RuntimeError(f"{num_qubits} qubits exceeds the {MAX_QUBITS}-qubit budget")
    if not 0 <= index < 2 ** num_qubits:
        raise ValueError(f"basis index {index} out of range")
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[index] = 1.0
    return QuantumState(num_qubits, amps, dict(register_map or {}))


# ── Application ────────────────────────────────────────────────
def _check_targets(targets: Sequence[int], num_qubits: int, dim: int):
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate qubit index in {targets}")
    for t in targets:
        if not 0 <= t < num_qubits:
            raise ValueError(f"qubit {t} out of range for {num_qubits} qubits")
    if dim != 2 ** len(targets):
        raise ValueError(
            f"operator dimension {dim} does not match {len(targets)} target qubits"
        )
    return targets


def apply_matrix(amplitudes: np.ndarray, matrix: np.ndarray,
                 targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """Apply `matrix` to the target qubits of one vector or a batch of columns.

    `amplitudes` is (2^n,) or (2^n, batch). No normalization is assumed.
    """
    targets = _check_targets(targets, num_qubits, matrix.shape[0])
    k = len(targets)
    batch_shape = amplitudes.shape[1:]
    psi = amplitudes.reshape([2] * num_qubits + list(batch_shape))
    # tensor axis 0 is the most significant qubit
    target_axes = [num_qubits - 1 - t for t in reversed(targets)]
    u = matrix.reshape([2] * (2 * k))
    out = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), target_axes))
    out = np.moveaxis(out, list(range(k)), target_axes)
    return out.reshape(amplitudes.shape)


def apply_unitary(state: QuantumState, u: UnitaryMatrix,
                  target_qubits: Sequence[int]) -> QuantumState:
    amps = apply_matrix(state.amplitudes, u.entries, target_qubits, state.num_qubits)
    return QuantumState(state.num_qubits, amps, dict(state.register_map))


def embed_unitary(u: UnitaryMatrix, target_qubits: Sequence[int],
                  num_qubits: int) -> UnitaryMatrix:
    identity = np.eye(2 ** num_qubits, dtype=complex)
    return UnitaryMatrix(apply_matrix(identity, u.entries, target_qubits, num_qubits))


def is_unitary(u: UnitaryMatrix, tol: float = 1e-10) -> bool:
    product = u.entries @ u.entries.conj().T
    return bool(np.max(np.abs(product - np.eye(u.dim))) <= tol)


# ── Fourier transform ──────────────────────────────────────────
def qft_matrix(num_qubits: int) -> np.ndarray:
    """|j> -> M^{-1/2} sum_m exp(2 pi i j m / M) |m>."""
    size = 2 ** num_qubits
    j = np.arange(size)
    return np.exp(2j * np.pi * np.outer(j, j) / size) / np.sqrt(size)


def qft(state: QuantumState, phase_qubits: Sequence[int]) -> QuantumState:
    if len(phase_qubits) == 0:
        raise ValueError("QFT needs at least one qubit")
    return apply_unitary(state, UnitaryMatrix(qft_matrix(len(phase_qubits))), phase_qubits)


def inverse_qft(state: QuantumState, phase_qubits: Sequence[int]) -> QuantumState:
    if len(phase_qubits) == 0:
        raise ValueError("inverse QFT needs at least one qubit")
    inverse = qft_matrix(len(phase_qubits)).conj().T
    return apply_unitary(state, UnitaryMatrix(inverse), phase_qubits)


# ── Measurement ────────────────────────────────────────────────
def measurement_distribution(state: QuantumState,
                             qubits: Sequence[int]) -> DiscreteDistribution:
    n = state.num_qubits
    qubits = _check_targets(qubits, n, 2 ** len(qubits))
    if not qubits:
        raise ValueError("measurement needs at least one qubit")
    probs = (np.abs(state.amplitudes) ** 2).reshape([2] * n)
    keep = [n - 1 - q for q in reversed(qubits)]
    rest = [axis for axis in range(n) if axis not in keep]
    marginal = np.transpose(probs, keep + rest).reshape(2 ** len(qubits), -1).sum(axis=1)
    return DiscreteDistribution(marginal / marginal.sum())
