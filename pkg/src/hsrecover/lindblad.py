"""Vectorized Lindblad evolution with instantaneous noiseless gates.

Density matrices are vectorized by column stacking, so that
``vec(A X B) = (B^T ⊗ A) vec(X)``.  With that convention the generator is

    M = -i (I ⊗ H - H^T ⊗ I) + sum_j gamma_j D[L_j]
    D[L] = conj(L) ⊗ L - 1/2 I ⊗ L†L - 1/2 (L†L)^T ⊗ I

and a wait of duration t maps vec(rho) to expm(M t) vec(rho).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import expm

from .quantum import (
    SIGMA_MINUS,
    SIGMA_Z,
    DensityMatrix,
    Observable,
    check_qubits,
    embed_single_qubit,
    expectation,
    is_hermitian,
    is_unitary,
    kron,
)


class ChannelKind(str, enum.Enum):
    AMPLITUDE_DAMPING = "amplitude_damping"
    PURE_DEPHASING = "pure_dephasing"


@dataclass(frozen=True)
class NoiseChannel:
    """One dissipator on one qubit. ``rate`` is in 1/us."""

    kind: ChannelKind
    target: int
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ValueError(f"channel rate must be finite and >= 0, got {self.rate}")
        if self.target < 0:
            raise ValueError(f"channel target must be >= 0, got {self.target}")

    def jump_operator(self, n_qubits: int) -> np.ndarray:
        if self.target >= n_qubits:
            raise ValueError(f"channel target {self.target} out of range for {n_qubits} qubits")
        if self.kind is ChannelKind.AMPLITUDE_DAMPING:
            return embed_single_qubit(SIGMA_MINUS, self.target, n_qubits)
        # sigma_z / sqrt(2) makes coherences decay at exactly `rate`
        return embed_single_qubit(SIGMA_Z / np.sqrt(2), self.target, n_qubits)


def vectorize(rho) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return m.reshape(-1, order="F")


def devectorize(vec) -> np.ndarray:
    vec = np.asarray(vec)
    dim = int(round(np.sqrt(vec.size)))
    if dim * dim != vec.size:
        raise ValueError(f"vector length {vec.size} is not a square")
    return vec.reshape(dim, dim, order="F")


def hamiltonian_superoperator(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0], dtype=complex)
    return -1j * (kron(eye, h) - kron(h.T, eye))


def dissipator(jump) -> np.ndarray:
    """Vectorized ``D[L] rho = L rho L† - 1/2 {L†L, rho}``."""
    jump = np.asarray(jump, dtype=complex)
    eye = np.eye(jump.shape[0], dtype=complex)
    ldl = jump.conj().T @ jump
    return kron(jump.conj(), jump) - 0.5 * kron(eye, ldl) - 0.5 * kron(ldl.T, eye)


@dataclass(frozen=True)
class Liouvillian:
    n_qubits: int
    matrix: np.ndarray
    channels: tuple[NoiseChannel, ...]
    hamiltonian: np.ndarray


def build_liouvillian(h, channels: Sequence[NoiseChannel], n_qubits: int) -> Liouvillian:
    """Generator for free evolution under ``h`` (rad/us) and the given channels."""
    check_qubits(n_qubits)
    dim = 2**n_qubits
    h = np.zeros((dim, dim), dtype=complex) if h is None else np.asarray(h, dtype=complex)
    if h.shape != (dim, dim):
        raise ValueError(f"hamiltonian shape {h.shape} does not match {n_qubits} qubits")
    if not is_hermitian(h, 1e-10):
        raise ValueError("hamiltonian is not Hermitian")
    m = hamiltonian_superoperator(h)
    for ch in channels:
        if ch.rate:
            m = m + ch.rate * dissipator(ch.jump_operator(n_qubits))
        else:
            ch.jump_operator(n_qubits)  # still validates the target
    m.setflags(write=False)
    return Liouvillian(n_qubits, m, tuple(channels), h)


def _to_state(m: np.ndarray) -> DensityMatrix:
    return DensityMatrix(0.5 * (m + m.conj().T))


def evolve(rho: DensityMatrix, liouv: Liouvillian, t: float) -> DensityMatrix:
    """Free evolution for ``t`` microseconds."""
    if t < 0:
        raise ValueError(f"evolution time must be >= 0, got {t}")
    if rho.n_qubits != liouv.n_qubits:
        raise ValueError("state and Liouvillian qubit counts differ")
    if t == 0:
        return rho
    return _to_state(_propagate(rho.matrix, liouv, t))


def _propagate(m: np.ndarray, liouv: Liouvillian, t: float) -> np.ndarray:
    if t == 0:
        return m
    out = devectorize(expm(liouv.matrix * t) @ vectorize(m))
    return 0.5 * (out + out.conj().T)


def apply_gate(rho: DensityMatrix, u) -> DensityMatrix:
    u = np.asarray(u, dtype=complex)
    if u.shape != rho.matrix.shape:
        raise ValueError(f"gate shape {u.shape} does not match state {rho.matrix.shape}")
    if not is_unitary(u, 1e-9):
        raise ValueError("gate is not unitary")
    return _to_state(u @ rho.matrix @ u.conj().T)


@dataclass(frozen=True)
class Gate:
    matrix: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class Wait:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"wait duration must be >= 0, got {self.duration}")


Step = Union[Gate, Wait]


@dataclass(frozen=True)
class ExperimentSchedule:
    n_qubits: int
    steps: tuple[Step, ...]
    observable: Observable
    _dim: int = field(init=False, repr=False)

    def __post_init__(self):
        dim = 2 ** check_qubits(self.n_qubits)
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "_dim", dim)
        for step in self.steps:
            if isinstance(step, Gate):
                if np.shape(step.matrix) != (dim, dim):
                    raise ValueError(f"gate {step.label!r} is not {dim}x{dim}")
                if not is_unitary(step.matrix, 1e-9):
                    raise ValueError(f"gate {step.label!r} is not unitary")
        if self.observable.matrix.shape != (dim, dim):
            raise ValueError("observable dimension does not match schedule")


def execute(schedule: ExperimentSchedule, liouv: Liouvillian) -> float:
    """Run ``schedule`` from |0...0> with a prebuilt generator."""
    if liouv.n_qubits != schedule.n_qubits:
        raise ValueError("schedule and Liouvillian qubit counts differ")
    # gates were checked when the schedule was built; only the final state is validated
    m = np.zeros((schedule._dim, schedule._dim), dtype=complex)
    m[0, 0] = 1.0
    for step in schedule.steps:
        if isinstance(step, Gate):
            u = np.asarray(step.matrix, dtype=complex)
            m = u @ m @ u.conj().T
            m = 0.5 * (m + m.conj().T)
        else:
            m = _propagate(m, liouv, step.duration)
    return expectation(schedule.observable, DensityMatrix(m))


def run_schedule(schedule: ExperimentSchedule, channels: Sequence[NoiseChannel], h=None) -> float:
    return execute(schedule, build_liouvillian(h, channels, schedule.n_qubits))


def field_hamiltonian(n_qubits: int, omega: float) -> np.ndarray:
    """``1/2 * omega * sum_k sigma_z^(k)`` with ``omega`` in rad/us."""
    dim = 2 ** check_qubits(n_qubits)
    h = np.zeros((dim, dim), dtype=complex)
    for q in range(n_qubits):
        h += 0.5 * omega * embed_single_qubit(SIGMA_Z, q, n_qubits)
    return h
