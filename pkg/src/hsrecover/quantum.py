"""Dense qubit operators, gates, density matrices and observables.

Basis ordering is |q0 q1 ... q_{n-1}> with qubit 0 as the most significant bit.
Everything in this package goes through that single convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 6
# Largest matrix we ever build is the Liouvillian of MAX_QUBITS qubits.
MAX_DIM = 4**MAX_QUBITS

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# Lowering operator |0><1|: takes |1> to |0>.
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
PROJ_1 = np.array([[0, 0], [0, 1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class SystemTooLarge(ValueError):
    pass


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


def check_qubits(n_qubits: int) -> int:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SystemTooLarge(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    return n_qubits


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``; refuses results larger than ``MAX_DIM``."""
    a, b = _as_matrix(a), _as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if rows > MAX_DIM or cols > MAX_DIM:
        raise SystemTooLarge(f"kron result {rows}x{cols} exceeds {MAX_DIM}")
    return np.kron(a, b)


def embed_single_qubit(op, target: int, n_qubits: int) -> np.ndarray:
    """Place a 2x2 ``op`` on ``target`` with identities on every other qubit."""
    op = _as_matrix(op)
    if op.shape != (2, 2):
        raise ValueError(f"single-qubit operator must be 2x2, got {op.shape}")
    check_qubits(n_qubits)
    if not 0 <= target < n_qubits:
        raise ValueError(f"target {target} out of range for {n_qubits} qubits")
    out = np.ones((1, 1), dtype=complex)
    for q in range(n_qubits):
        out = kron(out, op if q == target else I2)
    return out


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def cnot(control: int, target: int, n_qubits: int) -> np.ndarray:
    check_qubits(n_qubits)
    if control == target:
        raise ValueError("CNOT control and target must differ")
    for q in (control, target):
        if not 0 <= q < n_qubits:
            raise ValueError(f"qubit {q} out of range for {n_qubits} qubits")
    dim = 2**n_qubits
    u = np.zeros((dim, dim), dtype=complex)
    cbit = 1 << (n_qubits - 1 - control)
    tbit = 1 << (n_qubits - 1 - target)
    for i in range(dim):
        u[i ^ tbit if i & cbit else i, i] = 1.0
    return u


def gate_matrix(name: str, *, theta: float | None = None, control: int | None = None,
                target: int | None = None, n_qubits: int | None = None) -> np.ndarray:
    """Unitary for one of the supported gates: ``X``, ``H``, ``RX`` or ``CNOT``.

    ``X``, ``H`` and ``RX`` (which needs ``theta``) are returned as 2x2 matrices;
    use :func:`embed_single_qubit` to place them in a register. ``CNOT`` needs
    ``control``, ``target`` and ``n_qubits`` and is returned at full size.
    """
    key = name.upper()
    if key == "X":
        return SIGMA_X.copy()
    if key == "H":
        return HADAMARD.copy()
    if key == "RX":
        if theta is None:
            raise ValueError("RX needs theta")
        return rx(theta)
    if key == "CNOT":
        if control is None or target is None or n_qubits is None:
            raise ValueError("CNOT needs control, target and n_qubits")
        return cnot(control, target, n_qubits)
    raise ValueError(f"unknown gate {name!r}")


def is_unitary(u, atol: float = 1e-12) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.abs(u @ u.conj().T - np.eye(u.shape[0])).max()) <= atol


def is_hermitian(m, atol: float = 1e-10) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return float(np.abs(m - m.conj().T).max()) <= atol


def _n_qubits_for(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return check_qubits(n)


@dataclass(frozen=True)
class DensityMatrix:
    """Validated state: Hermitian, unit trace, positive semidefinite."""

    matrix: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        object.__setattr__(self, "n_qubits", _n_qubits_for(m.shape[0]))
        if not is_hermitian(m, 1e-10):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > 1e-10:
            raise ValueError(f"density matrix trace is {np.trace(m)}, expected 1")
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def ground(cls, n_qubits: int) -> DensityMatrix:
        dim = 2 ** check_qubits(n_qubits)
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = 1.0
        return cls(m)

    @classmethod
    def from_state(cls, psi) -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Observable:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        if not is_hermitian(m, 1e-10):
            raise ValueError(f"observable {self.label!r} is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(m))


def expectation(obs: Observable, rho: DensityMatrix) -> float:
    a = obs.matrix if isinstance(obs, Observable) else _as_matrix(obs)
    r = rho.matrix if isinstance(rho, DensityMatrix) else _as_matrix(rho)
    if a.shape != r.shape:
        raise ValueError(f"observable {a.shape} and state {r.shape} dimensions differ")
    # tr(A rho) without forming the product
    value = np.sum(a * r.T)
    if abs(value.imag) >= 1e-9:
        raise ValueError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def excited_population(n_qubits: int, target: int) -> Observable:
    """Projector |1><1| on ``target``, identity elsewhere."""
    return Observable(embed_single_qubit(PROJ_1, target, n_qubits), label=f"P1[q{target}]")
