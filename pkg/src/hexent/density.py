"""Density-matrix container shared by the simulator and tomography code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-12
EIGENVALUE_FLOOR = -1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """A 2**k x 2**k density matrix with the qubit labels it refers to.

    The first label corresponds to the most significant bit of the matrix
    index. ``matrix`` is stored as an immutable array.
    """

    matrix: np.ndarray
    qubits: tuple[int, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        dim = 2 ** len(self.qubits)
        if m.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match {len(self.qubits)} qubits"
            )

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def check_hermitian(self, atol: float = HERMITICITY_ATOL) -> None:
        dev = np.abs(self.matrix - self.matrix.conj().T).max()
        if dev > atol:
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.2e})")

    def check_trace_one(self, atol: float = TRACE_ATOL) -> None:
        tr = self.matrix.trace()
        if abs(tr - 1.0) > atol:
            raise ValueError(f"matrix trace {tr} is not 1")

    def check_positive(self, floor: float = EIGENVALUE_FLOOR) -> None:
        lo = np.linalg.eigvalsh(self.matrix).min()
        if lo < floor:
            raise ValueError(f"matrix has negative eigenvalue {lo:.3e}")

    def to_dict(self) -> dict:
        """Flat real/imaginary export used by report files."""
        return {
            "qubits": list(self.qubits),
            "dim": self.matrix.shape[0],
            "real": np.real(self.matrix).ravel().tolist(),
            "imag": np.imag(self.matrix).ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DensityMatrix":
        dim = int(doc["dim"])
        m = np.array(doc["real"], dtype=float).reshape(dim, dim) + 1j * np.array(
            doc["imag"], dtype=float
        ).reshape(dim, dim)
        return cls(m, tuple(doc["qubits"]))


def as_matrix(rho) -> np.ndarray:
    """Accept either a DensityMatrix or a bare ndarray."""
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=complex)
