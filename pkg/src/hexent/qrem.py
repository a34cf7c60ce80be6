"""Readout-error mitigation: calibration matrices and vector correction.

Readout errors are modeled as uncorrelated per-qubit classical noise, so the
device calibration matrix factorizes into a tensor product of per-qubit 2x2
column-stochastic matrices built from just two calibration circuits
(all-zeros and all-ones preparations). Correction applies each per-qubit
inverse factorwise, then projects the result back onto the probability
simplex, Euclidean-nearest-point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .stabilizer import CountsTable

SINGULAR_DETERMINANT = 1e-6


class CalibrationError(ValueError):
    """Raised for unusable calibration data."""


def calibration_matrix(p10: float, p01: float) -> np.ndarray:
    """2x2 column-stochastic matrix [[p(0|0), p(0|1)], [p(1|0), p(1|1)]]."""
    return np.array([[1.0 - p10, p01], [p10, 1.0 - p01]])


def validate_calibration_matrix(mat: np.ndarray, qubit: int | None = None) -> None:
    mat = np.asarray(mat)
    label = "" if qubit is None else f" for qubit {qubit}"
    if mat.shape != (2, 2):
        raise CalibrationError(f"calibration matrix{label} must be 2x2")
    if np.any((mat < 0) | (mat > 1)):
        raise CalibrationError(f"calibration matrix{label} entries must lie in [0, 1]")
    if np.abs(mat.sum(axis=0) - 1.0).max() > 1e-9:
        raise CalibrationError(f"calibration matrix{label} columns must sum to 1")
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if abs(det) < SINGULAR_DETERMINANT:
        raise CalibrationError(
            f"calibration matrix{label} is near-singular (det={det:.2e}); "
            "readout flip rates too close to 50%"
        )


def build_calibration_matrices(
    zero_counts: CountsTable, one_counts: CountsTable
) -> np.ndarray:
    """Per-qubit calibration matrices from the two calibration circuits.

    Args:
        zero_counts: outcomes of the all-zeros preparation.
        one_counts: outcomes of the all-ones preparation.

    Returns:
        Array (n_qubits, 2, 2); entry [i] is column-stochastic with column y
        holding the outcome distribution of qubit i given preparation y.

    Raises:
        CalibrationError: mismatched tables or a near-singular qubit matrix,
            naming the offending qubit.
    """
    if zero_counts.qubits != one_counts.qubits:
        raise CalibrationError("calibration tables must cover the same qubits")
    p10 = zero_counts.one_fractions()
    p11 = one_counts.one_fractions()
    mats = np.empty((len(p10), 2, 2))
    for i, (a, b) in enumerate(zip(p10, p11)):
        mats[i] = calibration_matrix(a, 1.0 - b)
        validate_calibration_matrix(mats[i], qubit=zero_counts.qubits[i])
    return mats


@dataclass(frozen=True)
class CalibrationSnapshot:
    """One calibration pass: per-qubit matrices plus the source counts."""

    label: str
    matrices: np.ndarray
    zero_counts: CountsTable | None = None
    one_counts: CountsTable | None = None

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1:] != (2, 2):
            raise CalibrationError("matrices must have shape (n, 2, 2)")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def n_qubits(self) -> int:
        return self.matrices.shape[0]

    @classmethod
    def from_counts(
        cls, label: str, zero_counts: CountsTable, one_counts: CountsTable
    ) -> "CalibrationSnapshot":
        mats = build_calibration_matrices(zero_counts, one_counts)
        return cls(label, mats, zero_counts, one_counts)

    def to_dict(self) -> dict:
        return {
            "snapshot": self.label,
            "qubits": [
                {
                    "q": int(q),
                    "p00": float(self.matrices[q, 0, 0]),
                    "p10": float(self.matrices[q, 1, 0]),
                    "p01": float(self.matrices[q, 0, 1]),
                    "p11": float(self.matrices[q, 1, 1]),
                }
                for q in range(self.n_qubits)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationSnapshot":
        entries = sorted(doc["qubits"], key=lambda e: int(e["q"]))
        n = len(entries)
        if [int(e["q"]) for e in entries] != list(range(n)):
            raise CalibrationError("snapshot must cover every qubit exactly once")
        mats = np.empty((n, 2, 2))
        for e in entries:
            q = int(e["q"])
            mats[q] = [[float(e["p00"]), float(e["p01"])], [float(e["p10"]), float(e["p11"])]]
            validate_calibration_matrix(mats[q], qubit=q)
        return cls(str(doc.get("snapshot", "snapshot")), mats)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "CalibrationSnapshot":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CalibrationSet:
    """Ordered calibration snapshots (several model readout drift)."""

    snapshots: tuple[CalibrationSnapshot, ...]

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if not snaps:
            raise CalibrationError("calibration set must contain a snapshot")
        n = snaps[0].n_qubits
        if any(s.n_qubits != n for s in snaps):
            raise CalibrationError("snapshots must cover the same qubits")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def n_qubits(self) -> int:
        return self.snapshots[0].n_qubits

    def __len__(self) -> int:
        return len(self.snapshots)

    def matrices_for(self, qubits, snapshot: int = 0) -> np.ndarray:
        """Calibration matrices (k, 2, 2) of a qubit subset."""
        return self.snapshots[snapshot].matrices[list(qubits)]

    def mean_matrices_for(self, qubits) -> np.ndarray:
        """Snapshot-averaged matrices, used for drift-mode point estimates."""
        stack = np.stack([s.matrices[list(qubits)] for s in self.snapshots])
        return stack.mean(axis=0)


def invert_2x2(mats: np.ndarray) -> np.ndarray:
    """Closed-form inverses of stacked 2x2 matrices (..., 2, 2)."""
    mats = np.asarray(mats, dtype=float)
    det = mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    if np.any(np.abs(det) < SINGULAR_DETERMINANT):
        raise CalibrationError("singular calibration factor")
    inv = np.empty_like(mats)
    inv[..., 0, 0] = mats[..., 1, 1]
    inv[..., 1, 1] = mats[..., 0, 0]
    inv[..., 0, 1] = -mats[..., 0, 1]
    inv[..., 1, 0] = -mats[..., 1, 0]
    return inv / det[..., None, None]


def apply_factorwise(p: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """Apply a tensor product of per-qubit 2x2 maps without materializing it.

    Args:
        p: vectors (..., 2**k); the first qubit is the most significant bit.
        factors: matrices (..., k, 2, 2) broadcastable against p's batch.

    Returns:
        (tensor product of factors) @ p, same shape as p.
    """
    p = np.asarray(p, dtype=float)
    factors = np.asarray(factors, dtype=float)
    k = factors.shape[-3]
    if p.shape[-1] != 2**k:
        raise CalibrationError(
            f"vector length {p.shape[-1]} does not match {k} qubit factors"
        )
    batch = np.broadcast_shapes(p.shape[:-1], factors.shape[:-3])
    out = np.broadcast_to(p, batch + (2**k,)).reshape(batch + (2,) * k)
    nb = len(batch)
    for j in range(k):
        # Singleton axes align the factor with the other k-1 qubit axes.
        mat = np.broadcast_to(factors[..., j, :, :], batch + (2, 2)).reshape(
            batch + (1,) * (k - 1) + (2, 2)
        )
        out = np.moveaxis(out, nb + j, -1)
        out = np.einsum("...b,...ab->...a", out, mat)
        out = np.moveaxis(out, -1, nb + j)
    return out.reshape(batch + (2**k,))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Uses the sorted-cumulative-sum characterization: the projection is
    max(v + t, 0) where the shift t makes the positive part sum to one.
    Operates on the last axis and broadcasts over leading axes; idempotent.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("projection input must be finite")
    d = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    cumsum = np.cumsum(u, axis=-1)
    j = np.arange(1, d + 1)
    candidates = u + (1.0 - cumsum) / j
    rho = (candidates > 0).sum(axis=-1)
    shift = (1.0 - np.take_along_axis(cumsum, rho[..., None] - 1, axis=-1)) / rho[
        ..., None
    ]
    return np.maximum(v + shift, 0.0)


def qrem_correct(
    p_exp: np.ndarray, matrices: np.ndarray, project: bool = True
) -> np.ndarray:
    """Correct measured probability vectors for readout error.

    Applies the per-qubit calibration inverses factorwise (the dense
    2**k x 2**k inverse is never formed), then projects onto the simplex.

    Args:
        p_exp: measured vectors (..., 2**k) for k measured qubits.
        matrices: per-qubit calibration matrices (..., k, 2, 2) for those
            qubits, broadcastable against the batch shape of p_exp.
        project: skip the simplex projection when False (diagnostics only).

    Returns:
        Corrected vectors, entrywise >= 0 and summing to 1 when projected.
    """
    corrected = apply_factorwise(p_exp, invert_2x2(matrices))
    if project:
        corrected = project_to_simplex(corrected)
    return corrected
