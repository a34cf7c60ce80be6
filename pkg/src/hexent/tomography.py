"""Local quantum state tomography by linear inversion.

Full state tomography over a whole device needs exponentially many circuits,
so reconstruction happens per qubit pair plus neighbors (at most five qubits
on degree-3 hardware): 3**k local measurement settings, Pauli expectations
with identity positions obtained by marginalizing outcomes in post
processing, linear inversion, and projection to the nearest physical density
matrix under the Frobenius norm.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .density import DensityMatrix, as_matrix
from .pauli import (
    coefficients_to_matrix,
    matrix_to_coefficients,
    parity_transform_matrix,
    pauli_index,
    pauli_label,
)
from .qrem import project_to_simplex
from .stabilizer import CountsTable

MAX_SUBSET = 5


class TomographyError(ValueError):
    """Raised for incomplete or inconsistent tomography inputs."""


def tomography_settings(n_qubits: int) -> list[str]:
    """All 3**k local basis settings over {X, Y, Z}, lexicographic.

    Args:
        n_qubits: subset size k with 1 <= k <= 5.
    """
    if not 1 <= n_qubits <= MAX_SUBSET:
        raise TomographyError(f"subset size must be in 1..{MAX_SUBSET}, got {n_qubits}")
    return ["".join(s) for s in itertools.product("XYZ", repeat=n_qubits)]


@dataclass(frozen=True)
class TomographyDataset:
    """Complete set of 3**k counts tables for one qubit subset.

    ``qubits`` lists the measured qubits pair-first (the two qubits under
    test, then their neighbors); every table shares this qubit order and the
    same shot count.
    """

    qubits: tuple[int, ...]
    tables: tuple[CountsTable, ...]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        expected = tomography_settings(len(self.qubits))
        settings = [t.setting for t in self.tables]
        if settings != expected:
            missing = sorted(set(expected) - set(settings))
            raise TomographyError(
                f"dataset must hold all {len(expected)} settings in order; "
                f"missing {missing[:5]}"
            )
        shots = {t.shots for t in self.tables}
        if len(shots) != 1:
            raise TomographyError("all settings must use the same shot count")
        for t in self.tables:
            if t.qubits != self.qubits:
                raise TomographyError("all tables must share the dataset qubit order")

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def shots(self) -> int:
        return self.tables[0].shots

    @property
    def pair(self) -> tuple[int, int]:
        return self.qubits[0], self.qubits[1]

    def frequency_matrix(self) -> np.ndarray:
        """Outcome frequencies as an array (3**k, 2**k)."""
        return np.stack([t.probability_vector() for t in self.tables])

    def save_dir(self, directory, extra_manifest: dict | None = None) -> None:
        """One counts file per setting plus a manifest."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "qubits": list(self.qubits),
            "shots": self.shots,
            "settings": [t.setting for t in self.tables],
        }
        if extra_manifest:
            manifest.update(extra_manifest)
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
        for table in self.tables:
            table.save(directory / f"setting_{table.setting}.json")

    @classmethod
    def load_dir(cls, directory) -> "TomographyDataset":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        tables = tuple(
            CountsTable.load(directory / f"setting_{s}.json")
            for s in manifest["settings"]
        )
        return cls(tuple(manifest["qubits"]), tables)


class ExpectationKernel:
    """Precomputed linear maps from setting frequencies to Pauli expectations.

    For a setting's frequency vector, the parity transform yields estimates
    for every outcome-bit mask at once. A Pauli with identity positions pools
    the per-setting marginal estimates of all 3**(#I) compatible settings
    with equal weight.
    """

    _cache: dict[int, "ExpectationKernel"] = {}

    def __init__(self, n_qubits: int):
        k = n_qubits
        self.n_qubits = k
        self.settings = tomography_settings(k)
        self.parity = parity_transform_matrix(k)
        setting_index = {s: i for i, s in enumerate(self.settings)}
        rows, cols, vals = [], [], []
        for p in range(4**k):
            label = pauli_label(p, k)
            mask = int("".join("0" if c == "I" else "1" for c in label), 2)
            free = [i for i, c in enumerate(label) if c == "I"]
            weight = 1.0 / 3 ** len(free)
            for fill in itertools.product("XYZ", repeat=len(free)):
                chars = list(label)
                for pos, ch in zip(free, fill):
                    chars[pos] = ch
                s = setting_index["".join(chars)]
                rows.append(p)
                cols.append(s * 2**k + mask)
                vals.append(weight)
        self.pooling = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(4**k, len(self.settings) * 2**k)
        )

    @classmethod
    def for_qubits(cls, n_qubits: int) -> "ExpectationKernel":
        if n_qubits not in cls._cache:
            cls._cache[n_qubits] = cls(n_qubits)
        return cls._cache[n_qubits]

    def expectations(self, frequencies: np.ndarray) -> np.ndarray:
        """Pauli expectations (..., 4**k) from frequencies (..., 3**k, 2**k)."""
        freqs = np.asarray(frequencies, dtype=float)
        k = self.n_qubits
        n_settings = len(self.settings)
        if freqs.shape[-2:] != (n_settings, 2**k):
            raise TomographyError(
                f"expected frequencies shaped (..., {n_settings}, {2**k})"
            )
        parities = freqs @ self.parity.T
        batch = parities.shape[:-2]
        flat = parities.reshape(-1, n_settings * 2**k)
        out = self.pooling @ flat.T
        return np.ascontiguousarray(out.T).reshape(batch + (4**k,))


def estimate_pauli_expectations(dataset: TomographyDataset) -> dict[str, float]:
    """Empirical expectation of every k-qubit Pauli over {I, X, Y, Z}.

    The identity string maps to exactly 1; all values lie in [-1, 1].
    """
    kernel = ExpectationKernel.for_qubits(dataset.n_qubits)
    values = kernel.expectations(dataset.frequency_matrix())
    return {
        pauli_label(p, dataset.n_qubits): float(values[p])
        for p in range(4 ** dataset.n_qubits)
    }


def linear_inversion(expectations, n_qubits: int | None = None) -> np.ndarray:
    """Reconstruct the Hermitian trace-1 matrix matching Pauli expectations.

    Accepts either the expectation map produced by
    :func:`estimate_pauli_expectations` or an array (..., 4**k) ordered by
    base-4 Pauli index. The output may have negative eigenvalues; follow with
    :func:`nearest_physical_density_matrix`.
    """
    if isinstance(expectations, dict):
        labels = sorted(expectations, key=pauli_index)
        k = len(labels[0])
        if len(expectations) != 4**k:
            raise TomographyError(
                f"expected {4 ** k} expectations for {k} qubits, got {len(expectations)}"
            )
        coeffs = np.empty(4**k)
        for label, value in expectations.items():
            coeffs[pauli_index(label)] = value
    else:
        coeffs = np.asarray(expectations, dtype=float)
        k = n_qubits or int(round(np.log2(coeffs.shape[-1]) / 2))
        if coeffs.shape[-1] != 4**k:
            raise TomographyError("expectation array length must be a power of 4")
    return coefficients_to_matrix(coeffs, k)


def matrix_pauli_expectations(rho, n_qubits: int | None = None) -> dict[str, float]:
    """tr(rho P) for every Pauli P; inverse check for linear_inversion."""
    m = as_matrix(rho)
    k = n_qubits or int(round(np.log2(m.shape[-1])))
    coeffs = matrix_to_coefficients(m, k).real
    return {pauli_label(p, k): float(coeffs[..., p]) for p in range(4**k)}


def physical_spectrum(eigenvalues: np.ndarray) -> np.ndarray:
    """Project spectra (..., d) onto the probability simplex."""
    return project_to_simplex(eigenvalues)


def nearest_physical_density_matrix(rho, qubits=None):
    """Nearest density matrix (PSD, trace 1) in Frobenius distance.

    Diagonalizes the Hermitian input and projects its spectrum onto the
    probability simplex in the fixed eigenbasis, which attains the Frobenius
    optimum. Already-physical inputs are returned unchanged up to floating
    point roundoff.

    Args:
        rho: Hermitian trace-1 matrix, array (..., d, d) or DensityMatrix.
        qubits: optional labels; returns a DensityMatrix when given or when
            the input is one.

    Returns:
        Array of the same shape (or a labeled DensityMatrix).
    """
    if isinstance(rho, DensityMatrix) and qubits is None:
        qubits = rho.qubits
    m = as_matrix(rho)
    vals, vecs = np.linalg.eigh(m)
    vals = physical_spectrum(vals)
    out = np.einsum("...ij,...j,...kj->...ik", vecs, vals, vecs.conj())
    if qubits is not None:
        return DensityMatrix(out, tuple(qubits))
    return out


def reconstruct_density_matrix(
    dataset: TomographyDataset, frequencies: np.ndarray | None = None
) -> DensityMatrix:
    """Full dataset-to-physical-state reconstruction for one subset.

    Optionally reconstructs from externally corrected frequency vectors
    (e.g. after readout-error mitigation) instead of the raw tables.
    """
    kernel = ExpectationKernel.for_qubits(dataset.n_qubits)
    freqs = dataset.frequency_matrix() if frequencies is None else frequencies
    coeffs = kernel.expectations(freqs)
    rho = linear_inversion(coeffs, dataset.n_qubits)
    return nearest_physical_density_matrix(rho, qubits=dataset.qubits)
