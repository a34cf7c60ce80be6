"""Shared Pauli-algebra kernels.

Conventions used throughout the package:

* Qubit order in multi-qubit labels, bitstrings and Kronecker products is
  left-to-right, i.e. the first qubit of a subset is the leftmost character
  and the most significant bit of any integer index.
* Pauli labels use the alphabet ``IXYZ``; a k-character label maps to an
  integer index by reading it as a base-4 number with I=0, X=1, Y=2, Z=3.
"""

from __future__ import annotations

import numpy as np

PAULI_CHARS = "IXYZ"

# Single-qubit Pauli matrices indexed I, X, Y, Z.
SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# Phase exponents for single-qubit Pauli products: sigma_a sigma_b equals
# i**PHASE_EXPONENT[a, b] times the Pauli with XOR-ed symplectic bits.
# Symplectic encoding used for the table: index 2*x + z (I=0, Z=1, X=2, Y=3).
_PHASE_EXPONENT = np.zeros((4, 4), dtype=np.int64)
_PHASE_EXPONENT[2, 3] = 1  # X*Y = iZ
_PHASE_EXPONENT[3, 2] = 3  # Y*X = -iZ
_PHASE_EXPONENT[3, 1] = 1  # Y*Z = iX
_PHASE_EXPONENT[1, 3] = 3  # Z*Y = -iX
_PHASE_EXPONENT[1, 2] = 1  # Z*X = iY
_PHASE_EXPONENT[2, 1] = 3  # X*Z = -iY


def pauli_index(label: str) -> int:
    """Base-4 integer index of a Pauli label such as ``"XIZ"``."""
    idx = 0
    for ch in label:
        idx = 4 * idx + PAULI_CHARS.index(ch)
    return idx


def pauli_label(index: int, n_qubits: int) -> str:
    """Inverse of :func:`pauli_index`."""
    chars = []
    for _ in range(n_qubits):
        chars.append(PAULI_CHARS[index & 3])
        index >>= 2
    return "".join(reversed(chars))


def pauli_matrix(label: str) -> np.ndarray:
    """Dense matrix of a multi-qubit Pauli label (first character = MSB)."""
    out = SIGMA[PAULI_CHARS.index(label[0])]
    for ch in label[1:]:
        out = np.kron(out, SIGMA[PAULI_CHARS.index(ch)])
    return out


def multiply_paulis(x1, z1, e1, x2, z2, e2):
    """Multiply Pauli operators given as symplectic bit arrays.

    Args:
        x1, z1: uint8 arrays (..., n) of X/Z bits of the left factor.
        e1: integer array (...) with the left factor's phase exponent
            (the operator is ``i**e1 * P``).
        x2, z2, e2: same for the right factor.

    Returns:
        (x, z, e): bits and phase exponent (mod 4) of the product.
    """
    a = (2 * x1 + z1).astype(np.int64)
    b = (2 * x2 + z2).astype(np.int64)
    phase = _PHASE_EXPONENT[a, b].sum(axis=-1)
    e = (np.asarray(e1) + np.asarray(e2) + phase) % 4
    return x1 ^ x2, z1 ^ z2, e


def symplectic_to_index(x, z):
    """Base-4 Pauli indices from X/Z bit arrays of shape (..., k)."""
    code = np.where(x & z, 2, np.where(x, 1, np.where(z, 3, 0)))
    k = code.shape[-1]
    weights = 4 ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return (code * weights).sum(axis=-1)


def coefficients_to_matrix(coeffs: np.ndarray, n_qubits: int) -> np.ndarray:
    """Reconstruct density matrices from Pauli expectation coefficients.

    Computes ``2**-k * sum_P c_P P`` for every leading batch index.

    Args:
        coeffs: real array (..., 4**k) of expectation values, indexed by
            base-4 Pauli index.
        n_qubits: number of qubits k.

    Returns:
        complex array (..., 2**k, 2**k).
    """
    k = n_qubits
    coeffs = np.asarray(coeffs)
    batch = coeffs.shape[:-1]
    t = coeffs.reshape(batch + (4,) * k).astype(complex)
    nb = len(batch)
    for _ in range(k):
        # Contract the leading remaining Pauli axis; appends (row, col) axes.
        t = np.tensordot(t, SIGMA, axes=(nb, 0))
    perm = list(range(nb))
    perm += [nb + 2 * i for i in range(k)]
    perm += [nb + 2 * i + 1 for i in range(k)]
    t = t.transpose(perm).reshape(batch + (2**k, 2**k))
    return t / 2**k


def matrix_to_coefficients(rho: np.ndarray, n_qubits: int) -> np.ndarray:
    """Pauli expectations ``tr(rho P)`` for all 4**k Paulis (adjoint of
    :func:`coefficients_to_matrix` up to the 2**-k factor)."""
    k = n_qubits
    rho = np.asarray(rho)
    batch = rho.shape[:-2]
    t = rho.reshape(batch + (2,) * (2 * k))
    nb = len(batch)
    # Interleave row/col axes per qubit so each contraction consumes one pair.
    perm = list(range(nb))
    for i in range(k):
        perm += [nb + i, nb + k + i]
    t = t.transpose(perm)
    for _ in range(k):
        # tr(rho P) contracts rho[..., r, c] with sigma[p, c, r].
        t = np.tensordot(t, SIGMA, axes=((nb, nb + 1), (2, 1)))
    return t.reshape(batch + (4**k,))


def parity_transform_matrix(n_bits: int) -> np.ndarray:
    """Matrix M with M[t, m] = (-1)**popcount(t & m), for parity estimates.

    Applying it to an outcome-frequency vector yields, for every bit mask t,
    the expectation of the parity of the masked outcome bits.
    """
    idx = np.arange(2**n_bits, dtype=np.uint64)
    pops = np.bitwise_count(idx[:, None] & idx[None, :]).astype(np.int64)
    return np.where(pops % 2 == 0, 1.0, -1.0)


def bits_from_int(values: np.ndarray, n_bits: int) -> np.ndarray:
    """Bit array (..., n_bits) from integers, most significant bit first."""
    values = np.asarray(values)
    shifts = np.arange(n_bits - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def int_from_bits(bits: np.ndarray) -> np.ndarray:
    """Integers from bit arrays (..., n_bits), most significant bit first."""
    bits = np.asarray(bits)
    n = bits.shape[-1]
    weights = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def bitstring(bits) -> str:
    """Render a bit sequence as a string, qubit 0 leftmost."""
    return "".join("1" if b else "0" for b in bits)
