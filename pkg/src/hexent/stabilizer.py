"""Stabilizer-tableau backend for native-graph-state experiments.

The simulator has two sampling paths that produce identically distributed
outcomes:

* a literal per-shot path that builds a noisy tableau, rotates measurement
  bases and samples qubit-by-qubit with the standard tableau measurement
  update, and
* a vectorized path that samples ideal outcomes from the exact Born
  distribution of the measured subset and XORs in per-shot flip masks
  obtained by propagating the sampled Pauli gate errors through the
  remaining Clifford layers (conjugation acts linearly on symplectic bits,
  and only the X component on a measured qubit flips its outcome).

Conventions: qubit index 0 is the leftmost character of every outcome
bitstring; X is measured by applying H before a Z measurement and Y by
applying S-dagger then H.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density import DensityMatrix
from .pauli import (
    bits_from_int,
    bitstring,
    coefficients_to_matrix,
    int_from_bits,
    multiply_paulis,
    symplectic_to_index,
)
from .topology import CzSchedule, DeviceTopology

BASIS_CHARS = "XYZ"

# Single-qubit basis-change unitaries applied before a Z measurement.
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
_ROTATIONS = {"X": _H, "Y": _H @ _SDG, "Z": np.eye(2, dtype=complex)}


class SimulationError(ValueError):
    """Raised for invalid simulation inputs."""


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class NoiseModel:
    """Uncorrelated noise description for a device.

    Attributes:
        p10: per-qubit probability of reading 1 when the ideal outcome is 0.
        p01: per-qubit probability of reading 0 when the ideal outcome is 1.
        depolarizing_1q: probability of a uniform single-qubit Pauli error
            after each single-qubit gate.
        depolarizing_2q: probability of a uniform two-qubit Pauli error after
            each CZ gate.
    """

    p10: np.ndarray
    p01: np.ndarray
    depolarizing_1q: float = 0.0
    depolarizing_2q: float = 0.0

    def __post_init__(self):
        p10 = np.atleast_1d(np.asarray(self.p10, dtype=float))
        p01 = np.atleast_1d(np.asarray(self.p01, dtype=float))
        if p10.shape != p01.shape:
            raise SimulationError("p10 and p01 must have the same length")
        for name, arr in (("p10", p10), ("p01", p01)):
            if np.any((arr < 0) | (arr > 1)):
                raise SimulationError(f"{name} entries must lie in [0, 1]")
        for name, val in (
            ("depolarizing_1q", self.depolarizing_1q),
            ("depolarizing_2q", self.depolarizing_2q),
        ):
            if not 0.0 <= val <= 1.0:
                raise SimulationError(f"{name} must lie in [0, 1]")
        p10.setflags(write=False)
        p01.setflags(write=False)
        object.__setattr__(self, "p10", p10)
        object.__setattr__(self, "p01", p01)

    @property
    def n_qubits(self) -> int:
        return len(self.p10)

    @property
    def has_gate_noise(self) -> bool:
        return self.depolarizing_1q > 0 or self.depolarizing_2q > 0

    @property
    def has_readout_noise(self) -> bool:
        return bool(np.any(self.p10 > 0) or np.any(self.p01 > 0))

    @classmethod
    def noiseless(cls, n_qubits: int) -> "NoiseModel":
        return cls(np.zeros(n_qubits), np.zeros(n_qubits))

    @classmethod
    def uniform(
        cls, n_qubits: int, readout: float = 0.0, p1: float = 0.0, p2: float = 0.0
    ) -> "NoiseModel":
        """Same symmetric readout error rate on every qubit."""
        r = np.full(n_qubits, float(readout))
        return cls(r, r.copy(), depolarizing_1q=p1, depolarizing_2q=p2)

    def to_dict(self) -> dict:
        return {
            "p10": self.p10.tolist(),
            "p01": self.p01.tolist(),
            "depolarizing_1q": self.depolarizing_1q,
            "depolarizing_2q": self.depolarizing_2q,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseModel":
        return cls(
            np.asarray(doc["p10"], dtype=float),
            np.asarray(doc["p01"], dtype=float),
            depolarizing_1q=float(doc.get("depolarizing_1q", 0.0)),
            depolarizing_2q=float(doc.get("depolarizing_2q", 0.0)),
        )


@dataclass(frozen=True)
class CountsTable:
    """Measured-outcome histogram for one basis setting.

    ``setting`` holds one character from {X, Y, Z} per measured qubit and
    ``counts`` maps outcome bitstrings (qubit order = ``qubits`` order,
    first qubit leftmost) to non-negative counts summing to ``shots``.
    """

    setting: str
    qubits: tuple[int, ...]
    shots: int
    counts: dict[str, int]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.setting) != len(self.qubits):
            raise SimulationError("setting length must match number of qubits")
        if any(c not in BASIS_CHARS for c in self.setting):
            raise SimulationError(f"invalid basis symbol in setting {self.setting!r}")
        if self.shots < 1:
            raise SimulationError("shots must be >= 1")
        total = 0
        for key, value in self.counts.items():
            if len(key) != len(self.qubits) or set(key) - {"0", "1"}:
                raise SimulationError(f"malformed outcome bitstring {key!r}")
            if value < 0:
                raise SimulationError("counts must be non-negative")
            total += value
        if total != self.shots:
            raise SimulationError(
                f"counts sum to {total}, expected shots={self.shots}"
            )

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def probability_vector(self) -> np.ndarray:
        """Empirical outcome distribution as a length 2**k vector."""
        k = self.n_qubits
        if k > 16:
            raise SimulationError("probability_vector limited to 16 qubits")
        vec = np.zeros(2**k)
        for key, value in self.counts.items():
            vec[int(key, 2)] = value / self.shots
        return vec

    def marginal(self, positions: tuple[int, ...]) -> "CountsTable":
        """Collapse the table onto a subset of qubit positions."""
        agg: dict[str, int] = {}
        for key, value in self.counts.items():
            sub = "".join(key[p] for p in positions)
            agg[sub] = agg.get(sub, 0) + value
        return CountsTable(
            setting="".join(self.setting[p] for p in positions),
            qubits=tuple(self.qubits[p] for p in positions),
            shots=self.shots,
            counts=agg,
        )

    def one_fractions(self) -> np.ndarray:
        """Per-qubit fraction of shots that read 1."""
        totals = np.zeros(self.n_qubits)
        for key, value in self.counts.items():
            if value:
                bits = np.frombuffer(key.encode(), dtype=np.uint8).astype(np.float64)
                totals += value * (bits - 48.0)  # ASCII '0' is 48
        return totals / self.shots

    @classmethod
    def from_outcomes(
        cls, setting: str, qubits, outcomes: np.ndarray
    ) -> "CountsTable":
        """Build a table from an integer outcome index per shot."""
        values, freq = np.unique(np.asarray(outcomes), return_counts=True)
        k = len(setting)
        counts = {
            bitstring(bits_from_int(int(v), k)): int(c)
            for v, c in zip(values, freq)
        }
        return cls(setting, tuple(qubits), int(freq.sum()), counts)

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "qubits": list(self.qubits),
            "shots": self.shots,
            "counts": dict(sorted(self.counts.items())),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CountsTable":
        return cls(
            setting=str(doc["setting"]),
            qubits=tuple(doc["qubits"]),
            shots=int(doc["shots"]),
            counts={str(k): int(v) for k, v in doc["counts"].items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "CountsTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


class StabilizerState:
    """Aaronson-Gottesman tableau with destabilizers.

    Rows 0..n-1 hold destabilizers, rows n..2n-1 stabilizers. Phases are
    tracked modulo 4 (0 means +1, 2 means -1); Clifford gates keep stabilizer
    phases even.
    """

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise SimulationError("n_qubits must be positive")
        self.n = n_qubits
        self.x = np.zeros((2 * n_qubits, n_qubits), dtype=np.uint8)
        self.z = np.zeros((2 * n_qubits, n_qubits), dtype=np.uint8)
        self.r = np.zeros(2 * n_qubits, dtype=np.uint8)
        idx = np.arange(n_qubits)
        self.x[idx, idx] = 1
        self.z[n_qubits + idx, idx] = 1

    def copy(self) -> "StabilizerState":
        out = StabilizerState.__new__(StabilizerState)
        out.n = self.n
        out.x = self.x.copy()
        out.z = self.z.copy()
        out.r = self.r.copy()
        return out

    # -- gates ------------------------------------------------------------

    def h(self, q: int) -> None:
        self.r = (self.r + 2 * self.x[:, q] * self.z[:, q]) % 4
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q: int) -> None:
        self.r = (self.r + 2 * self.x[:, q] * self.z[:, q]) % 4
        self.z[:, q] ^= self.x[:, q]

    def sdg(self, q: int) -> None:
        self.s(q)
        self.s(q)
        self.s(q)

    def cnot(self, control: int, target: int) -> None:
        xc, zc = self.x[:, control], self.z[:, control]
        xt, zt = self.x[:, target], self.z[:, target]
        self.r = (self.r + 2 * xc * zt * (xt ^ zc ^ 1)) % 4
        self.x[:, target] ^= xc
        self.z[:, control] ^= zt

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cnot(a, b)
        self.h(b)

    def apply_pauli(self, q: int, pauli: str) -> None:
        """Apply X, Y or Z; only stabilizer signs change."""
        if pauli == "X":
            self.r = (self.r + 2 * self.z[:, q]) % 4
        elif pauli == "Z":
            self.r = (self.r + 2 * self.x[:, q]) % 4
        elif pauli == "Y":
            self.r = (self.r + 2 * (self.x[:, q] ^ self.z[:, q])) % 4
        elif pauli != "I":
            raise SimulationError(f"unknown Pauli {pauli!r}")

    # -- measurement ------------------------------------------------------

    def _rowsum(self, h: int, i: int) -> None:
        g = _phase_products(self.x[i], self.z[i], self.x[h], self.z[h])
        self.r[h] = (int(self.r[h]) + int(self.r[i]) + int(g)) % 4
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def measure(self, q: int, rng=None) -> int:
        """Measure qubit q in the Z basis, collapsing the state."""
        rng = _as_rng(rng)
        n = self.n
        stab_rows = np.nonzero(self.x[n:, q])[0]
        if stab_rows.size:
            p = n + int(stab_rows[0])
            for i in range(2 * n):
                if i != p and self.x[i, q]:
                    self._rowsum(i, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            outcome = int(rng.integers(0, 2))
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, q] = 1
            self.r[p] = 2 * outcome
            return outcome
        # Deterministic outcome: accumulate the implied stabilizer phase.
        xs = np.zeros(self.n, dtype=np.uint8)
        zs = np.zeros(self.n, dtype=np.uint8)
        phase = 0
        for j in np.nonzero(self.x[:n, q])[0]:
            row = n + int(j)
            phase = (
                phase + int(self.r[row]) + int(_phase_products(xs, zs, self.x[row], self.z[row]))
            ) % 4
            xs ^= self.x[row]
            zs ^= self.z[row]
        return 1 if phase == 2 else 0

    # -- introspection ----------------------------------------------------

    def stabilizer_bits(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x, z, sign) arrays of the n stabilizer generators."""
        n = self.n
        signs = np.where(self.r[n:] % 4 == 0, 1, -1)
        if np.any(self.r[n:] % 2):
            raise SimulationError("stabilizer phases must be +-1")
        return self.x[n:].copy(), self.z[n:].copy(), signs

    def validate(self) -> None:
        """Check tableau rank and commutation structure (test helper)."""
        m = np.concatenate([self.x, self.z], axis=1)
        if _gf2_rank(m) != 2 * self.n:
            raise SimulationError("tableau lost full rank")
        xs, zs, _ = self.stabilizer_bits()
        sym = (xs @ zs.T + zs @ xs.T) % 2
        if np.any(sym):
            raise SimulationError("stabilizer generators do not commute")


def _phase_products(x1, z1, x2, z2) -> int:
    """Sum of Aaronson-Gottesman g-exponents over qubits, mod 4."""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    g = np.zeros_like(x1)
    both = (x1 == 1) & (z1 == 1)
    g = np.where(both, z2 - x2, g)
    xonly = (x1 == 1) & (z1 == 0)
    g = np.where(xonly, z2 * (2 * x2 - 1), g)
    zonly = (x1 == 0) & (z1 == 1)
    g = np.where(zonly, x2 * (1 - 2 * z2), g)
    return int(g.sum()) % 4


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        pivots = np.nonzero(m[rank:, c])[0]
        if pivots.size == 0:
            continue
        p = rank + int(pivots[0])
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        hits = np.nonzero(m[:, c])[0]
        for rr in hits:
            if rr != rank:
                m[rr] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _gf2_nullspace(m: np.ndarray) -> np.ndarray:
    """Basis of {v : m @ v = 0 (mod 2)} as rows of a uint8 array."""
    m = m.copy() % 2
    rows, cols = m.shape
    pivot_col_of_row: list[int] = []
    rank = 0
    for c in range(cols):
        pivots = np.nonzero(m[rank:, c])[0]
        if pivots.size == 0:
            continue
        p = rank + int(pivots[0])
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        for rr in np.nonzero(m[:, c])[0]:
            if rr != rank:
                m[rr] ^= m[rank]
        pivot_col_of_row.append(c)
        rank += 1
        if rank == rows:
            break
    pivot_cols = set(pivot_col_of_row)
    free_cols = [c for c in range(cols) if c not in pivot_cols]
    basis = np.zeros((len(free_cols), cols), dtype=np.uint8)
    for i, fc in enumerate(free_cols):
        basis[i, fc] = 1
        for row, pc in enumerate(pivot_col_of_row):
            if m[row, fc]:
                basis[i, pc] = 1
    return basis


def prepare_graph_state(
    topology: DeviceTopology,
    schedule: CzSchedule,
    noise: NoiseModel | None = None,
    rng=None,
) -> StabilizerState:
    """Prepare one (possibly noisy) instance of the native graph state.

    All qubits start in |0>, a Hadamard layer produces |+>^n, then the CZ
    layers of the schedule entangle the device. With a noise model, a
    single-qubit depolarizing Pauli is sampled after the Hadamard layer for
    every qubit and a two-qubit depolarizing Pauli after every CZ gate, so
    each call returns one sampled noise realization.

    Raises:
        SimulationError: if the schedule does not cover the topology.
    """
    if not schedule.covers(topology):
        raise SimulationError("schedule does not match topology edge set")
    rng = _as_rng(rng)
    state = StabilizerState(topology.n_qubits)
    for q in range(topology.n_qubits):
        state.h(q)
    if noise is not None and noise.depolarizing_1q > 0:
        _apply_depolarizing_1q(state, range(topology.n_qubits), noise.depolarizing_1q, rng)
    for layer in schedule.layers:
        for a, b in layer:
            state.cz(a, b)
        if noise is not None and noise.depolarizing_2q > 0:
            for a, b in layer:
                _apply_depolarizing_2q(state, a, b, noise.depolarizing_2q, rng)
    return state


_PAULIS_1Q = ("X", "Y", "Z")
_PAULIS_2Q = [
    (a, b) for a in ("I", "X", "Y", "Z") for b in ("I", "X", "Y", "Z")
][1:]


def _apply_depolarizing_1q(state, qubits, p, rng) -> None:
    for q in qubits:
        if rng.random() < p:
            state.apply_pauli(q, _PAULIS_1Q[rng.integers(0, 3)])


def _apply_depolarizing_2q(state, a, b, p, rng) -> None:
    if rng.random() < p:
        pa, pb = _PAULIS_2Q[rng.integers(0, 15)]
        state.apply_pauli(a, pa)
        state.apply_pauli(b, pb)


def reduced_density_matrix(state: StabilizerState, subset) -> DensityMatrix:
    """Exact reduced density matrix of a stabilizer state on ``subset``.

    Averages the stabilizer group over the complement: the reduced state is
    2**-k times the signed sum of all group elements supported entirely
    within the subset. The subset order fixes the tensor order of the result.

    Args:
        state: stabilizer state on n qubits.
        subset: up to 10 distinct qubit indices.

    Returns:
        DensityMatrix labeled by the subset qubits.
    """
    subset = tuple(int(q) for q in subset)
    if len(set(subset)) != len(subset):
        raise SimulationError("subset qubits must be distinct")
    if not all(0 <= q < state.n for q in subset):
        raise SimulationError("subset qubit out of range")
    k = len(subset)
    if k > 10:
        raise SimulationError("reduced density matrix limited to 10 qubits")

    xs, zs, signs = state.stabilizer_bits()
    exponents = np.where(signs == 1, 0, 2).astype(np.int64)
    outside = [q for q in range(state.n) if q not in subset]
    if outside:
        constraint = np.concatenate([xs[:, outside], zs[:, outside]], axis=1)
        combos = _gf2_nullspace(constraint.T)
    else:
        combos = np.eye(state.n, dtype=np.uint8)

    # Compose each independent in-subset element with phase tracking.
    basis_x, basis_z, basis_e = [], [], []
    for combo in combos:
        cx = np.zeros(state.n, dtype=np.uint8)
        cz_ = np.zeros(state.n, dtype=np.uint8)
        ce = 0
        for row in np.nonzero(combo)[0]:
            cx, cz_, ce = multiply_paulis(cx, cz_, ce, xs[row], zs[row], exponents[row])
        if outside and (cx[outside].any() or cz_[outside].any()):
            raise SimulationError("internal error: restricted element has support outside subset")
        basis_x.append(cx[list(subset)])
        basis_z.append(cz_[list(subset)])
        basis_e.append(int(ce))

    # Enumerate the full restricted subgroup by doubling.
    gx = np.zeros((1, k), dtype=np.uint8)
    gz = np.zeros((1, k), dtype=np.uint8)
    ge = np.zeros(1, dtype=np.int64)
    for bx, bz, be in zip(basis_x, basis_z, basis_e):
        nx, nz, ne = multiply_paulis(
            np.broadcast_to(bx, gx.shape), np.broadcast_to(bz, gz.shape), be, gx, gz, ge
        )
        gx = np.concatenate([gx, nx])
        gz = np.concatenate([gz, nz])
        ge = np.concatenate([ge, ne])
    if np.any(ge % 2):
        raise SimulationError("internal error: non-Hermitian group element")

    coeffs = np.zeros(4**k)
    coeffs[symplectic_to_index(gx, gz)] = np.where(ge % 4 == 0, 1.0, -1.0)
    rho = coefficients_to_matrix(coeffs, k)
    return DensityMatrix(rho, subset)


def _rotation_unitary(setting: str) -> np.ndarray:
    out = _ROTATIONS[setting[0]]
    for ch in setting[1:]:
        out = np.kron(out, _ROTATIONS[ch])
    return out


def born_probabilities(
    topology: DeviceTopology,
    schedule: CzSchedule,
    qubits,
    setting: str,
) -> np.ndarray:
    """Exact noiseless outcome distribution of a subset measurement."""
    state = prepare_graph_state(topology, schedule)
    rho = reduced_density_matrix(state, qubits).matrix
    u = _rotation_unitary(setting)
    probs = np.real(np.diag(u @ rho @ u.conj().T))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _validate_measurement_args(topology, qubits, setting, shots, noise=None):
    qubits = tuple(int(q) for q in qubits)
    if len(set(qubits)) != len(qubits):
        raise SimulationError("measured qubits must be distinct")
    if not all(0 <= q < topology.n_qubits for q in qubits):
        raise SimulationError("measured qubit out of range")
    if len(setting) != len(qubits):
        raise SimulationError("setting length must match measured qubits")
    if any(c not in BASIS_CHARS for c in setting):
        raise SimulationError(f"invalid basis symbol in {setting!r}")
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    if noise is not None and noise.n_qubits != topology.n_qubits:
        raise SimulationError("noise model size does not match topology")
    return qubits


def _apply_readout_flips(bits: np.ndarray, qubits, noise: NoiseModel, rng) -> np.ndarray:
    p10 = noise.p10[list(qubits)]
    p01 = noise.p01[list(qubits)]
    u = rng.random(bits.shape)
    flip = np.where(bits == 0, u < p10, u < p01)
    return bits ^ flip.astype(np.uint8)


def _draw_pauli_bits_1q(shots: int, p: float, rng):
    """Per-shot (x, z) bits of a depolarizing single-qubit error draw."""
    occur = rng.random(shots) < p
    kind = rng.integers(0, 3, shots)  # 0: X, 1: Y, 2: Z
    x = (occur & (kind <= 1)).astype(np.uint8)
    z = (occur & (kind >= 1)).astype(np.uint8)
    return x, z


def _propagated_flip_masks(
    topology: DeviceTopology,
    schedule: CzSchedule,
    qubits,
    setting: str,
    shots: int,
    noise: NoiseModel,
    rng,
) -> np.ndarray:
    """X-bit flip masks on the measured qubits from propagated gate errors."""
    n = topology.n_qubits
    ex = np.zeros((shots, n), dtype=np.uint8)
    ez = np.zeros((shots, n), dtype=np.uint8)
    p1 = noise.depolarizing_1q
    p2 = noise.depolarizing_2q

    if p1 > 0:
        for q in range(n):
            x, z = _draw_pauli_bits_1q(shots, p1, rng)
            ex[:, q] ^= x
            ez[:, q] ^= z

    for layer in schedule.layers:
        # Conjugate the accumulated error through this CZ layer (CZ leaves X
        # bits unchanged, so in-place column updates are order-independent).
        for a, b in layer:
            ez[:, a] ^= ex[:, b]
            ez[:, b] ^= ex[:, a]
        if p2 > 0:
            for a, b in layer:
                occur = rng.random(shots) < p2
                kind = rng.integers(1, 16, shots)
                pa, pb = kind >> 2, kind & 3
                # Pauli code 0:I 1:X 2:Y 3:Z -> x bit for {1, 2}, z for {2, 3}
                ex[:, a] ^= (occur & ((pa == 1) | (pa == 2))).astype(np.uint8)
                ez[:, a] ^= (occur & (pa >= 2)).astype(np.uint8)
                ex[:, b] ^= (occur & ((pb == 1) | (pb == 2))).astype(np.uint8)
                ez[:, b] ^= (occur & (pb >= 2)).astype(np.uint8)

    rotated = []
    for q, ch in zip(qubits, setting):
        if ch == "X":
            ex[:, q], ez[:, q] = ez[:, q].copy(), ex[:, q].copy()
            rotated.append(q)
        elif ch == "Y":
            ez[:, q] ^= ex[:, q]
            ex[:, q], ez[:, q] = ez[:, q].copy(), ex[:, q].copy()
            rotated.append(q)
    if p1 > 0:
        for q in rotated:
            x, z = _draw_pauli_bits_1q(shots, p1, rng)
            ex[:, q] ^= x
            ez[:, q] ^= z

    return ex[:, list(qubits)]


def sample_counts(
    topology: DeviceTopology,
    schedule: CzSchedule,
    qubits,
    setting: str,
    shots: int,
    noise: NoiseModel | None = None,
    rng=None,
    method: str = "fast",
) -> CountsTable:
    """Sample measurement outcomes of a graph-state subset measurement.

    Each shot prepares a fresh noisy graph state, rotates the measured
    qubits into the requested local bases, measures them in Z and finally
    applies independent per-qubit readout flips.

    Args:
        topology, schedule: device and CZ layering (schedule must cover).
        qubits: measured qubit indices; outcome string order follows them.
        setting: one of X/Y/Z per measured qubit.
        shots: number of repetitions (>= 1).
        noise: optional NoiseModel; None means ideal.
        rng: seed or numpy Generator.
        method: "fast" for the vectorized sampler, "tableau" for the literal
            per-shot tableau reference path.

    Returns:
        CountsTable whose counts sum to ``shots``.
    """
    qubits = _validate_measurement_args(topology, qubits, setting, shots, noise)
    rng = _as_rng(rng)
    if method == "tableau":
        return _sample_counts_tableau(
            topology, schedule, qubits, setting, shots, noise, rng
        )
    if method != "fast":
        raise SimulationError(f"unknown sampling method {method!r}")

    probs = born_probabilities(topology, schedule, qubits, setting)
    k = len(qubits)
    outcomes = rng.choice(2**k, size=shots, p=probs)
    bits = bits_from_int(outcomes, k)
    if noise is not None and noise.has_gate_noise:
        bits ^= _propagated_flip_masks(
            topology, schedule, qubits, setting, shots, noise, rng
        )
    if noise is not None and noise.has_readout_noise:
        bits = _apply_readout_flips(bits, qubits, noise, rng)
    return CountsTable.from_outcomes(setting, qubits, int_from_bits(bits))


def _sample_counts_tableau(
    topology, schedule, qubits, setting, shots, noise, rng
) -> CountsTable:
    outcomes = np.zeros(shots, dtype=np.int64)
    for shot in range(shots):
        state = prepare_graph_state(topology, schedule, noise, rng)
        rotated = []
        for q, ch in zip(qubits, setting):
            if ch == "X":
                state.h(q)
                rotated.append(q)
            elif ch == "Y":
                state.sdg(q)
                state.h(q)
                rotated.append(q)
        if noise is not None and noise.depolarizing_1q > 0:
            _apply_depolarizing_1q(state, rotated, noise.depolarizing_1q, rng)
        bits = np.array([state.measure(q, rng) for q in qubits], dtype=np.uint8)
        if noise is not None and noise.has_readout_noise:
            bits = _apply_readout_flips(bits[None, :], qubits, noise, rng)[0]
        outcomes[shot] = int_from_bits(bits)
    return CountsTable.from_outcomes(setting, qubits, outcomes)


def run_calibration_circuits(
    prepared_bitstring: str,
    shots: int,
    noise: NoiseModel | None = None,
    rng=None,
) -> CountsTable:
    """Measure a computational-basis preparation with readout noise only.

    Every qubit is prepared in the stated 0/1 state and read out; the two
    standard calibration circuits are the all-zeros and all-ones strings.
    """
    if set(prepared_bitstring) - {"0", "1"}:
        raise SimulationError("prepared bitstring must contain only 0/1")
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    n = len(prepared_bitstring)
    rng = _as_rng(rng)
    base = np.frombuffer(prepared_bitstring.encode(), dtype=np.uint8) - 48
    bits = np.broadcast_to(base.astype(np.uint8), (shots, n)).copy()
    qubits = tuple(range(n))
    if noise is not None and noise.has_readout_noise:
        if noise.n_qubits != n:
            raise SimulationError("noise model size does not match bitstring")
        bits = _apply_readout_flips(bits, qubits, noise, rng)
    # Aggregate via strings to support wide devices (n may exceed 63).
    counts: dict[str, int] = {}
    for row in bits:
        key = bitstring(row)
        counts[key] = counts.get(key, 0) + 1
    return CountsTable("Z" * n, qubits, shots, counts)


class GraphStateSampler:
    """Caches the ideal graph state so repeated subset samples stay cheap."""

    def __init__(self, topology: DeviceTopology, schedule: CzSchedule):
        if not schedule.covers(topology):
            raise SimulationError("schedule does not match topology edge set")
        self.topology = topology
        self.schedule = schedule
        self._state = prepare_graph_state(topology, schedule)
        self._rho_cache: dict[tuple[int, ...], np.ndarray] = {}

    def reduced_state(self, qubits) -> np.ndarray:
        key = tuple(int(q) for q in qubits)
        if key not in self._rho_cache:
            self._rho_cache[key] = reduced_density_matrix(self._state, key).matrix
        return self._rho_cache[key]

    def counts(
        self, qubits, setting: str, shots: int, noise: NoiseModel | None, rng
    ) -> CountsTable:
        qubits = _validate_measurement_args(self.topology, qubits, setting, shots, noise)
        rng = _as_rng(rng)
        rho = self.reduced_state(qubits)
        u = _rotation_unitary(setting)
        probs = np.clip(np.real(np.diag(u @ rho @ u.conj().T)), 0.0, None)
        probs /= probs.sum()
        k = len(qubits)
        outcomes = rng.choice(2**k, size=shots, p=probs)
        bits = bits_from_int(outcomes, k)
        if noise is not None and noise.has_gate_noise:
            bits ^= _propagated_flip_masks(
                self.topology, self.schedule, qubits, setting, shots, noise, rng
            )
        if noise is not None and noise.has_readout_noise:
            bits = _apply_readout_flips(bits, qubits, noise, rng)
        return CountsTable.from_outcomes(setting, qubits, int_from_bits(bits))
