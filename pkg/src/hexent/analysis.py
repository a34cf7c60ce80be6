"""Entanglement certification per qubit pair and device-wide assembly.

Two qubits of a mixed state are entangled iff the partial transpose of their
joint density matrix has a negative eigenvalue; the negativity sums the
magnitudes of those negative eigenvalues and ranges from 0 (separable) to
0.5 (maximally entangled). Because tracing out graph-state neighbors without
projecting them can leave the pair maximally mixed, the neighbors are
projected onto every Z-basis outcome combination and the highest resulting
negativity represents the pair. Pairs whose confidence interval excludes
zero become edges of the entanglement graph; a connected component covering
every qubit certifies whole-device bipartite entanglement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import as_matrix
from .pauli import bits_from_int, bitstring
from .topology import DeviceTopology, Edge

PROJECTION_PROBABILITY_CUTOFF = 1e-6
NEGATIVITY_MAX = 0.5
# Partial-transpose eigenvalues this close to zero are floating-point noise,
# not entanglement.
EIGENVALUE_TOLERANCE = 1e-10


class AnalysisError(ValueError):
    """Raised for malformed analysis inputs."""


def partial_transpose(rho) -> np.ndarray:
    """Partial transpose of two-qubit density matrices on the second qubit.

    Accepts stacked input (..., 4, 4); Hermitian, trace preserving, and an
    involution.
    """
    m = as_matrix(rho)
    if m.shape[-2:] != (4, 4):
        raise AnalysisError(f"expected (..., 4, 4) matrices, got {m.shape}")
    batch = m.shape[:-2]
    t = m.reshape(batch + (2, 2, 2, 2))
    # Index order (a_row, b_row, a_col, b_col): swap b_row and b_col.
    t = t.swapaxes(-3, -1)
    return t.reshape(batch + (4, 4))


def negativity_raw(rho) -> np.ndarray | float:
    """Unclamped negativity Sum_i (|l_i| - l_i)/2 of partial-transpose eigenvalues."""
    pt = partial_transpose(rho)
    vals = np.linalg.eigvalsh(pt)
    vals = np.where(np.abs(vals) < EIGENVALUE_TOLERANCE, 0.0, vals)
    out = ((np.abs(vals) - vals) / 2.0).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def negativity(rho) -> np.ndarray | float:
    """Negativity of two-qubit states, clamped to the valid range [0, 0.5]."""
    out = np.clip(negativity_raw(rho), 0.0, NEGATIVITY_MAX)
    return float(out) if np.ndim(out) == 0 else out


def projected_pair_states(rho, n_neighbors: int):
    """Project the trailing neighbor qubits onto every Z-outcome combination.

    Args:
        rho: states (..., 2**(2+m), 2**(2+m)) ordered pair-first.
        n_neighbors: number m of trailing neighbor qubits.

    Returns:
        (probabilities, pair_states): arrays shaped (..., 2**m) and
        (..., 2**m, 4, 4); pair states are renormalized where the projection
        probability is nonzero and left zeroed otherwise.
    """
    m = as_matrix(rho)
    k = 2 + n_neighbors
    dim = 2**k
    if m.shape[-2:] != (dim, dim):
        raise AnalysisError(f"expected (..., {dim}, {dim}) matrices, got {m.shape}")
    batch = m.shape[:-2]
    t = m.reshape(batch + (2, 2) + (2,) * n_neighbors + (2, 2) + (2,) * n_neighbors)
    nb = len(batch)
    probs = np.empty(batch + (2**n_neighbors,))
    states = np.zeros(batch + (2**n_neighbors, 4, 4), dtype=complex)
    for z in range(2**n_neighbors):
        zbits = tuple(bits_from_int(z, n_neighbors).tolist()) if n_neighbors else ()
        index = (
            (Ellipsis,)
            + (slice(None), slice(None))
            + zbits
            + (slice(None), slice(None))
            + zbits
        )
        sub = t[index].reshape(batch + (4, 4))
        p = np.real(np.trace(sub, axis1=-2, axis2=-1))
        probs[..., z] = p
        safe = np.where(p > 0, p, 1.0)
        states[..., z, :, :] = sub / safe[..., None, None]
    return probs, states


def max_projected_negativity(rho, n_neighbors: int | None = None):
    """Best negativity over all Z projections of the neighbor qubits.

    Every combination of neighbor outcomes is projected, renormalized and
    traced out; combinations with projection probability below 1e-6 are
    skipped. Ties prefer the lexicographically smallest projection string.

    Args:
        rho: density matrix on pair + m neighbors (2 <= 2+m <= 5), qubit
            order pair-first.
        n_neighbors: m; inferred from the dimension when omitted.

    Returns:
        (value, best_projection, table) where table maps each projection
        bitstring to ``{"negativity", "probability", "skipped"}``. If every
        combination is skipped the value is 0.0 with best_projection None.
    """
    m = as_matrix(rho)
    k = int(round(np.log2(m.shape[-1])))
    if n_neighbors is None:
        n_neighbors = k - 2
    if k != 2 + n_neighbors or not 2 <= k <= 5:
        raise AnalysisError(
            f"need a pair plus 0..3 neighbors, got dim {m.shape[-1]} with m={n_neighbors}"
        )
    if m.ndim != 2:
        raise AnalysisError("max_projected_negativity expects a single state")
    probs, states = projected_pair_states(m, n_neighbors)
    values = negativity(states)
    table = {}
    best_value = None
    best_proj = None
    for z in range(2**n_neighbors):
        proj = bitstring(bits_from_int(z, n_neighbors)) if n_neighbors else ""
        skipped = probs[z] < PROJECTION_PROBABILITY_CUTOFF
        table[proj] = {
            "negativity": float(values[z]) if not skipped else None,
            "probability": float(probs[z]),
            "skipped": bool(skipped),
        }
        if not skipped and (best_value is None or values[z] > best_value):
            best_value = float(values[z])
            best_proj = proj
    if best_value is None:
        return 0.0, None, table
    return best_value, best_proj, table


@dataclass(frozen=True)
class PairResult:
    """Per-edge certification outcome.

    ``entangled`` is true iff the confidence interval lower bound is
    strictly positive; bounds are clamped to the valid negativity range.
    """

    edge: Edge
    negativity: float
    ci_lower: float
    ci_upper: float
    best_projection: str | None
    projection_probability: float
    entangled: bool

    def __post_init__(self):
        object.__setattr__(self, "edge", (int(self.edge[0]), int(self.edge[1])))
        if not 0.0 <= self.ci_lower <= self.ci_upper <= NEGATIVITY_MAX + 1e-12:
            raise AnalysisError(
                f"invalid interval [{self.ci_lower}, {self.ci_upper}] for edge {self.edge}"
            )
        if not 0.0 <= self.negativity <= NEGATIVITY_MAX + 1e-12:
            raise AnalysisError(f"negativity {self.negativity} outside [0, 0.5]")
        if self.entangled != (self.ci_lower > 0.0):
            raise AnalysisError("entangled flag must equal ci_lower > 0")

    @classmethod
    def from_estimates(
        cls, edge, estimate, ci_lower, ci_upper, best_projection, projection_probability
    ) -> "PairResult":
        lo = float(np.clip(ci_lower, 0.0, NEGATIVITY_MAX))
        hi = float(np.clip(ci_upper, 0.0, NEGATIVITY_MAX))
        return cls(
            edge=tuple(edge),
            negativity=float(np.clip(estimate, 0.0, NEGATIVITY_MAX)),
            ci_lower=lo,
            ci_upper=max(lo, hi),
            best_projection=best_projection,
            projection_probability=float(projection_probability),
            entangled=lo > 0.0,
        )

    def to_dict(self) -> dict:
        return {
            "edge": list(self.edge),
            "negativity": self.negativity,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "best_projection": self.best_projection,
            "projection_probability": self.projection_probability,
            "entangled": self.entangled,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PairResult":
        return cls(
            edge=tuple(doc["edge"]),
            negativity=doc["negativity"],
            ci_lower=doc["ci_lower"],
            ci_upper=doc["ci_upper"],
            best_projection=doc["best_projection"],
            projection_probability=doc["projection_probability"],
            entangled=doc["entangled"],
        )


@dataclass(frozen=True)
class EntanglementGraph:
    """Detected-entanglement subgraph of the device topology."""

    n_qubits: int
    edges: tuple[Edge, ...]
    weights: dict[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "edges", tuple(sorted(tuple(sorted(e)) for e in self.edges))
        )

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_qubits)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj


def build_entanglement_graph(
    results: list[PairResult], topology: DeviceTopology
) -> EntanglementGraph:
    """Keep exactly the topology edges whose pair was found entangled.

    Raises:
        AnalysisError: if results do not cover the topology edge set.
    """
    by_edge = {r.edge: r for r in results}
    missing = set(topology.edges) - set(by_edge)
    if missing:
        raise AnalysisError(f"missing results for edges {sorted(missing)[:5]}")
    extra = set(by_edge) - set(topology.edges)
    if extra:
        raise AnalysisError(f"results for unknown edges {sorted(extra)[:5]}")
    kept = tuple(e for e in topology.edges if by_edge[e].entangled)
    weights = {e: by_edge[e].negativity for e in kept}
    return EntanglementGraph(topology.n_qubits, kept, weights)


def connected_components(graph: EntanglementGraph) -> list[list[int]]:
    """Vertex sets of the graph's components, largest first.

    Ordered by decreasing size with ties broken by smallest contained qubit;
    the device is fully bipartite entangled iff the first component contains
    every qubit.
    """
    adj = graph.adjacency()
    seen = [False] * graph.n_qubits
    components: list[list[int]] = []
    for start in range(graph.n_qubits):
        if seen[start]:
            continue
        seen[start] = True
        stack = [start]
        comp = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
                    comp.append(v)
        components.append(sorted(comp))
    components.sort(key=lambda c: (-len(c), c[0]))
    return components


def spans_device(graph: EntanglementGraph) -> bool:
    comps = connected_components(graph)
    return len(comps[0]) == graph.n_qubits
