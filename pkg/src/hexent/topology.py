"""Device connectivity graphs and CZ-layer scheduling.

A heavy-hexagon device places qubits on the vertices and edge midpoints of a
hexagonal grid, which keeps the maximum degree at three and the coupling graph
bipartite. The native-graph-state circuit applies one CZ per coupling, so the
circuit depth equals the number of parallel CZ layers returned by the
scheduler; for bipartite graphs this equals the maximum degree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

Edge = tuple[int, int]

PRESET_NAMES = ("rochester", "manhattan", "hex12")


class TopologyError(ValueError):
    """Raised for malformed or out-of-contract topology inputs."""


def _normalize_edge(edge) -> Edge:
    a, b = int(edge[0]), int(edge[1])
    if a == b:
        raise TopologyError(f"self-loop edge ({a}, {b}) is not allowed")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class DeviceTopology:
    """Connected qubit-coupling graph.

    Attributes:
        n_qubits: number of qubits, indexed 0..n_qubits-1.
        edges: sorted tuple of unordered couplings (a, b) with a < b.
        name: text label used in files and reports.
        coords: optional per-qubit drawing coordinates (not part of the
            canonical file format; used by figure rendering).
    """

    n_qubits: int
    edges: tuple[Edge, ...]
    name: str = "custom"
    coords: tuple[tuple[float, float], ...] | None = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.n_qubits < 1:
            raise TopologyError("n_qubits must be a positive integer")
        normalized = sorted({_normalize_edge(e) for e in self.edges})
        if len(normalized) != len(self.edges):
            raise TopologyError("duplicate edges are not allowed")
        for a, b in normalized:
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise TopologyError(
                    f"edge ({a}, {b}) references a qubit outside 0..{self.n_qubits - 1}"
                )
        object.__setattr__(self, "edges", tuple(normalized))
        if self.coords is not None:
            coords = tuple((float(x), float(y)) for x, y in self.coords)
            if len(coords) != self.n_qubits:
                raise TopologyError("coords must cover every qubit")
            object.__setattr__(self, "coords", coords)
        if not self._is_connected():
            raise TopologyError("topology graph must be connected")

    def _is_connected(self) -> bool:
        if self.n_qubits == 1:
            return True
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_qubits

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_qubits)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(nbrs) for nbrs in adj]

    def neighbors(self, qubit: int) -> list[int]:
        return self.adjacency()[qubit]

    def degree(self, qubit: int) -> int:
        return len(self.adjacency()[qubit])

    def max_degree(self) -> int:
        return max(len(n) for n in self.adjacency())

    def two_coloring(self) -> list[int] | None:
        """BFS 2-coloring; None if the graph is not bipartite."""
        color = [-1] * self.n_qubits
        adj = self.adjacency()
        for start in range(self.n_qubits):
            if color[start] != -1:
                continue
            color[start] = 0
            queue = [start]
            while queue:
                u = queue.pop()
                for v in adj[u]:
                    if color[v] == -1:
                        color[v] = 1 - color[u]
                        queue.append(v)
                    elif color[v] == color[u]:
                        return None
        return color

    def is_bipartite(self) -> bool:
        return self.two_coloring() is not None

    def tomography_subset(self, edge: Edge) -> tuple[int, ...]:
        """Pair-first qubit subset for an edge: (a, b, then their neighbors)."""
        a, b = _normalize_edge(edge)
        if (a, b) not in self.edges:
            raise TopologyError(f"({a}, {b}) is not an edge of {self.name}")
        adj = self.adjacency()
        nbrs = sorted(set(adj[a] + adj[b]) - {a, b})
        return (a, b, *nbrs)

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "edges": [list(e) for e in self.edges],
        }
        if self.coords is not None:
            doc["coords"] = [list(c) for c in self.coords]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DeviceTopology":
        try:
            n = int(doc["n_qubits"])
            edges = tuple(tuple(e) for e in doc["edges"])
            name = str(doc.get("name", "custom"))
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError(f"malformed topology document: {exc}") from exc
        coords = doc.get("coords")
        if coords is not None:
            coords = tuple(tuple(c) for c in coords)
        return cls(n_qubits=n, edges=edges, name=name, coords=coords)


@dataclass(frozen=True)
class CzSchedule:
    """Ordered CZ layers; each layer is a matching of the device graph."""

    layers: tuple[tuple[Edge, ...], ...]

    def __post_init__(self):
        layers = []
        seen: set[Edge] = set()
        for layer in self.layers:
            normalized = tuple(sorted(_normalize_edge(e) for e in layer))
            used: set[int] = set()
            for a, b in normalized:
                if a in used or b in used:
                    raise TopologyError(
                        f"layer {len(layers)} is not a matching: qubit reuse in ({a}, {b})"
                    )
                used.update((a, b))
                if (a, b) in seen:
                    raise TopologyError(f"edge ({a}, {b}) scheduled twice")
                seen.add((a, b))
            layers.append(normalized)
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def edge_set(self) -> set[Edge]:
        return {e for layer in self.layers for e in layer}

    def covers(self, topology: DeviceTopology) -> bool:
        return self.edge_set() == set(topology.edges)

    def to_dict(self) -> dict:
        return {"layers": [[list(e) for e in layer] for layer in self.layers]}

    @classmethod
    def from_dict(cls, doc: dict) -> "CzSchedule":
        return cls(tuple(tuple(tuple(e) for e in layer) for layer in doc["layers"]))


def generate_heavy_hex(rows: int, cols: int, name: str | None = None) -> DeviceTopology:
    """Generate a heavy-hexagon lattice of ``rows`` x ``cols`` hexagonal cells.

    The lattice consists of ``rows + 1`` horizontal qubit chains of width
    ``4 * cols + 3`` connected by bridge qubits ("rungs"). Rung columns
    alternate between {0, 4, 8, ...} and {2, 6, 10, ...} on successive gaps.
    The first chain drops its rightmost column and the last chain drops the
    end column unused by its adjacent rungs, which keeps every corner at
    degree two. Qubits are indexed row-major, top to bottom, rung rows
    interleaved between their chains.

    (rows=4, cols=2) reproduces the 65-qubit device layout with 72 couplings.

    Args:
        rows: number of hexagonal cell rows (>= 1).
        cols: number of hexagonal cell columns (>= 1).
        name: optional label; defaults to ``heavy-hex-{rows}x{cols}``.

    Returns:
        A connected, bipartite DeviceTopology with maximum degree <= 3.
    """
    if rows < 1 or cols < 1:
        raise TopologyError("rows and cols must be positive integers")
    width = 4 * cols + 3

    def chain_columns(r: int) -> range:
        if r == 0:
            return range(0, width - 1)
        if r == rows:
            # Match the trim to the last gap's rung columns.
            if (rows - 1) % 2 == 1:
                return range(1, width)
            return range(0, width - 1)
        return range(0, width)

    def rung_columns(gap: int) -> range:
        offset = 0 if gap % 2 == 0 else 2
        return range(offset, width, 4)

    index: dict[tuple[str, int, int], int] = {}
    coords: list[tuple[float, float]] = []
    counter = 0
    for r in range(rows + 1):
        for c in chain_columns(r):
            index[("chain", r, c)] = counter
            coords.append((float(c), float(-2 * r)))
            counter += 1
        if r < rows:
            for c in rung_columns(r):
                index[("rung", r, c)] = counter
                coords.append((float(c), float(-2 * r - 1)))
                counter += 1

    edges: list[Edge] = []
    for r in range(rows + 1):
        cs = list(chain_columns(r))
        for c0, c1 in zip(cs, cs[1:]):
            edges.append((index[("chain", r, c0)], index[("chain", r, c1)]))
    for g in range(rows):
        for c in rung_columns(g):
            rung = index[("rung", g, c)]
            edges.append((index[("chain", g, c)], rung))
            edges.append((rung, index[("chain", g + 1, c)]))

    return DeviceTopology(
        n_qubits=counter,
        edges=tuple(edges),
        name=name or f"heavy-hex-{rows}x{cols}",
        coords=tuple(coords),
    )


def load_topology(source) -> DeviceTopology:
    """Load and validate a topology document from a path or file object.

    The document format is ``{"name": str, "n_qubits": int,
    "edges": [[int, int], ...]}`` with an optional ``coords`` list.

    Raises:
        TopologyError: on parse failures, out-of-range or duplicate edges,
            self-loops, or disconnected graphs.
    """
    try:
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = Path(source).read_text()
    except OSError as exc:
        raise TopologyError(f"cannot read topology document: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"topology document is not valid JSON: {exc}") from exc
    return DeviceTopology.from_dict(doc)


def save_topology(topology: DeviceTopology, path) -> None:
    Path(path).write_text(json.dumps(topology.to_dict(), indent=1))


def load_preset(name: str) -> DeviceTopology:
    """Load one of the shipped device presets: rochester, manhattan, hex12."""
    if name not in PRESET_NAMES:
        raise TopologyError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
    ref = resources.files("hexent.data").joinpath(f"{name}.json")
    with ref.open("r") as fh:
        return load_topology(fh)


def schedule_cz_layers(topology: DeviceTopology) -> CzSchedule:
    """Partition the couplings into a minimal sequence of parallel CZ layers.

    Layers are matchings and jointly cover every edge exactly once. Bipartite
    graphs are colored with exactly max-degree layers using the alternating
    path method; other graphs use fan recoloring, which needs at most one
    extra layer. The result is deterministic for a fixed topology.
    """
    if not topology.edges:
        return CzSchedule(())
    if topology.is_bipartite():
        coloring = _bipartite_edge_coloring(topology)
    else:
        coloring = _fan_edge_coloring(topology)
    n_colors = max(coloring.values()) + 1
    layers: list[list[Edge]] = [[] for _ in range(n_colors)]
    for edge, color in coloring.items():
        layers[color].append(edge)
    schedule = CzSchedule(tuple(tuple(sorted(layer)) for layer in layers))
    if not schedule.covers(topology):
        raise TopologyError("internal error: schedule does not cover topology")
    return schedule


def _bipartite_edge_coloring(topology: DeviceTopology) -> dict[Edge, int]:
    """Exact max-degree edge coloring for bipartite graphs.

    For each edge (u, v), pick the smallest colors free at u and at v. If
    they differ, swap colors along the alternating path starting at v so the
    color free at u becomes free at v as well; in a bipartite graph that path
    can never terminate at u.
    """
    delta = topology.max_degree()
    at: list[dict[int, int]] = [dict() for _ in range(topology.n_qubits)]

    def free_color(v: int) -> int:
        for c in range(delta):
            if c not in at[v]:
                return c
        raise TopologyError("internal error: no free color in bipartite coloring")

    for u, v in topology.edges:
        alpha = free_color(u)
        beta = free_color(v)
        if alpha != beta:
            # Walk the alternating alpha/beta path from v and swap colors.
            path = []
            x, c = v, alpha
            while c in at[x]:
                y = at[x][c]
                path.append((x, y, c))
                x, c = y, (beta if c == alpha else alpha)
            for x, y, c in path:
                del at[x][c], at[y][c]
            for x, y, c in path:
                d = beta if c == alpha else alpha
                at[x][d] = y
                at[y][d] = x
        at[u][alpha] = v
        at[v][alpha] = u

    colors: dict[Edge, int] = {}
    for u, v in topology.edges:
        colors[(u, v)] = next(c for c, w in at[u].items() if w == v)
    return colors


def _fan_edge_coloring(topology: DeviceTopology) -> dict[Edge, int]:
    """Fan-recoloring edge coloring with at most max-degree + 1 colors."""
    n_colors = topology.max_degree() + 1
    at: list[dict[int, int]] = [dict() for _ in range(topology.n_qubits)]

    def free_colors(v: int) -> list[int]:
        return [c for c in range(n_colors) if c not in at[v]]

    def color_of(x: int, y: int) -> int | None:
        for c, w in at[x].items():
            if w == y:
                return c
        return None

    def set_color(x: int, y: int, c: int | None) -> None:
        old = color_of(x, y)
        if old is not None:
            del at[x][old], at[y][old]
        if c is not None:
            at[x][c] = y
            at[y][c] = x

    for u, v in topology.edges:
        # Build a maximal fan of u starting at v.
        fan = [v]
        in_fan = {v}
        while True:
            last = fan[-1]
            extended = False
            for c in free_colors(last):
                w = at[u].get(c)
                if w is not None and w not in in_fan:
                    fan.append(w)
                    in_fan.add(w)
                    extended = True
                    break
            if not extended:
                break
        c = free_colors(u)[0]
        d = free_colors(fan[-1])[0]
        if c != d:
            # Invert the maximal cd-path starting at u.
            x, col = u, d
            path = []
            while col in at[x]:
                y = at[x][col]
                path.append((x, y, col))
                x, col = y, (c if col == d else d)
            for x, y, col in path:
                set_color(x, y, None)
            for x, y, col in path:
                set_color(x, y, c if col == d else d)
            # Keep the longest prefix that is still a fan and whose last
            # vertex has d free; the inversion guarantees one exists.
            w_idx = None
            for i, w in enumerate(fan):
                if i > 0:
                    col_i = color_of(u, fan[i])
                    if col_i is None or col_i in at[fan[i - 1]]:
                        break
                if d not in at[w]:
                    w_idx = i
            if w_idx is None:
                raise TopologyError("internal error: fan recoloring failed")
            fan = fan[: w_idx + 1]
        # Rotate the fan and color the final edge d.
        for i in range(len(fan) - 1):
            c_next = color_of(u, fan[i + 1])
            set_color(u, fan[i + 1], None)
            set_color(u, fan[i], c_next)
        set_color(u, fan[-1], d)

    colors: dict[Edge, int] = {}
    for u, v in topology.edges:
        c = color_of(u, v)
        if c is None:
            raise TopologyError("internal error: fan coloring left an edge uncolored")
        colors[(u, v)] = c
    # Compact color indices in case some never got used.
    used = sorted({c for c in colors.values()})
    remap = {c: i for i, c in enumerate(used)}
    return {e: remap[c] for e, c in colors.items()}
