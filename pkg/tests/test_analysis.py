"""Negativity, neighbor projection and entanglement-graph tests."""

import numpy as np
import pytest

from hexent.analysis import (
    AnalysisError,
    EntanglementGraph,
    PairResult,
    build_entanglement_graph,
    connected_components,
    max_projected_negativity,
    negativity,
    partial_transpose,
    spans_device,
)
from hexent.stabilizer import prepare_graph_state, reduced_density_matrix
from hexent.topology import (
    DeviceTopology,
    generate_heavy_hex,
    load_preset,
    schedule_cz_layers,
)

BELL = np.zeros((4, 4), dtype=complex)
BELL[0, 0] = BELL[0, 3] = BELL[3, 0] = BELL[3, 3] = 0.5


def random_state(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / rho.trace()


def random_unitary(rng, dim=2):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def werner(p):
    return p * BELL + (1 - p) * np.eye(4) / 4


# -- partial transpose --------------------------------------------------------


def test_product_state_unchanged_and_psd():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    pt = partial_transpose(rho)
    assert np.allclose(pt, rho)
    assert np.linalg.eigvalsh(pt).min() >= -1e-15


def test_maximally_mixed_unchanged():
    rho = np.eye(4, dtype=complex) / 4
    assert np.allclose(partial_transpose(rho), rho)


def test_explicit_index_permutation():
    rho = np.arange(16, dtype=complex).reshape(4, 4)
    pt = partial_transpose(rho)
    expected = np.array(
        [[0, 4, 2, 6], [1, 5, 3, 7], [8, 12, 10, 14], [9, 13, 11, 15]], dtype=complex
    )
    assert np.allclose(pt, expected)


def test_bell_state_minimum_eigenvalue():
    vals = np.linalg.eigvalsh(partial_transpose(BELL))
    assert vals.min() == pytest.approx(-0.5, abs=1e-12)


def test_involution_trace_hermiticity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rho = random_state(rng, 4)
        pt = partial_transpose(rho)
        assert np.allclose(partial_transpose(pt), rho, atol=1e-14)
        assert pt.trace() == pytest.approx(rho.trace(), abs=1e-13)
        assert np.abs(pt - pt.conj().T).max() < 1e-13


def test_wrong_dimension_rejected():
    with pytest.raises(AnalysisError):
        partial_transpose(np.eye(8) / 8)


# -- negativity ----------------------------------------------------------------


def test_product_states_have_zero_negativity():
    rng = np.random.default_rng(1)
    for _ in range(200):
        rho = np.kron(random_state(rng, 2), random_state(rng, 2))
        assert negativity(rho) <= 1e-10


def test_bell_state_is_maximal():
    assert negativity(BELL) == pytest.approx(0.5, abs=1e-12)


def test_werner_family_closed_form():
    for p in np.linspace(0, 1, 101):
        expected = max(0.0, (3 * p - 1) / 4)
        assert negativity(werner(p)) == pytest.approx(expected, abs=1e-12)


def test_local_unitary_invariance():
    rng = np.random.default_rng(2)
    for _ in range(25):
        rho = random_state(rng, 4)
        base = negativity(rho)
        u = np.kron(random_unitary(rng), random_unitary(rng))
        assert negativity(u @ rho @ u.conj().T) == pytest.approx(base, abs=1e-10)


def test_depolarizing_never_increases_negativity():
    prev = 0.5
    for lam in np.linspace(0, 1, 21):
        mixed = (1 - lam) * BELL + lam * np.eye(4) / 4
        val = negativity(mixed)
        assert val <= prev + 1e-12
        prev = val


def test_negativity_batched():
    stack = np.stack([BELL, np.eye(4, dtype=complex) / 4, werner(0.6)])
    vals = negativity(stack)
    assert np.allclose(vals, [0.5, 0.0, 0.2], atol=1e-12)


# -- projected negativity ---------------------------------------------------------


def test_pair_without_neighbors():
    topo = DeviceTopology(2, ((0, 1),))
    state = prepare_graph_state(topo, schedule_cz_layers(topo))
    rho = reduced_density_matrix(state, (0, 1))
    value, best, table = max_projected_negativity(rho)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert best == ""
    assert table[""]["probability"] == pytest.approx(1.0)


def test_path3_projections_all_maximal():
    # Z-projecting the neighbor of an adjacent pair in a 3-qubit path leaves
    # a Bell-equivalent pair for both outcomes on the ideal state
    topo = DeviceTopology(3, ((0, 1), (1, 2)))
    state = prepare_graph_state(topo, schedule_cz_layers(topo))
    rho = reduced_density_matrix(state, topo.tomography_subset((0, 1)))
    value, best, table = max_projected_negativity(rho)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert best == "0"  # ties break toward the smallest projection string
    for proj in ("0", "1"):
        assert table[proj]["negativity"] == pytest.approx(0.5, abs=1e-12)
        assert table[proj]["probability"] == pytest.approx(0.5, abs=1e-12)


def test_path3_middle_projection_disconnects_ends():
    # the non-adjacent end pair becomes a product state once the middle
    # qubit is Z-projected, for either outcome
    topo = DeviceTopology(3, ((0, 1), (1, 2)))
    state = prepare_graph_state(topo, schedule_cz_layers(topo))
    rho = reduced_density_matrix(state, (0, 2, 1))
    value, best, table = max_projected_negativity(rho)
    assert value == pytest.approx(0.0, abs=1e-12)
    for proj in ("0", "1"):
        assert table[proj]["negativity"] == pytest.approx(0.0, abs=1e-12)


def test_maximally_mixed_input_all_zero():
    rho = np.eye(16, dtype=complex) / 16
    value, best, table = max_projected_negativity(rho)
    assert value == 0.0
    assert all(entry["negativity"] == pytest.approx(0.0) for entry in table.values())


def test_negligible_probability_branches_skipped():
    # neighbor pinned to |1>: projections onto 0 are impossible
    rho = np.kron(BELL, np.diag([0.0, 1.0]).astype(complex))
    value, best, table = max_projected_negativity(rho)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert best == "1"
    assert table["0"]["skipped"] is True
    assert table["1"]["skipped"] is False


def test_degenerate_input_reports_all_skipped():
    value, best, table = max_projected_negativity(np.zeros((8, 8), dtype=complex))
    assert value == 0.0
    assert best is None
    assert all(entry["skipped"] for entry in table.values())


def test_dimension_checks():
    with pytest.raises(AnalysisError):
        max_projected_negativity(np.eye(64, dtype=complex) / 64)


def test_exact_graph_states_all_edges_maximal():
    for topo in (load_preset("hex12"), generate_heavy_hex(1, 1)):
        state = prepare_graph_state(topo, schedule_cz_layers(topo))
        for edge in topo.edges:
            subset = topo.tomography_subset(edge)
            rho = reduced_density_matrix(state, subset)
            value, best, _ = max_projected_negativity(rho)
            assert value == pytest.approx(0.5, abs=1e-10), f"edge {edge}"


# -- results and graphs -------------------------------------------------------------


def make_result(edge, low, high=None, est=None):
    high = high if high is not None else max(low, 0) + 0.1
    est = est if est is not None else max(low, 0.01)
    return PairResult.from_estimates(edge, est, low, high, "0", 0.5)


def test_pair_result_flag_follows_interval():
    r = make_result((0, 1), 0.05)
    assert r.entangled
    r = make_result((0, 1), -0.2)
    assert not r.entangled
    assert r.ci_lower == 0.0  # clamped into the valid range


def test_pair_result_validation():
    with pytest.raises(AnalysisError):
        PairResult((0, 1), 0.2, 0.3, 0.1, "0", 0.5, True)
    with pytest.raises(AnalysisError):
        PairResult((0, 1), 0.2, 0.1, 0.3, "0", 0.5, False)


def test_entanglement_graph_all_and_none():
    topo = load_preset("manhattan")
    results = [make_result(e, 0.1) for e in topo.edges]
    graph = build_entanglement_graph(results, topo)
    assert len(graph.edges) == 72
    comps = connected_components(graph)
    assert len(comps[0]) == 65
    assert spans_device(graph)

    none = [make_result(e, -0.1) for e in topo.edges]
    graph = build_entanglement_graph(none, topo)
    assert graph.edges == ()
    comps = connected_components(graph)
    assert len(comps) == 65
    assert all(len(c) == 1 for c in comps)


def test_missing_edge_results_rejected():
    topo = load_preset("hex12")
    results = [make_result(e, 0.1) for e in topo.edges[:-1]]
    with pytest.raises(AnalysisError, match="missing"):
        build_entanglement_graph(results, topo)


def test_rochester_style_partial_detection():
    # 31 detected pairs arranged so the largest entangled region has 9 qubits
    topo = load_preset("rochester")
    adj = topo.adjacency()
    # grow a 9-qubit connected region from qubit 19 by BFS
    region = [19]
    for q in region:
        for nb in adj[q]:
            if nb not in region and len(region) < 9:
                region.append(nb)
    region_set = set(region)
    detected = {
        e for e in topo.edges if e[0] in region_set and e[1] in region_set
    }
    # fill up with edges whose components stay strictly below 9 qubits
    parent = list(range(topo.n_qubits))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def comp_size(x):
        root = find(x)
        return sum(1 for v in range(topo.n_qubits) if find(v) == root)

    for e in topo.edges:
        if len(detected) == 31:
            break
        if e in detected or e[0] in region_set or e[1] in region_set:
            continue
        if find(e[0]) != find(e[1]) and comp_size(e[0]) + comp_size(e[1]) < 9:
            parent[find(e[0])] = find(e[1])
            detected.add(e)
    assert len(detected) == 31
    results = [make_result(e, 0.1 if e in detected else -0.1) for e in topo.edges]
    graph = build_entanglement_graph(results, topo)
    comps = connected_components(graph)
    assert len(comps[0]) == 9
    assert not spans_device(graph)


def test_components_sorted_by_size_then_vertex():
    graph = EntanglementGraph(6, ((3, 4), (0, 1)))
    comps = connected_components(graph)
    assert comps == [[0, 1], [3, 4], [2], [5]]
