"""Readout-error mitigation tests: calibration, correction, simplex projection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hexent.qrem import (
    CalibrationError,
    CalibrationSet,
    CalibrationSnapshot,
    apply_factorwise,
    build_calibration_matrices,
    calibration_matrix,
    invert_2x2,
    project_to_simplex,
    qrem_correct,
)
from hexent.stabilizer import CountsTable, NoiseModel, run_calibration_circuits


def simplex_oracle(v, tol=1e-15):
    """Independent KKT solver: bisection on the shift t in max(v + t, 0)."""
    v = np.asarray(v, dtype=float)
    lo = 1.0 / len(v) - v.max()
    hi = 1.0 - v.max()
    for _ in range(200):
        mid = (lo + hi) / 2
        total = np.maximum(v + mid, 0).sum()
        if total > 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return np.maximum(v + (lo + hi) / 2, 0)


def counts_for(qubits, bit_counts):
    shots = sum(c for _, c in bit_counts)
    return CountsTable("Z" * len(qubits), qubits, shots, dict(bit_counts))


# -- calibration matrices ---------------------------------------------------------


def test_noiseless_counts_give_identity():
    zeros = counts_for((0, 1), [("00", 1000)])
    ones = counts_for((0, 1), [("11", 1000)])
    mats = build_calibration_matrices(zeros, ones)
    assert np.allclose(mats, np.stack([np.eye(2)] * 2), atol=1e-12)


def test_direct_frequency_ratios():
    zeros = counts_for((0,), [("0", 900), ("1", 100)])
    ones = counts_for((0,), [("1", 850), ("0", 150)])
    mats = build_calibration_matrices(zeros, ones)
    assert np.allclose(mats[0], [[0.90, 0.15], [0.10, 0.85]], atol=1e-12)


def test_singular_matrix_names_qubit():
    zeros = counts_for((0, 1), [("00", 500), ("01", 500)])
    ones = counts_for((0, 1), [("11", 500), ("10", 500)])
    # qubit 1 has 50% flips in both preparations -> singular
    with pytest.raises(CalibrationError, match="qubit 1"):
        build_calibration_matrices(zeros, ones)


def test_mismatched_tables_rejected():
    zeros = counts_for((0,), [("0", 10)])
    ones = counts_for((1,), [("1", 10)])
    with pytest.raises(CalibrationError, match="same qubits"):
        build_calibration_matrices(zeros, ones)


def test_column_stochastic_by_construction():
    rng = np.random.default_rng(0)
    noise = NoiseModel(rng.uniform(0, 0.3, 4), rng.uniform(0, 0.3, 4))
    zeros = run_calibration_circuits("0000", 5000, noise, rng)
    ones = run_calibration_circuits("1111", 5000, noise, rng)
    mats = build_calibration_matrices(zeros, ones)
    assert np.allclose(mats.sum(axis=1), 1.0, atol=1e-12)


# -- correction --------------------------------------------------------------------


def test_identity_calibration_returns_input():
    mats = np.stack([np.eye(2)] * 2)
    p = np.array([0.4, 0.1, 0.3, 0.2])
    assert np.allclose(qrem_correct(p, mats), p, atol=1e-12)


def test_hand_inverted_single_qubit_case():
    mats = calibration_matrix(0.1, 0.1)[None, :, :]
    out = qrem_correct(np.array([0.9, 0.1]), mats)
    assert np.allclose(out, [1.0, 0.0], atol=1e-12)
    out = qrem_correct(np.array([0.5, 0.5]), mats)
    assert np.allclose(out, [0.5, 0.5], atol=1e-12)


def test_factorwise_equals_dense_tensor_inverse():
    rng = np.random.default_rng(1)
    for k in (1, 2, 3, 4):
        mats = np.empty((k, 2, 2))
        for j in range(k):
            mats[j] = calibration_matrix(rng.uniform(0, 0.35), rng.uniform(0, 0.35))
        dense = mats[0]
        for j in range(1, k):
            dense = np.kron(dense, mats[j])
        v = rng.random(2**k)
        v /= v.sum()
        got = apply_factorwise(v, invert_2x2(mats))
        want = np.linalg.inv(dense) @ v
        assert np.abs(got - want).max() < 1e-12


def test_singular_factor_rejected():
    mats = np.array([[[0.5, 0.5], [0.5, 0.5]]])
    with pytest.raises(CalibrationError, match="singular"):
        qrem_correct(np.array([0.7, 0.3]), mats)


def test_end_to_end_flip_recovery():
    # sampling with known flips then correcting with the exact matrices
    # recovers the true distribution within multinomial error
    rng = np.random.default_rng(3)
    k = 3
    true = np.array([0.5, 0, 0, 0.125, 0.125, 0, 0.25, 0])
    p10 = np.array([0.12, 0.05, 0.2])
    p01 = np.array([0.08, 0.15, 0.1])
    mats = np.stack([calibration_matrix(a, b) for a, b in zip(p10, p01)])
    dense = np.kron(np.kron(mats[0], mats[1]), mats[2])
    shots = 100000
    draws = rng.multinomial(shots, dense @ true) / shots
    corrected = qrem_correct(draws, mats)
    tv = 0.5 * np.abs(corrected - true).sum()
    assert tv < 0.02


# -- simplex projection --------------------------------------------------------------


def test_valid_vector_unchanged():
    p = np.array([0.2, 0.5, 0.3])
    assert np.allclose(project_to_simplex(p), p, atol=1e-15)


def test_projection_examples_match_oracle():
    v = np.array([0.6, 0.6, -0.2])
    assert np.allclose(project_to_simplex(v), [0.5, 0.5, 0.0], atol=1e-12)
    assert np.allclose(project_to_simplex(v), simplex_oracle(v), atol=1e-12)
    v = np.array([2.0, 0.0, 0.0])
    assert np.allclose(project_to_simplex(v), [1.0, 0.0, 0.0], atol=1e-12)


def test_projection_oracle_sweep():
    rng = np.random.default_rng(4)
    for _ in range(300):
        dim = int(rng.integers(2, 33))
        v = rng.normal(scale=rng.uniform(0.1, 5.0), size=dim)
        got = project_to_simplex(v)
        want = simplex_oracle(v)
        assert np.abs(got - want).max() < 1e-9


def test_projection_batched_matches_loop():
    rng = np.random.default_rng(8)
    vs = rng.normal(size=(6, 7, 5))
    flat = project_to_simplex(vs)
    for i in range(6):
        for j in range(7):
            assert np.allclose(flat[i, j], project_to_simplex(vs[i, j]), atol=1e-14)


def test_projection_rejects_nonfinite():
    with pytest.raises(ValueError):
        project_to_simplex(np.array([np.nan, 0.5]))


@settings(max_examples=100, deadline=None)
@given(
    arrays(
        np.float64,
        st.integers(2, 16),
        elements=st.floats(-10, 10, allow_nan=False),
    )
)
def test_projection_kkt_and_idempotence(v):
    out = project_to_simplex(v)
    assert out.min() >= 0.0
    assert out.sum() == pytest.approx(1.0, abs=1e-9)
    # idempotent
    assert np.allclose(project_to_simplex(out), out, atol=1e-9)
    # KKT: on the support the shift is uniform, off it v must sit lower
    support = out > 1e-12
    shifts = out[support] - v[support]
    assert np.ptp(shifts) < 1e-9
    if support.any() and (~support).any():
        t = shifts.mean()
        assert (v[~support] + t <= 1e-9).all()


# -- snapshots and sets ----------------------------------------------------------------


def test_snapshot_file_roundtrip(tmp_path):
    mats = np.stack([calibration_matrix(0.1, 0.2), calibration_matrix(0.05, 0.0)])
    snap = CalibrationSnapshot("cal-0", mats)
    path = tmp_path / "snap.json"
    snap.save(path)
    loaded = CalibrationSnapshot.load(path)
    assert loaded.label == "cal-0"
    assert np.allclose(loaded.matrices, mats, atol=1e-12)
    doc = snap.to_dict()
    assert doc["qubits"][0].keys() == {"q", "p00", "p10", "p01", "p11"}


def test_calibration_set_validation():
    mats = calibration_matrix(0.1, 0.1)[None]
    with pytest.raises(CalibrationError):
        CalibrationSet(())
    snap1 = CalibrationSnapshot("a", mats)
    snap2 = CalibrationSnapshot("b", np.stack([mats[0], mats[0]]))
    with pytest.raises(CalibrationError, match="same qubits"):
        CalibrationSet((snap1, snap2))
    cs = CalibrationSet((snap1,))
    assert cs.matrices_for((0,), 0).shape == (1, 2, 2)
