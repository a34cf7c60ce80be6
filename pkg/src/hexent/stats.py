"""Bias-corrected bootstrap confidence intervals for pair negativities.

The data split into tomography counts and calibration counts is resampled
separately: each replicate redraws the calibration data (multinomially from
a single snapshot, or by drawing one of several snapshots to capture drift),
resamples a fresh copy of the raw tomography frequencies once, applies
readout-error correction to the resampled copy, and reruns reconstruction
and the projected-negativity maximization. Resampling the raw counts before
correcting reproduces the estimator's actual noise path (the calibration
inverse amplifies raw sampling noise); resampling after correction would
draw from nearly deterministic vectors and understate the variance.
Replicates are then shifted so their mean matches the point estimate, where
zero-valued replicates are ignored when computing that mean: with the lower
tail clamped at zero, including them would overcorrect upward and could
lift an interval above zero on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (
    PROJECTION_PROBABILITY_CUTOFF,
    negativity,
    projected_pair_states,
)
from .pauli import bits_from_int
from .qrem import SINGULAR_DETERMINANT, CalibrationSet, qrem_correct
from .stabilizer import CountsTable
from .tomography import (
    ExpectationKernel,
    TomographyDataset,
    linear_inversion,
    nearest_physical_density_matrix,
)

NEGATIVITY_MAX = 0.5


class BootstrapError(RuntimeError):
    """Raised when the bootstrap cannot produce the requested replicates."""


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap parameters.

    calibration_mode "single" resamples one snapshot's counts multinomially;
    "multi" draws one snapshot uniformly per replicate.
    """

    n_replicates: int = 1000
    confidence: float = 0.95
    seed: int | None = None
    calibration_mode: str = "single"
    block_size: int = 128

    def __post_init__(self):
        if self.n_replicates < 100:
            raise ValueError("n_replicates must be at least 100")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.calibration_mode not in ("single", "multi"):
            raise ValueError("calibration_mode must be 'single' or 'multi'")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimate with its bias-corrected replicate distribution."""

    estimate: float
    replicates: np.ndarray
    corrected: np.ndarray
    lower: float
    upper: float
    confidence: float
    mean_raw: float
    mean_nonzero: float

    def __post_init__(self):
        for name in ("replicates", "corrected"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "confidence": self.confidence,
            "mean_raw": self.mean_raw,
            "mean_nonzero": self.mean_nonzero,
            "mean_corrected": float(self.corrected.mean()),
            "replicates": self.replicates.tolist(),
            "corrected": self.corrected.tolist(),
        }


def resample_counts(table: CountsTable, rng) -> CountsTable:
    """Multinomial redraw of a counts table with the same shot total."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    keys = sorted(table.counts)
    weights = np.array([table.counts[k] for k in keys], dtype=float)
    draw = rng.multinomial(table.shots, weights / weights.sum())
    counts = {k: int(c) for k, c in zip(keys, draw) if c > 0}
    return CountsTable(table.setting, table.qubits, table.shots, counts)


def bias_corrected_interval(
    estimate: float, replicates: np.ndarray, confidence: float
) -> tuple[float, float, np.ndarray]:
    """Percentile interval of replicates shifted to match the estimate.

    The shift is (estimate - mean of nonzero replicates); zero replicates are
    excluded from the mean (they are included in the shifted distribution,
    clamped into [0, 0.5]). When every replicate is zero the plain mean (0)
    is used.
    """
    reps = np.asarray(replicates, dtype=float)
    nonzero = reps[reps > 0.0]
    mean_nonzero = float(nonzero.mean()) if nonzero.size else 0.0
    corrected = np.clip(reps + (estimate - mean_nonzero), 0.0, NEGATIVITY_MAX)
    alpha = (1.0 - confidence) / 2.0
    lower, upper = np.percentile(corrected, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return float(lower), float(upper), corrected


def negativity_statistic(frequencies: np.ndarray, n_qubits: int) -> np.ndarray:
    """Frequencies (..., 3**k, 2**k) -> best projected negativity (...).

    This is the standard reconstruction pipeline: Pauli expectations, linear
    inversion, nearest physical state, then the maximum negativity over
    neighbor Z projections (skipping negligible-probability branches).
    """
    k = n_qubits
    kernel = ExpectationKernel.for_qubits(k)
    coeffs = kernel.expectations(frequencies)
    rho = linear_inversion(coeffs, k)
    rho = nearest_physical_density_matrix(rho)
    probs, states = projected_pair_states(rho, k - 2)
    values = np.asarray(negativity(states))
    masked = np.where(probs >= PROJECTION_PROBABILITY_CUTOFF, values, -np.inf)
    best = masked.max(axis=-1)
    return np.where(np.isfinite(best), best, 0.0)


def _calibration_marginals(snapshot, qubits) -> tuple[np.ndarray, np.ndarray, int]:
    """Joint zero/one calibration count vectors on a qubit subset."""
    if snapshot.zero_counts is None or snapshot.one_counts is None:
        raise BootstrapError(
            "single-snapshot resampling needs calibration counts, not just matrices"
        )
    positions = tuple(snapshot.zero_counts.qubits.index(q) for q in qubits)
    zero = snapshot.zero_counts.marginal(positions).probability_vector()
    one = snapshot.one_counts.marginal(positions).probability_vector()
    return zero, one, snapshot.zero_counts.shots


def _matrices_from_fractions(p10: np.ndarray, p11: np.ndarray) -> np.ndarray:
    """Stacked calibration matrices from one-fractions, shape (..., 2, 2)."""
    mats = np.empty(p10.shape + (2, 2))
    mats[..., 0, 0] = 1.0 - p10
    mats[..., 1, 0] = p10
    mats[..., 0, 1] = 1.0 - p11
    mats[..., 1, 1] = p11
    return mats


def _resampled_calibration_matrices(
    calibration: CalibrationSet, qubits, n: int, shots_hint: int, rng
) -> tuple[np.ndarray, int]:
    """Draw n per-replicate calibration matrix stacks (n, k, 2, 2).

    Returns the stacks plus the number of replicates rejected for
    near-singular factors (flip rates resampled to ~50%).
    """
    snapshot = calibration.snapshots[0]
    zero_p, one_p, cal_shots = _calibration_marginals(snapshot, qubits)
    k = len(qubits)
    bit_table = bits_from_int(np.arange(2**k), k).astype(float)
    zero_draw = rng.multinomial(cal_shots, zero_p, size=n)
    one_draw = rng.multinomial(cal_shots, one_p, size=n)
    p10 = (zero_draw @ bit_table) / cal_shots
    p11 = (one_draw @ bit_table) / cal_shots
    mats = _matrices_from_fractions(p10, p11)
    dets = mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    bad = int((np.abs(dets) < SINGULAR_DETERMINANT).any(axis=-1).sum())
    return mats, bad


def bootstrap_negativity(
    dataset: TomographyDataset,
    calibration: CalibrationSet | None = None,
    config: BootstrapConfig = BootstrapConfig(),
    apply_qrem: bool = True,
    statistic=None,
    rng=None,
) -> BootstrapResult:
    """Bootstrap the projected negativity of one tomography dataset.

    Args:
        dataset: complete 3**k-setting dataset, qubits pair-first.
        calibration: calibration set; required when apply_qrem is true.
        config: replicate count, confidence level, seed, calibration mode.
        apply_qrem: correct readout errors before reconstruction.
        statistic: optional pipeline handle mapping corrected frequency
            stacks (..., 3**k, 2**k) to negativity values (...); defaults to
            :func:`negativity_statistic`.
        rng: overrides config.seed when given.

    Returns:
        BootstrapResult with raw and bias-corrected replicate values.

    Raises:
        BootstrapError: when replicates fail (near-singular resampled
            calibration factors), reporting how many.
    """
    if apply_qrem and calibration is None:
        raise BootstrapError("QREM bootstrap requires a calibration set")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    k = dataset.n_qubits
    stat = statistic or (lambda f: negativity_statistic(f, k))
    freqs = dataset.frequency_matrix()
    shots = dataset.shots
    qubits = dataset.qubits

    if apply_qrem:
        if config.calibration_mode == "multi" and len(calibration) > 1:
            point_mats = calibration.mean_matrices_for(qubits)
        else:
            point_mats = calibration.matrices_for(qubits, 0)
        point_freqs = qrem_correct(freqs, point_mats)
    else:
        point_freqs = freqs
    estimate = float(np.asarray(stat(point_freqs)))

    snapshot_stack = None
    if apply_qrem and config.calibration_mode == "multi":
        snapshot_stack = np.stack(
            [s.matrices[list(qubits)] for s in calibration.snapshots]
        )

    norm_freqs = freqs / freqs.sum(axis=-1, keepdims=True)
    replicates = np.empty(config.n_replicates)
    failed = 0
    done = 0
    while done < config.n_replicates:
        n = min(config.block_size, config.n_replicates - done)
        drawn = (
            rng.multinomial(shots, np.broadcast_to(norm_freqs, (n,) + freqs.shape))
            / shots
        )
        if apply_qrem:
            if config.calibration_mode == "multi":
                idx = rng.integers(0, len(calibration), size=n)
                mats = snapshot_stack[idx]
            else:
                mats, bad = _resampled_calibration_matrices(
                    calibration, qubits, n, shots, rng
                )
                if bad:
                    failed += bad
                    # Re-center near-singular factors on the snapshot values
                    # so array shapes stay intact; the error below still fires.
                    dets = (
                        mats[..., 0, 0] * mats[..., 1, 1]
                        - mats[..., 0, 1] * mats[..., 1, 0]
                    )
                    mask = np.abs(dets) < SINGULAR_DETERMINANT
                    repl = np.broadcast_to(
                        calibration.matrices_for(qubits, 0), mats.shape
                    )
                    mats = np.where(mask[..., None, None], repl, mats)
            drawn = qrem_correct(drawn, mats[:, None, :, :, :])
        replicates[done : done + n] = np.asarray(stat(drawn), dtype=float)
        done += n

    if failed:
        raise BootstrapError(
            f"{failed} of {config.n_replicates} replicates failed "
            "(near-singular resampled calibration)"
        )

    lower, upper, corrected_reps = bias_corrected_interval(
        estimate, replicates, config.confidence
    )
    return BootstrapResult(
        estimate=estimate,
        replicates=replicates,
        corrected=corrected_reps,
        lower=lower,
        upper=upper,
        confidence=config.confidence,
        mean_raw=float(replicates.mean()),
        mean_nonzero=float(replicates[replicates > 0].mean())
        if np.any(replicates > 0)
        else 0.0,
    )
