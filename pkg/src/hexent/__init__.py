"""hexent: whole-device entanglement experiments on heavy-hexagon lattices.

Simulates native-graph-state preparation under configurable noise, performs
local pair tomography with readout-error mitigation, and certifies bipartite
entanglement edge-by-edge via neighbor-projected negativity with
bias-corrected bootstrap confidence intervals.
"""

from .topology import (
    CzSchedule,
    DeviceTopology,
    TopologyError,
    generate_heavy_hex,
    load_preset,
    load_topology,
    schedule_cz_layers,
)
from .stabilizer import (
    CountsTable,
    NoiseModel,
    StabilizerState,
    prepare_graph_state,
    reduced_density_matrix,
    run_calibration_circuits,
    sample_counts,
)
from .tomography import (
    TomographyDataset,
    estimate_pauli_expectations,
    linear_inversion,
    nearest_physical_density_matrix,
    tomography_settings,
)
from .qrem import (
    CalibrationSet,
    CalibrationSnapshot,
    build_calibration_matrices,
    project_to_simplex,
    qrem_correct,
)
from .analysis import (
    EntanglementGraph,
    PairResult,
    build_entanglement_graph,
    connected_components,
    max_projected_negativity,
    negativity,
    partial_transpose,
)
from .stats import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_negativity,
    resample_counts,
)
from .density import DensityMatrix
from .pipeline import ExperimentConfig, ExperimentReport, run_pipeline
from .report import emit_report

__version__ = "0.1.0"

__all__ = [
    "CzSchedule",
    "DeviceTopology",
    "TopologyError",
    "generate_heavy_hex",
    "load_preset",
    "load_topology",
    "schedule_cz_layers",
    "CountsTable",
    "NoiseModel",
    "StabilizerState",
    "prepare_graph_state",
    "reduced_density_matrix",
    "run_calibration_circuits",
    "sample_counts",
    "TomographyDataset",
    "estimate_pauli_expectations",
    "linear_inversion",
    "nearest_physical_density_matrix",
    "tomography_settings",
    "CalibrationSet",
    "CalibrationSnapshot",
    "build_calibration_matrices",
    "project_to_simplex",
    "qrem_correct",
    "EntanglementGraph",
    "PairResult",
    "build_entanglement_graph",
    "connected_components",
    "max_projected_negativity",
    "negativity",
    "partial_transpose",
    "BootstrapConfig",
    "BootstrapResult",
    "bootstrap_negativity",
    "resample_counts",
    "DensityMatrix",
    "ExperimentConfig",
    "ExperimentReport",
    "run_pipeline",
    "emit_report",
]
