"""End-to-end experiment orchestration with persisted artifacts.

A single configuration drives topology resolution, noise-profile
materialization, calibration and tomography simulation, optional
readout-error mitigation, per-edge negativity analysis with bootstrap
confidence intervals, and report assembly. Every random draw comes from a
stream derived from the master seed with a fixed spawn key per stage and
edge, so reruns are byte-identical and per-edge work can fan out across a
process pool without changing results.

Spawn keys: (0,) noise profile, (1, s) calibration snapshot s,
(2, e) tomography sampling for edge index e, (3, e, m) bootstrap for edge e
in mode m (0 = corrected, 1 = raw).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    EntanglementGraph,
    PairResult,
    build_entanglement_graph,
    connected_components,
    max_projected_negativity,
    projected_pair_states,
)
from .density import DensityMatrix
from .qrem import CalibrationSet, CalibrationSnapshot, qrem_correct
from .stabilizer import (
    CountsTable,
    GraphStateSampler,
    NoiseModel,
    run_calibration_circuits,
)
from .stats import BootstrapConfig, BootstrapResult, bootstrap_negativity
from .tomography import (
    MAX_SUBSET,
    TomographyDataset,
    reconstruct_density_matrix,
    tomography_settings,
)
from .topology import (
    CzSchedule,
    DeviceTopology,
    TopologyError,
    generate_heavy_hex,
    load_preset,
    load_topology,
    schedule_cz_layers,
)

# Readout-rate profiles reported for the two reference devices: mean and
# standard deviation of the per-qubit readout error rate.
NOISE_PROFILES = {
    "rochester": {"mode": "normal", "mean": 0.126, "std": 0.093},
    "manhattan": {"mode": "normal", "mean": 0.021, "std": 0.015},
}

MODE_QREM = "qrem"
MODE_RAW = "raw"


class ConfigError(ValueError):
    """Raised for invalid experiment configurations."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run.

    topology: {"preset": name} or {"rows": r, "cols": c} or {"file": path}.
    noise: {"readout": {...}, "depolarizing_1q": f, "depolarizing_2q": f,
        "calibration_drift_std": f}; readout modes are "fixed"
        (p10/p01 floats), "normal" (truncated normal mean/std/low/high),
        "per_qubit" (explicit lists), or "profile" (named preset).
    qrem: "on", "off" or "both".
    persist: "none", "summary" (config/topology/noise/report) or "full"
        (adds every counts table, calibration file, reconstructed matrix and
        bootstrap diagnostic).
    """

    topology: dict
    noise: dict = field(default_factory=dict)
    shots_tomography: int = 4000
    shots_calibration: int = 8192
    calibration_snapshots: int = 1
    qrem: str = "both"
    bootstrap: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str | None = None
    workers: int = 1
    persist: str = "summary"
    name: str = "experiment"

    def __post_init__(self):
        if self.qrem not in ("on", "off", "both"):
            raise ConfigError("qrem must be 'on', 'off' or 'both'")
        if self.shots_tomography < 1 or self.shots_calibration < 1:
            raise ConfigError("shot counts must be >= 1")
        if self.calibration_snapshots < 1:
            raise ConfigError("calibration_snapshots must be >= 1")
        if self.persist not in ("none", "summary", "full"):
            raise ConfigError("persist must be 'none', 'summary' or 'full'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not isinstance(self.topology, dict) or not self.topology:
            raise ConfigError("topology section is required")
        if "file" in self.topology and not Path(self.topology["file"]).exists():
            raise ConfigError(f"topology file {self.topology['file']} does not exist")

    @property
    def modes(self) -> list[str]:
        if self.qrem == "on":
            return [MODE_QREM]
        if self.qrem == "off":
            return [MODE_RAW]
        return [MODE_QREM, MODE_RAW]

    def bootstrap_config(self, seed=None) -> BootstrapConfig:
        doc = dict(self.bootstrap)
        return BootstrapConfig(
            n_replicates=int(doc.get("replicates", 1000)),
            confidence=float(doc.get("confidence", 0.95)),
            seed=seed,
            calibration_mode=doc.get(
                "calibration_mode",
                "multi" if self.calibration_snapshots > 1 else "single",
            ),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "topology": dict(self.topology),
            "noise": dict(self.noise),
            "shots_tomography": self.shots_tomography,
            "shots_calibration": self.shots_calibration,
            "calibration_snapshots": self.calibration_snapshots,
            "qrem": self.qrem,
            "bootstrap": dict(self.bootstrap),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "persist": self.persist,
        }

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "ExperimentConfig":
        known = {
            "name", "topology", "noise", "shots_tomography", "shots_calibration",
            "calibration_snapshots", "qrem", "bootstrap", "seed", "output_dir",
            "workers", "persist",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**merged)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc, **overrides)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def resolve_topology(spec: dict) -> tuple[DeviceTopology, CzSchedule]:
    """Topology plus its CZ schedule from a config topology section."""
    if "preset" in spec:
        topo = load_preset(spec["preset"])
    elif "file" in spec:
        topo = load_topology(spec["file"])
    elif "rows" in spec and "cols" in spec:
        topo = generate_heavy_hex(int(spec["rows"]), int(spec["cols"]))
    else:
        raise ConfigError(
            "topology must give a preset, a file, or rows/cols dimensions"
        )
    return topo, schedule_cz_layers(topo)


def _truncated_normal(rng, mean, std, low, high, size) -> np.ndarray:
    """Rejection-sampled normal draws clipped to an interval."""
    out = np.empty(size)
    remaining = np.arange(size)
    while remaining.size:
        draw = rng.normal(mean, std, remaining.size)
        good = (draw >= low) & (draw <= high)
        out[remaining[good]] = draw[good]
        remaining = remaining[~good]
    return out


def build_noise_model(noise_spec: dict, n_qubits: int, rng) -> NoiseModel:
    """Materialize per-qubit rates from a config noise section."""
    readout = dict(noise_spec.get("readout", {}))
    if "profile" in readout:
        profile = NOISE_PROFILES.get(readout["profile"])
        if profile is None:
            raise ConfigError(f"unknown noise profile {readout['profile']!r}")
        readout = {**profile, **{k: v for k, v in readout.items() if k != "profile"}}
    mode = readout.get("mode", "fixed")
    if mode == "fixed":
        p10 = np.full(n_qubits, float(readout.get("p10", 0.0)))
        p01 = np.full(n_qubits, float(readout.get("p01", readout.get("p10", 0.0))))
    elif mode == "normal":
        rates = _truncated_normal(
            rng,
            float(readout["mean"]),
            float(readout["std"]),
            float(readout.get("low", 0.001)),
            float(readout.get("high", 0.45)),
            n_qubits,
        )
        p10 = rates
        p01 = rates.copy()
    elif mode == "per_qubit":
        p10 = np.asarray(readout["p10"], dtype=float)
        p01 = np.asarray(readout.get("p01", readout["p10"]), dtype=float)
        if len(p10) != n_qubits or len(p01) != n_qubits:
            raise ConfigError("per_qubit readout lists must cover every qubit")
    elif mode == "file":
        path = Path(readout["path"])
        if not path.exists():
            raise ConfigError(f"readout rates file {path} does not exist")
        doc = json.loads(path.read_text())
        p10 = np.asarray(doc["p10"], dtype=float)
        p01 = np.asarray(doc.get("p01", doc["p10"]), dtype=float)
        if len(p10) != n_qubits or len(p01) != n_qubits:
            raise ConfigError("readout rates file must cover every qubit")
    else:
        raise ConfigError(f"unknown readout mode {mode!r}")
    return NoiseModel(
        p10,
        p01,
        depolarizing_1q=float(noise_spec.get("depolarizing_1q", 0.0)),
        depolarizing_2q=float(noise_spec.get("depolarizing_2q", 0.0)),
    )


def simulate_calibration(
    noise: NoiseModel, n_qubits: int, shots: int, n_snapshots: int, seed: int,
    drift_std: float = 0.0,
) -> CalibrationSet:
    """Run the two calibration circuits for each snapshot.

    With drift_std > 0 each snapshot perturbs the true rates with a clipped
    Gaussian, emulating the slow parameter drift that motivates gathering
    multiple calibration passes.
    """
    snapshots = []
    for s in range(n_snapshots):
        rng = _stream(seed, 1, s)
        snap_noise = noise
        if drift_std > 0:
            p10 = np.clip(noise.p10 + rng.normal(0, drift_std, noise.n_qubits), 0.0, 0.49)
            p01 = np.clip(noise.p01 + rng.normal(0, drift_std, noise.n_qubits), 0.0, 0.49)
            snap_noise = NoiseModel(
                p10, p01, noise.depolarizing_1q, noise.depolarizing_2q
            )
        zeros = run_calibration_circuits("0" * n_qubits, shots, snap_noise, rng)
        ones = run_calibration_circuits("1" * n_qubits, shots, snap_noise, rng)
        snapshots.append(CalibrationSnapshot.from_counts(f"snapshot-{s:03d}", zeros, ones))
    return CalibrationSet(tuple(snapshots))


def simulate_edge_tomography(
    sampler: GraphStateSampler,
    subset: tuple[int, ...],
    shots: int,
    noise: NoiseModel,
    rng,
) -> TomographyDataset:
    """All 3**k settings for one pair-first subset."""
    tables = tuple(
        sampler.counts(subset, setting, shots, noise, rng)
        for setting in tomography_settings(len(subset))
    )
    return TomographyDataset(subset, tables)


def _point_estimate_detail(dataset, calibration, apply_qrem, calibration_mode):
    """Point-estimate reconstruction with projection diagnostics."""
    freqs = dataset.frequency_matrix()
    if apply_qrem:
        if calibration_mode == "multi" and len(calibration) > 1:
            mats = calibration.mean_matrices_for(dataset.qubits)
        else:
            mats = calibration.matrices_for(dataset.qubits, 0)
        freqs = qrem_correct(freqs, mats)
    rho = reconstruct_density_matrix(dataset, frequencies=freqs)
    value, best, table = max_projected_negativity(rho.matrix)
    m = dataset.n_qubits - 2
    _, states = projected_pair_states(rho.matrix, m)
    if best is None:
        pair_state = np.full((4, 4), np.nan, dtype=complex)
        prob = 0.0
    else:
        z = int(best, 2) if best else 0
        pair_state = states[z]
        prob = table[best]["probability"]
    return {
        "value": value,
        "best": best,
        "probability": prob,
        "table": table,
        "rho": rho,
        "pair_state": DensityMatrix(pair_state, dataset.pair),
    }


def analyze_edge(
    dataset: TomographyDataset,
    calibration: CalibrationSet,
    modes: list[str],
    bootstrap: dict,
    seed: int,
    edge_index: int,
    edge,
) -> dict:
    """Bootstrap and point-estimate analysis of one edge's dataset."""
    out = {"edge": tuple(edge), "dataset": dataset, "modes": {}}
    for mode_idx, mode in enumerate(modes):
        apply_qrem = mode == MODE_QREM
        boot_cfg = BootstrapConfig(**bootstrap)
        try:
            boot = bootstrap_negativity(
                dataset,
                calibration,
                boot_cfg,
                apply_qrem=apply_qrem,
                rng=_stream(seed, 3, edge_index, mode_idx),
            )
            detail = _point_estimate_detail(
                dataset, calibration, apply_qrem, boot_cfg.calibration_mode
            )
        except Exception as exc:
            raise type(exc)(
                f"edge {tuple(edge)} qubits {dataset.qubits} [{mode}]: {exc}"
            ) from exc
        result = PairResult.from_estimates(
            edge,
            detail["value"],
            boot.lower,
            boot.upper,
            detail["best"],
            detail["probability"],
        )
        out["modes"][mode] = {"result": result, "bootstrap": boot, "detail": detail}
    return out


def _edge_task(payload: dict) -> dict:
    """Simulate and analyze a single edge (worker-safe)."""
    topology = DeviceTopology.from_dict(payload["topology"])
    schedule = CzSchedule.from_dict(payload["schedule"])
    noise = NoiseModel.from_dict(payload["noise"])
    seed = payload["seed"]
    edge_idx = payload["edge_index"]

    sampler = GraphStateSampler(topology, schedule)
    dataset = simulate_edge_tomography(
        sampler, tuple(payload["subset"]), payload["shots"], noise,
        _stream(seed, 2, edge_idx),
    )
    return analyze_edge(
        dataset,
        payload["calibration"],
        payload["modes"],
        payload["bootstrap"],
        seed,
        edge_idx,
        payload["edge"],
    )


def summarize_results(results: list[PairResult], graph, components) -> dict:
    """Aggregate statistics; exactly recomputable from the per-edge records."""
    negs = np.array([r.negativity for r in results], dtype=float)
    return {
        "total_pairs": len(results),
        "entangled_pairs": int(sum(r.entangled for r in results)),
        "mean_negativity": float(negs.mean()) if negs.size else 0.0,
        "std_negativity": float(negs.std()) if negs.size else 0.0,
        "largest_component": len(components[0]) if components else 0,
        "spans_device": bool(components and len(components[0]) == graph.n_qubits),
    }


@dataclass
class ModeResult:
    results: list[PairResult]
    graph: EntanglementGraph
    components: list[list[int]]
    summary: dict
    bootstraps: dict[tuple[int, int], BootstrapResult]
    pair_states: dict[tuple[int, int], DensityMatrix]
    projection_tables: dict[tuple[int, int], dict]

    def best_edge(self) -> tuple[int, int]:
        return max(self.results, key=lambda r: (r.negativity, r.edge)).edge

    def worst_edge(self) -> tuple[int, int]:
        return min(self.results, key=lambda r: (r.negativity, r.edge)).edge


@dataclass
class ExperimentReport:
    """Full experiment outcome: per-edge records plus provenance."""

    name: str
    config: dict
    seed: int
    topology: DeviceTopology
    schedule: CzSchedule
    noise: NoiseModel
    modes: dict[str, ModeResult]
    created: str
    duration_s: float

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "created": self.created,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "config": self.config,
            "topology": self.topology.to_dict(),
            "schedule": self.schedule.to_dict(),
            "noise": self.noise.to_dict(),
            "modes": {},
        }
        for mode, res in self.modes.items():
            doc["modes"][mode] = {
                "results": [r.to_dict() for r in res.results],
                "summary": res.summary,
                "components": res.components,
                "entangled_edges": [list(e) for e in res.graph.edges],
            }
        return doc


def run_pipeline(config: ExperimentConfig) -> ExperimentReport:
    """Execute the full experiment described by ``config``.

    Deterministic for a fixed seed and config (including workers > 1, since
    every edge owns its own derived random stream). Persists intermediate
    artifacts under config.output_dir according to config.persist.

    Raises:
        ConfigError / TopologyError: invalid configuration (CLI exit 1).
        Other exceptions propagate with edge/qubit context (CLI exit 2).
    """
    t0 = time.time()
    topology, schedule = resolve_topology(config.topology)
    noise = build_noise_model(config.noise, topology.n_qubits, _stream(config.seed, 0))
    calibration = simulate_calibration(
        noise,
        topology.n_qubits,
        config.shots_calibration,
        config.calibration_snapshots,
        config.seed,
        drift_std=float(config.noise.get("calibration_drift_std", 0.0)),
    )

    subsets = {}
    for edge in topology.edges:
        subset = topology.tomography_subset(edge)
        if len(subset) > MAX_SUBSET:
            raise TopologyError(
                f"edge {edge} needs tomography on {len(subset)} qubits "
                f"(> {MAX_SUBSET}); adjacent degree-3 qubits are unsupported"
            )
        subsets[edge] = subset

    boot_cfg = config.bootstrap_config()
    payloads = [
        {
            "topology": topology.to_dict(),
            "schedule": schedule.to_dict(),
            "noise": noise.to_dict(),
            "calibration": calibration,
            "seed": config.seed,
            "edge_index": i,
            "edge": edge,
            "subset": subsets[edge],
            "shots": config.shots_tomography,
            "modes": config.modes,
            "bootstrap": {
                "n_replicates": boot_cfg.n_replicates,
                "confidence": boot_cfg.confidence,
                "calibration_mode": boot_cfg.calibration_mode,
            },
        }
        for i, edge in enumerate(topology.edges)
    ]

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            edge_outputs = list(pool.map(_edge_task, payloads))
    else:
        edge_outputs = [_edge_task(p) for p in payloads]

    loaded = {"topology": topology, "schedule": schedule, "noise": noise}
    report = _assemble_report(
        config, loaded, config.modes, edge_outputs, duration_s=round(time.time() - t0, 3)
    )

    if config.output_dir and config.persist != "none":
        persist_artifacts(
            config, report, calibration,
            {out["edge"]: out["dataset"] for out in edge_outputs},
            edge_outputs,
        )
    return report


def _edge_tag(edge) -> str:
    return f"{edge[0]:02d}-{edge[1]:02d}"


def persist_artifacts(config, report, calibration, datasets, edge_outputs) -> None:
    """Write intermediate artifacts; extent controlled by config.persist."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=1))
    (out / "topology.json").write_text(json.dumps(report.topology.to_dict(), indent=1))
    (out / "schedule.json").write_text(json.dumps(report.schedule.to_dict(), indent=1))
    (out / "noise.json").write_text(
        json.dumps({"seed": config.seed, **report.noise.to_dict()}, indent=1)
    )
    if config.persist != "full":
        return
    cal_dir = out / "calibration"
    cal_dir.mkdir(exist_ok=True)
    for i, snap in enumerate(calibration.snapshots):
        snap.save(cal_dir / f"snapshot_{i:03d}.json")
        if snap.zero_counts is not None:
            snap.zero_counts.save(cal_dir / f"counts_zeros_{i:03d}.json")
            snap.one_counts.save(cal_dir / f"counts_ones_{i:03d}.json")
    for edge, dataset in datasets.items():
        dataset.save_dir(
            out / "tomography" / f"edge_{_edge_tag(edge)}",
            extra_manifest={"pair": list(edge), "seed": config.seed},
        )
    mat_dir = out / "matrices"
    boot_dir = out / "bootstrap"
    mat_dir.mkdir(exist_ok=True)
    boot_dir.mkdir(exist_ok=True)
    for output in edge_outputs:
        edge = output["edge"]
        for mode, bundle in output["modes"].items():
            tag = f"edge_{_edge_tag(edge)}_{mode}"
            (mat_dir / f"{tag}.json").write_text(
                json.dumps(bundle["detail"]["rho"].to_dict())
            )
            (boot_dir / f"{tag}.json").write_text(
                json.dumps(bundle["bootstrap"].to_dict())
            )
    _persist_analysis(out, report)


def _persist_analysis(out: Path, report: "ExperimentReport") -> None:
    analysis_dir = out / "analysis"
    analysis_dir.mkdir(exist_ok=True)
    for mode, res in report.modes.items():
        doc = {
            "seed": report.seed,
            "mode": mode,
            "results": [r.to_dict() for r in res.results],
            "summary": res.summary,
            "components": res.components,
        }
        (analysis_dir / f"pairs_{mode}.json").write_text(json.dumps(doc, indent=1))


# -- staged execution over persisted artifacts ------------------------------


def simulate_experiment(config: ExperimentConfig) -> dict:
    """Run only the simulation stages, persisting every artifact.

    Writes config, topology, schedule, noise, calibration counts and the
    per-edge tomography datasets to config.output_dir so the qrem,
    tomography, analyze and report stages can pick them up later.
    """
    if not config.output_dir:
        raise ConfigError("simulate requires an output_dir")
    topology, schedule = resolve_topology(config.topology)
    noise = build_noise_model(config.noise, topology.n_qubits, _stream(config.seed, 0))
    calibration = simulate_calibration(
        noise,
        topology.n_qubits,
        config.shots_calibration,
        config.calibration_snapshots,
        config.seed,
        drift_std=float(config.noise.get("calibration_drift_std", 0.0)),
    )
    sampler = GraphStateSampler(topology, schedule)
    datasets = {}
    for i, edge in enumerate(topology.edges):
        subset = topology.tomography_subset(edge)
        if len(subset) > MAX_SUBSET:
            raise TopologyError(
                f"edge {edge} needs tomography on {len(subset)} qubits (> {MAX_SUBSET})"
            )
        datasets[edge] = simulate_edge_tomography(
            sampler, subset, config.shots_tomography, noise, _stream(config.seed, 2, i)
        )

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=1))
    (out / "topology.json").write_text(json.dumps(topology.to_dict(), indent=1))
    (out / "schedule.json").write_text(json.dumps(schedule.to_dict(), indent=1))
    (out / "noise.json").write_text(
        json.dumps({"seed": config.seed, **noise.to_dict()}, indent=1)
    )
    cal_dir = out / "calibration"
    cal_dir.mkdir(exist_ok=True)
    for i, snap in enumerate(calibration.snapshots):
        snap.zero_counts.save(cal_dir / f"counts_zeros_{i:03d}.json")
        snap.one_counts.save(cal_dir / f"counts_ones_{i:03d}.json")
        snap.save(cal_dir / f"snapshot_{i:03d}.json")
    for edge, dataset in datasets.items():
        dataset.save_dir(
            out / "tomography" / f"edge_{_edge_tag(edge)}",
            extra_manifest={"pair": list(edge), "seed": config.seed},
        )
    return {
        "topology": topology,
        "schedule": schedule,
        "noise": noise,
        "calibration": calibration,
        "datasets": datasets,
    }


def load_experiment_dir(out_dir) -> dict:
    """Load persisted simulation artifacts back into memory."""
    out = Path(out_dir)
    if not (out / "config.json").exists():
        raise ConfigError(f"{out} does not contain a persisted experiment")
    config = ExperimentConfig.from_dict(json.loads((out / "config.json").read_text()))
    topology = DeviceTopology.from_dict(
        json.loads((out / "topology.json").read_text())
    )
    schedule = CzSchedule.from_dict(json.loads((out / "schedule.json").read_text()))
    noise_doc = json.loads((out / "noise.json").read_text())
    noise_doc.pop("seed", None)
    noise = NoiseModel.from_dict(noise_doc)
    cal_dir = out / "calibration"
    snapshots = []
    for zero_path in sorted(cal_dir.glob("counts_zeros_*.json")):
        idx = zero_path.stem.split("_")[-1]
        zeros = CountsTable.load(zero_path)
        ones = CountsTable.load(cal_dir / f"counts_ones_{idx}.json")
        snapshots.append(
            CalibrationSnapshot.from_counts(f"snapshot-{idx}", zeros, ones)
        )
    calibration = CalibrationSet(tuple(snapshots)) if snapshots else None
    datasets = {}
    for edge_dir in sorted((out / "tomography").glob("edge_*")):
        dataset = TomographyDataset.load_dir(edge_dir)
        datasets[dataset.pair] = dataset
    return {
        "config": config,
        "topology": topology,
        "schedule": schedule,
        "noise": noise,
        "calibration": calibration,
        "datasets": datasets,
    }


def analyze_experiment(
    loaded: dict, modes: list[str] | None = None, bootstrap: dict | None = None
) -> "ExperimentReport":
    """Analyze previously simulated artifacts and persist the results."""
    config: ExperimentConfig = loaded["config"]
    topology: DeviceTopology = loaded["topology"]
    modes = modes or config.modes
    boot_cfg = config.bootstrap_config()
    boot = {
        "n_replicates": boot_cfg.n_replicates,
        "confidence": boot_cfg.confidence,
        "calibration_mode": boot_cfg.calibration_mode,
    }
    if bootstrap:
        boot.update(bootstrap)
    edge_outputs = []
    for i, edge in enumerate(topology.edges):
        if edge not in loaded["datasets"]:
            raise ConfigError(f"missing tomography dataset for edge {edge}")
        edge_outputs.append(
            analyze_edge(
                loaded["datasets"][edge],
                loaded["calibration"],
                modes,
                boot,
                config.seed,
                i,
                edge,
            )
        )
    report = _assemble_report(config, loaded, modes, edge_outputs, duration_s=0.0)
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _persist_analysis(out, report)
        mat_dir = out / "matrices"
        boot_dir = out / "bootstrap"
        mat_dir.mkdir(exist_ok=True)
        boot_dir.mkdir(exist_ok=True)
        for output in edge_outputs:
            for mode, bundle in output["modes"].items():
                tag = f"edge_{_edge_tag(output['edge'])}_{mode}"
                (mat_dir / f"{tag}.json").write_text(
                    json.dumps(bundle["detail"]["rho"].to_dict())
                )
                (boot_dir / f"{tag}.json").write_text(
                    json.dumps(bundle["bootstrap"].to_dict())
                )
    return report


def load_analysis_dir(out_dir) -> "ExperimentReport":
    """Rebuild a report from persisted analysis results without re-running.

    Uses the per-mode pair records plus the persisted reconstructed matrices
    (for the extremal-pair density dumps); bootstrap diagnostics stay on
    disk.
    """
    out = Path(out_dir)
    loaded = load_experiment_dir(out)
    analysis_dir = out / "analysis"
    if not analysis_dir.exists():
        raise ConfigError(f"no analysis results under {out}; run analyze first")
    topology = loaded["topology"]
    modes: dict[str, ModeResult] = {}
    for path in sorted(analysis_dir.glob("pairs_*.json")):
        doc = json.loads(path.read_text())
        mode = doc["mode"]
        results = [PairResult.from_dict(r) for r in doc["results"]]
        graph = build_entanglement_graph(results, topology)
        components = connected_components(graph)
        pair_states = {}
        for r in results:
            mat_path = out / "matrices" / f"edge_{_edge_tag(r.edge)}_{mode}.json"
            if not mat_path.exists():
                continue
            rho = DensityMatrix.from_dict(json.loads(mat_path.read_text()))
            m = rho.n_qubits - 2
            _, states = projected_pair_states(rho.matrix, m)
            z = int(r.best_projection, 2) if r.best_projection else 0
            pair_states[r.edge] = DensityMatrix(states[z], rho.qubits[:2])
        modes[mode] = ModeResult(
            results=results,
            graph=graph,
            components=components,
            summary=doc["summary"],
            bootstraps={},
            pair_states=pair_states,
            projection_tables={},
        )
    config = loaded["config"]
    return ExperimentReport(
        name=config.name,
        config=config.to_dict(),
        seed=config.seed,
        topology=topology,
        schedule=loaded["schedule"],
        noise=loaded["noise"],
        modes=modes,
        created=time.strftime("%Y-%m-%dT%H:%M:%S"),
        duration_s=0.0,
    )


def _assemble_report(config, loaded, modes_list, edge_outputs, duration_s):
    topology = loaded["topology"]
    modes: dict[str, ModeResult] = {}
    for mode in modes_list:
        results = [out["modes"][mode]["result"] for out in edge_outputs]
        graph = build_entanglement_graph(results, topology)
        components = connected_components(graph)
        modes[mode] = ModeResult(
            results=results,
            graph=graph,
            components=components,
            summary=summarize_results(results, graph, components),
            bootstraps={
                out["edge"]: out["modes"][mode]["bootstrap"] for out in edge_outputs
            },
            pair_states={
                out["edge"]: out["modes"][mode]["detail"]["pair_state"]
                for out in edge_outputs
            },
            projection_tables={
                out["edge"]: out["modes"][mode]["detail"]["table"]
                for out in edge_outputs
            },
        )
    return ExperimentReport(
        name=config.name,
        config=config.to_dict(),
        seed=config.seed,
        topology=topology,
        schedule=loaded["schedule"],
        noise=loaded["noise"],
        modes=modes,
        created=time.strftime("%Y-%m-%dT%H:%M:%S"),
        duration_s=duration_s,
    )
