"""Pipeline orchestration, persistence, reporting and CLI tests."""

import json

import numpy as np
import pytest

from hexent.analysis import PairResult
from hexent.cli import main as cli_main
from hexent.pipeline import (
    ConfigError,
    ExperimentConfig,
    analyze_experiment,
    build_noise_model,
    load_experiment_dir,
    resolve_topology,
    run_pipeline,
    simulate_experiment,
    summarize_results,
)
from hexent.report import emit_report
from hexent.topology import load_preset


def small_config(tmp_path=None, **kw):
    base = dict(
        name="tiny",
        topology={"preset": "hex12"},
        noise={"readout": {"mode": "fixed", "p10": 0.04, "p01": 0.03}},
        shots_tomography=300,
        shots_calibration=1000,
        qrem="both",
        bootstrap={"replicates": 120},
        seed=2,
        persist="none",
    )
    if tmp_path is not None:
        base["output_dir"] = str(tmp_path / "out")
        base["persist"] = "full"
    base.update(kw)
    return ExperimentConfig(**base)


# -- config --------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(topology={"preset": "hex12"}, qrem="maybe")
    with pytest.raises(ConfigError):
        ExperimentConfig(topology={"preset": "hex12"}, shots_tomography=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(topology={})
    with pytest.raises(ConfigError):
        ExperimentConfig(topology={"file": "/definitely/not/here.json"})
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"topology": {"preset": "hex12"}, "bogus": 1})


def test_config_file_roundtrip(tmp_path):
    cfg = small_config()
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_dict()))
    loaded = ExperimentConfig.from_file(path)
    assert loaded == cfg
    overridden = ExperimentConfig.from_file(path, seed=9)
    assert overridden.seed == 9


def test_modes_from_qrem_flag():
    assert small_config(qrem="on").modes == ["qrem"]
    assert small_config(qrem="off").modes == ["raw"]
    assert small_config(qrem="both").modes == ["qrem", "raw"]


# -- noise profiles --------------------------------------------------------------


def test_fixed_noise_profile():
    noise = build_noise_model(
        {"readout": {"mode": "fixed", "p10": 0.1, "p01": 0.2}}, 3, np.random.default_rng(0)
    )
    assert np.allclose(noise.p10, 0.1) and np.allclose(noise.p01, 0.2)


def test_normal_noise_profile_truncation():
    spec = {"readout": {"mode": "normal", "mean": 0.126, "std": 0.093}}
    noise = build_noise_model(spec, 500, np.random.default_rng(1))
    assert noise.p10.min() >= 0.001
    assert noise.p10.max() <= 0.45
    assert np.allclose(noise.p10, noise.p01)
    assert noise.p10.mean() == pytest.approx(0.126, abs=0.02)


def test_named_noise_profiles():
    spec = {"readout": {"profile": "manhattan"}}
    noise = build_noise_model(spec, 200, np.random.default_rng(2))
    assert noise.p10.mean() == pytest.approx(0.021, abs=0.01)
    with pytest.raises(ConfigError, match="profile"):
        build_noise_model({"readout": {"profile": "nosuch"}}, 2, np.random.default_rng(0))


def test_per_qubit_noise_profile():
    spec = {"readout": {"mode": "per_qubit", "p10": [0.1, 0.2], "p01": [0.0, 0.05]}}
    noise = build_noise_model(spec, 2, np.random.default_rng(0))
    assert noise.p10.tolist() == [0.1, 0.2]
    with pytest.raises(ConfigError):
        build_noise_model(spec, 3, np.random.default_rng(0))


def test_noise_rates_from_file(tmp_path):
    path = tmp_path / "rates.json"
    path.write_text(json.dumps({"p10": [0.1, 0.3], "p01": [0.2, 0.0]}))
    spec = {"readout": {"mode": "file", "path": str(path)}}
    noise = build_noise_model(spec, 2, np.random.default_rng(0))
    assert noise.p10.tolist() == [0.1, 0.3]
    assert noise.p01.tolist() == [0.2, 0.0]
    with pytest.raises(ConfigError, match="does not exist"):
        build_noise_model(
            {"readout": {"mode": "file", "path": str(tmp_path / "no.json")}},
            2,
            np.random.default_rng(0),
        )


def test_resolve_topology_variants(tmp_path):
    topo, sched = resolve_topology({"rows": 1, "cols": 1})
    assert topo.n_qubits == 14 and sched.covers(topo)
    with pytest.raises(ConfigError):
        resolve_topology({"shape": "weird"})


# -- end-to-end -------------------------------------------------------------------


def test_pipeline_noiseless_spanning():
    cfg = small_config(noise={}, shots_tomography=400, seed=1)
    report = run_pipeline(cfg)
    for mode, res in report.modes.items():
        assert res.summary["entangled_pairs"] == 12
        assert res.summary["spans_device"]


def test_pipeline_seed_reproducibility():
    cfg = small_config()
    a = run_pipeline(cfg)
    b = run_pipeline(cfg)
    for mode in a.modes:
        recs_a = json.dumps([r.to_dict() for r in a.modes[mode].results])
        recs_b = json.dumps([r.to_dict() for r in b.modes[mode].results])
        assert recs_a == recs_b


def test_pipeline_summary_recomputable():
    cfg = small_config()
    report = run_pipeline(cfg)
    for mode, res in report.modes.items():
        again = summarize_results(res.results, res.graph, res.components)
        assert again == res.summary


def test_workers_do_not_change_results():
    cfg1 = small_config(qrem="on")
    cfg2 = small_config(qrem="on", workers=2)
    a = run_pipeline(cfg1)
    b = run_pipeline(cfg2)
    recs_a = [r.to_dict() for r in a.modes["qrem"].results]
    recs_b = [r.to_dict() for r in b.modes["qrem"].results]
    assert recs_a == recs_b


def test_qrem_matches_raw_on_noiseless_data():
    cfg = small_config(noise={}, shots_tomography=400, seed=3)
    report = run_pipeline(cfg)
    for ra, rb in zip(report.modes["qrem"].results, report.modes["raw"].results):
        assert ra.negativity == pytest.approx(rb.negativity, abs=1e-9)


def test_multi_snapshot_drift_pipeline():
    cfg = small_config(
        noise={
            "readout": {"mode": "fixed", "p10": 0.06, "p01": 0.05},
            "calibration_drift_std": 0.01,
        },
        calibration_snapshots=3,
        qrem="on",
        seed=6,
    )
    report = run_pipeline(cfg)
    assert report.modes["qrem"].summary["entangled_pairs"] == 12
    # drift mode defaults to the multi-snapshot bootstrap
    assert cfg.bootstrap_config().calibration_mode == "multi"


def test_oversized_tomography_subset_rejected():
    # two adjacent degree-3 hubs need a 6-qubit group, which local
    # tomography does not support
    from hexent.topology import DeviceTopology, TopologyError

    topo = DeviceTopology(6, ((0, 1), (0, 2), (0, 3), (1, 4), (1, 5)), name="hubs")
    doc = topo.to_dict()
    cfg = small_config(topology={"rows": 1, "cols": 1})
    import json as _json
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        _json.dump(doc, fh)
        path = fh.name
    bad = small_config(topology={"file": path})
    with pytest.raises(TopologyError, match="6 qubits"):
        run_pipeline(bad)


def test_persistence_tree(tmp_path):
    cfg = small_config(tmp_path)
    run_pipeline(cfg)
    out = tmp_path / "out"
    assert json.loads((out / "config.json").read_text())["seed"] == 2
    assert (out / "topology.json").exists()
    assert (out / "schedule.json").exists()
    assert json.loads((out / "noise.json").read_text())["seed"] == 2
    assert (out / "calibration" / "snapshot_000.json").exists()
    assert (out / "calibration" / "counts_zeros_000.json").exists()
    edge_dirs = sorted((out / "tomography").glob("edge_*"))
    assert len(edge_dirs) == 12
    manifest = json.loads((edge_dirs[0] / "manifest.json").read_text())
    assert manifest["shots"] == 300 and manifest["seed"] == 2
    assert len(list(edge_dirs[0].glob("setting_*.json"))) == 81
    assert len(list((out / "matrices").glob("*.json"))) == 24
    assert len(list((out / "bootstrap").glob("*.json"))) == 24
    assert (out / "analysis" / "pairs_qrem.json").exists()


def test_staged_analysis_matches_direct(tmp_path):
    cfg = small_config(tmp_path)
    direct = run_pipeline(cfg)
    loaded = load_experiment_dir(tmp_path / "out")
    staged = analyze_experiment(loaded)
    for mode in direct.modes:
        a = [r.to_dict() for r in direct.modes[mode].results]
        b = [r.to_dict() for r in staged.modes[mode].results]
        assert a == b


def test_simulate_experiment_writes_inputs(tmp_path):
    cfg = small_config(tmp_path)
    artifacts = simulate_experiment(cfg)
    assert len(artifacts["datasets"]) == 12
    loaded = load_experiment_dir(tmp_path / "out")
    assert loaded["topology"] == artifacts["topology"]
    assert len(loaded["datasets"]) == 12


# -- report emission -----------------------------------------------------------------


def synthetic_report(topology_name="manhattan", entangled=True):
    topo = load_preset(topology_name)
    cfg = ExperimentConfig(
        topology={"preset": topology_name}, qrem="on", seed=0, persist="none"
    )
    from hexent.density import DensityMatrix
    from hexent.pipeline import ModeResult, ExperimentReport
    from hexent.analysis import build_entanglement_graph, connected_components

    results = [
        PairResult.from_estimates(e, 0.4, 0.3 if entangled else -0.1, 0.45, "00", 0.25)
        for e in topo.edges
    ]
    graph = build_entanglement_graph(results, topo)
    comps = connected_components(graph)
    bell = np.zeros((4, 4), dtype=complex)
    bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
    states = {e: DensityMatrix(bell, e) for e in topo.edges}
    mode = ModeResult(
        results=results,
        graph=graph,
        components=comps,
        summary=summarize_results(results, graph, comps),
        bootstraps={},
        pair_states=states,
        projection_tables={e: {} for e in topo.edges},
    )
    return ExperimentReport(
        name="synthetic",
        config=cfg.to_dict(),
        seed=0,
        topology=topo,
        schedule=resolve_topology({"preset": topology_name})[1],
        noise=build_noise_model({}, topo.n_qubits, np.random.default_rng(0)),
        modes={"qrem": mode},
        created="2026-01-01T00:00:00",
        duration_s=0.0,
    )


def test_report_files_for_full_device(tmp_path):
    report = synthetic_report()
    files = emit_report(report, tmp_path)
    names = {f.name for f in files}
    assert {"report.json", "pairs.csv", "entanglement_qrem.dot",
            "negativities.png", "graph_qrem.png"} <= names
    dot = (tmp_path / "entanglement_qrem.dot").read_text()
    node_lines = [l for l in dot.splitlines() if l.strip().endswith('!"];')]
    assert len(node_lines) == 65
    assert dot.count(" -- ") == 72
    csv_text = (tmp_path / "pairs.csv").read_text().strip().splitlines()
    assert len(csv_text) == 1 + 72
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["seed"] == 0
    assert doc["modes"]["qrem"]["summary"]["entangled_pairs"] == 72


def test_report_handles_undetected_edges(tmp_path):
    report = synthetic_report(entangled=False)
    emit_report(report, tmp_path)
    dot = (tmp_path / "entanglement_qrem.dot").read_text()
    assert "lightgray" in dot
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["modes"]["qrem"]["entangled_edges"] == []


def test_density_dump_is_plot_ready(tmp_path):
    report = synthetic_report()
    emit_report(report, tmp_path, formats=("json",))
    doc = json.loads((tmp_path / "density_qrem_best.json").read_text())
    assert doc["dim"] == 4
    assert len(doc["real"]) == 16 and len(doc["imag"]) == 16
    assert doc["kind"] == "best"


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError, match="formats"):
        emit_report(synthetic_report(), tmp_path, formats=("pdf",))


# -- CLI ---------------------------------------------------------------------------


def test_cli_topology(tmp_path, capsys):
    rc = cli_main(["topology", "--preset", "hex12", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "12 qubits" in out and "2 CZ layers" in out
    assert (tmp_path / "topology.json").exists()


def test_cli_full_cycle(tmp_path, capsys):
    config = {
        "name": "cli",
        "topology": {"preset": "hex12"},
        "noise": {"readout": {"mode": "fixed", "p10": 0.05}},
        "shots_tomography": 200,
        "shots_calibration": 600,
        "qrem": "both",
        "bootstrap": {"replicates": 110},
        "seed": 3,
        "output_dir": str(tmp_path / "out"),
        "persist": "full",
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    assert cli_main(["simulate", "--config", str(cfg_path)]) == 0
    assert cli_main(["qrem", "--out", str(tmp_path / "out")]) == 0
    assert cli_main(["tomography", "--out", str(tmp_path / "out")]) == 0
    assert cli_main(["analyze", "--out", str(tmp_path / "out")]) == 0
    assert cli_main(["report", "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "report" / "pairs.csv").exists()
    capsys.readouterr()


def test_cli_run_and_exit_codes(tmp_path, capsys):
    config = {
        "topology": {"preset": "hex12"},
        "shots_tomography": 150,
        "shots_calibration": 300,
        "qrem": "on",
        "bootstrap": {"replicates": 100},
        "seed": 1,
        "persist": "none",
    }
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(config))
    rc = cli_main(
        ["run", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
         "--formats", "csv"]
    )
    assert rc == 0
    capsys.readouterr()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"topology": {"preset": "nope"}}))
    assert cli_main(["run", "--config", str(bad)]) == 1
    assert cli_main(["report", "--out", str(tmp_path / "never")]) == 1
    capsys.readouterr()
