"""Report emission: structured records, delimited tables, graph files, figures.

The per-edge table is written as CSV, the entanglement graph as a Graphviz
DOT file whose edge colors and pen widths encode negativity (thick blue for
strong entanglement through thin red for weak, light gray where none was
detected), and the same encoding is rendered to PNG figures alongside the
data outputs. Density matrices for the extremal pairs are dumped as flat
real/imaginary arrays.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import cm
from matplotlib.colors import to_hex

from .pipeline import ExperimentReport, ModeResult

DEFAULT_FORMATS = ("json", "csv", "dot", "png")

_MODE_STYLE = {
    "qrem": {"color": "#1f77b4", "label": "with readout mitigation"},
    "raw": {"color": "#d62728", "label": "without readout mitigation"},
}


def _edge_color(value: float) -> str:
    """Map negativity in [0, 0.5] to red (0) .. blue (0.5)."""
    t = float(np.clip(value / 0.5, 0.0, 1.0))
    return to_hex(cm.coolwarm_r(t))


def _edge_width(value: float) -> float:
    return 0.6 + 4.4 * float(np.clip(value / 0.5, 0.0, 1.0))


def emit_report(report: ExperimentReport, out_dir, formats=DEFAULT_FORMATS) -> list[Path]:
    """Write report files for every requested format.

    Args:
        report: completed pipeline report.
        out_dir: target directory (created if missing).
        formats: subset of {"json", "csv", "dot", "png"}; density-matrix
            dumps for the extremal pairs accompany "json".

    Returns:
        List of written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    unknown = set(formats) - set(DEFAULT_FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")

    if "json" in formats:
        path = out / "report.json"
        path.write_text(json.dumps(report.to_dict(), indent=1))
        written.append(path)
        written.extend(_emit_density_dumps(report, out))
    if "csv" in formats:
        written.append(_emit_csv(report, out / "pairs.csv"))
    if "dot" in formats:
        for mode, res in report.modes.items():
            written.append(_emit_dot(report, mode, res, out / f"entanglement_{mode}.dot"))
    if "png" in formats:
        written.append(_emit_negativity_figure(report, out / "negativities.png"))
        for mode, res in report.modes.items():
            written.append(_emit_graph_figure(report, mode, res, out / f"graph_{mode}.png"))
    return written


def _emit_csv(report: ExperimentReport, path: Path) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "mode", "qubit_a", "qubit_b", "negativity", "ci_lower", "ci_upper",
                "best_projection", "projection_probability", "entangled",
            ]
        )
        for mode, res in report.modes.items():
            for r in res.results:
                writer.writerow(
                    [
                        mode, r.edge[0], r.edge[1],
                        f"{r.negativity:.6f}", f"{r.ci_lower:.6f}", f"{r.ci_upper:.6f}",
                        r.best_projection if r.best_projection is not None else "",
                        f"{r.projection_probability:.6f}",
                        int(r.entangled),
                    ]
                )
    return path


def _emit_dot(report: ExperimentReport, mode: str, res: ModeResult, path: Path) -> Path:
    topo = report.topology
    by_edge = {r.edge: r for r in res.results}
    lines = [f'graph "{report.name}_{mode}" {{']
    lines.append("  layout=neato;")
    lines.append('  node [shape=circle, fontsize=9, width=0.3, fixedsize=true];')
    for q in range(topo.n_qubits):
        if topo.coords is not None:
            x, y = topo.coords[q]
            lines.append(f'  {q} [pos="{x:.2f},{y:.2f}!"];')
        else:
            lines.append(f"  {q};")
    for edge in topo.edges:
        r = by_edge[edge]
        if r.entangled:
            lines.append(
                f"  {edge[0]} -- {edge[1]} "
                f'[negativity={r.negativity:.4f}, weight={r.negativity:.4f}, '
                f'color="{_edge_color(r.negativity)}", '
                f"penwidth={_edge_width(r.negativity):.2f}];"
            )
        else:
            lines.append(
                f"  {edge[0]} -- {edge[1]} "
                f'[negativity={r.negativity:.4f}, weight=0, '
                f'color="lightgray", penwidth=0.8];'
            )
    lines.append("}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _emit_density_dumps(report: ExperimentReport, out: Path) -> list[Path]:
    written = []
    for mode, res in report.modes.items():
        if not res.results:
            continue
        for kind, edge in (("best", res.best_edge()), ("worst", res.worst_edge())):
            state = res.pair_states.get(edge)
            if state is None:
                continue
            record = next(r for r in res.results if r.edge == edge)
            doc = {
                "mode": mode,
                "kind": kind,
                "edge": list(edge),
                "negativity": record.negativity,
                "projection": record.best_projection,
                **state.to_dict(),
            }
            path = out / f"density_{mode}_{kind}.json"
            path.write_text(json.dumps(doc, indent=1))
            written.append(path)
    return written


def _emit_negativity_figure(report: ExperimentReport, path: Path) -> Path:
    primary = "qrem" if "qrem" in report.modes else next(iter(report.modes))
    order = sorted(
        range(len(report.modes[primary].results)),
        key=lambda i: report.modes[primary].results[i].ci_lower,
    )
    if not order:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.set_title(f"{report.name}: no couplings")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path
    labels = [
        f"{r.edge[0]}-{r.edge[1]}"
        for r in (report.modes[primary].results[i] for i in order)
    ]
    n = len(labels)
    fig, ax = plt.subplots(figsize=(max(6.4, 0.17 * n + 2), 4.6))
    xs = np.arange(n)
    for mode, res in report.modes.items():
        style = _MODE_STYLE.get(mode, {"color": "gray", "label": mode})
        results = [res.results[i] for i in order]
        y = np.array([r.negativity for r in results])
        lo = y - np.array([r.ci_lower for r in results])
        hi = np.array([r.ci_upper for r in results]) - y
        ax.errorbar(
            xs, y, yerr=[lo, hi], fmt=".", capsize=2, markersize=4,
            color=style["color"], label=style["label"], alpha=0.85,
        )
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylim(-0.02, 0.52)
    ax.set_ylabel("negativity")
    ax.set_xlabel("qubit pair (ascending interval lower bound)")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=90, fontsize=max(3, min(8, 400 // max(n, 1))))
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title(f"{report.name}: pair negativities with {int(100 * _confidence(report))}% intervals")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def _confidence(report: ExperimentReport) -> float:
    return float(report.config.get("bootstrap", {}).get("confidence", 0.95))


def _layout_positions(report: ExperimentReport) -> np.ndarray:
    topo = report.topology
    if topo.coords is not None:
        return np.array(topo.coords, dtype=float)
    angles = 2 * math.pi * np.arange(topo.n_qubits) / topo.n_qubits
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _emit_graph_figure(report, mode: str, res: ModeResult, path: Path) -> Path:
    topo = report.topology
    pos = _layout_positions(report)
    by_edge = {r.edge: r for r in res.results}
    width = float(np.ptp(pos[:, 0])) if topo.n_qubits > 1 else 1.0
    height = float(np.ptp(pos[:, 1])) if topo.n_qubits > 1 else 1.0
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.55 * width + 1), max(3.0, 0.55 * height + 1))
    )
    for edge in topo.edges:
        r = by_edge[edge]
        (x0, y0), (x1, y1) = pos[edge[0]], pos[edge[1]]
        if r.entangled:
            ax.plot(
                [x0, x1], [y0, y1],
                color=_edge_color(r.negativity),
                linewidth=_edge_width(r.negativity),
                zorder=1,
            )
        else:
            ax.plot([x0, x1], [y0, y1], color="lightgray", linewidth=1.0, zorder=1)
    ax.scatter(pos[:, 0], pos[:, 1], s=110, c="white", edgecolors="black", zorder=2)
    for q in range(topo.n_qubits):
        ax.annotate(
            str(q), pos[q], ha="center", va="center", fontsize=5.5, zorder=3
        )
    summary = res.summary
    ax.set_title(
        f"{report.name} [{mode}]: {summary['entangled_pairs']}/{summary['total_pairs']} "
        f"pairs entangled, largest region {summary['largest_component']} qubits",
        fontsize=9,
    )
    ax.set_aspect("equal")
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path
