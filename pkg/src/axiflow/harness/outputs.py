"""Files produced by runs and studies: CSV tables, curve snapshots, plots."""

from __future__ import annotations

import csv
from pathlib import Path

from axiflow.errors import AxiflowError
from axiflow.geometry import DIAGNOSTIC_COLUMNS
from axiflow.harness.convergence import ConvergenceReport
from axiflow.harness.runner import SimulationResult
from axiflow.mesh import save_curve

CONVERGENCE_COLUMNS = ("J", "h", "error", "eoc", "status", "max_iterations")


class OutputError(AxiflowError):
    def __init__(self, path, exc):
        super().__init__(f"cannot write {path}: {exc}")
        self.path = path


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(path: Path, columns, rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in columns])
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def write_diagnostics_csv(result: SimulationResult, path) -> Path:
    """One row for the initial state and one per completed step."""
    return _write_table(Path(path), DIAGNOSTIC_COLUMNS, result.rows)


def snapshot_name(step: int) -> str:
    return f"curve_{step:06d}.txt"


def write_snapshots(result: SimulationResult, directory) -> list[Path]:
    directory = Path(directory)
    paths = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for snap in result.snapshots:
            path = directory / snapshot_name(snap.step)
            save_curve(snap.curve, path)
            paths.append(path)
    except OSError as exc:
        raise OutputError(directory, exc) from exc
    return paths


def plot_snapshots(result: SimulationResult, path) -> Path:
    """Overlay of the generating curves in the (r, z) plane.  Each snapshot
    is one line drawn in a group with id ``snapshot-NNNNNN`` (step index)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 6))
    for snap in result.snapshots:
        nodes = snap.curve.nodes
        if snap.curve.closed:
            nodes = nodes[list(range(len(nodes))) + [0]]
        (line,) = ax.plot(nodes[:, 0], nodes[:, 1], lw=0.8, label=f"t={snap.time:.4g}")
        line.set_gid(f"snapshot-{snap.step:06d}")
    ax.set_xlabel("r")
    ax.set_ylabel("z")
    ax.set_aspect("equal", adjustable="datalim")
    if len(result.snapshots) <= 12:
        ax.legend(fontsize="small")
    ax.set_title(f"{result.config.flow.label}  status: {result.status}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    except OSError as exc:
        raise OutputError(path, exc) from exc
    finally:
        plt.close(fig)
    return path


def write_convergence_csv(report: ConvergenceReport, path) -> Path:
    rows = [
        {"J": r.J, "h": r.h, "error": r.error, "eoc": r.eoc, "status": r.status, "max_iterations": r.max_iterations}
        for r in report.rows
    ]
    return _write_table(Path(path), CONVERGENCE_COLUMNS, rows)


def emit_outputs(result: SimulationResult | None, report: ConvergenceReport | None = None,
                 directory=None) -> list[Path]:
    """Write every configured artifact below ``directory`` (defaults to the
    config's output directory)."""
    written = []
    if result is not None:
        out = Path(directory or result.config.output.directory or ".")
        written.append(write_diagnostics_csv(result, out / "diagnostics.csv"))
        written.extend(write_snapshots(result, out / "snapshots"))
        if result.config.output.svg:
            written.append(plot_snapshots(result, out / "curves.svg"))
        if result.config.output.png:
            written.append(plot_snapshots(result, out / "curves.png"))
    if report is not None:
        out = Path(directory or ".")
        written.append(write_convergence_csv(report, out / "convergence.csv"))
    return written
