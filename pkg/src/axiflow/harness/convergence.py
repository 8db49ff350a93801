"""Refinement studies against the exact sphere radii."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from axiflow.harness.config import ExperimentConfig
from axiflow.harness.exact import exact_solution_radius
from axiflow.harness.geometries import DEFAULTS
from axiflow.harness.runner import COMPLETED, run_simulation

DEFAULT_JS = (32, 64, 128, 256, 512)


@dataclass(frozen=True)
class ConvergenceRow:
    J: int
    h: float
    error: float
    status: str
    eoc: float | None = None
    max_iterations: int = 0


@dataclass
class ConvergenceReport:
    """Errors max_m max_j | |X^m(q_j)| - r(t_m) | for a sequence of meshes,
    with the experimental orders log(e_{k-1}/e_k) / log(h_{k-1}/h_k)."""

    scheme: str
    flow: str
    T: float
    rows: list = field(default_factory=list)

    @property
    def errors(self) -> np.ndarray:
        return np.array([row.error for row in self.rows])

    @property
    def eocs(self) -> list:
        return [row.eoc for row in self.rows[1:]]


def eoc(errors, hs) -> list:
    """Experimental orders of convergence; None where undefined."""
    out = [None]
    for k in range(1, len(errors)):
        e0, e1, h0, h1 = errors[k - 1], errors[k], hs[k - 1], hs[k]
        if all(np.isfinite([e0, e1])) and e0 > 0 and e1 > 0 and h0 != h1:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            out.append(None)
    return out


def study_row(config: ExperimentConfig) -> ConvergenceRow:
    """Run one mesh and return its error row (module level so that worker
    processes can pickle it)."""
    r0 = float(config.params.get("r0", DEFAULTS["semicircle_nonuniform"]["r0"]))
    err = [0.0]
    h0 = [float("nan")]

    def observe(step, time, curve):
        if step == 0:
            h0[0] = float(curve.raw_lengths().max())
            return
        radius = exact_solution_radius(config.flow, time, r0)
        dist = np.hypot(curve.nodes[:, 0], curve.nodes[:, 1])
        err[0] = max(err[0], float(np.abs(dist - radius).max()))

    result = run_simulation(config, observer=observe)
    error = err[0] if result.status == COMPLETED else float("nan")
    return ConvergenceRow(config.J, h0[0], error, result.status, None, result.max_iterations)


def run_convergence_study(config: ExperimentConfig, Js=DEFAULT_JS, workers: int | None = None) -> ConvergenceReport:
    """Run ``config`` for every J in ``Js``, one simulation per worker.

    Rows whose run did not complete carry the terminal status and a NaN
    error.  ``workers=None`` uses one process per CPU.
    """
    configs = [config.with_J(J) for J in Js]
    if workers is None:
        workers = min(len(configs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(study_row, configs))
    else:
        rows = [study_row(c) for c in configs]
    orders = eoc([r.error for r in rows], [r.h for r in rows])
    rows = [ConvergenceRow(r.J, r.h, r.error, r.status, o, r.max_iterations) for r, o in zip(rows, orders)]
    return ConvergenceReport(config.flow.scheme, config.flow.label, config.T, rows)
