"""Time loop: step a configured experiment until T or a stop condition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from axiflow.errors import (
    AssumptionViolated,
    DomainViolation,
    InvalidConfig,
    NoConvergence,
    SingularSystem,
    ZeroLengthElement,
)
from axiflow.geometry import diagnostics_row
from axiflow.harness.config import ExperimentConfig
from axiflow.harness.geometries import generate_geometry
from axiflow.mesh import DiscreteCurve, check_assumptions
from axiflow.schemes import advance, initial_curvature, mean_curvature_of, oscillating
from axiflow.solver import GuardReport, timestep_guard

COMPLETED = "Completed"
NEGATIVE_RADIUS = "NegativeRadiusStop"
PINCH_OFF = "PinchOffStop"
NO_CONVERGENCE = "NoConvergence"
ASSUMPTION_VIOLATED = "AssumptionViolated"
STATUSES = (COMPLETED, NEGATIVE_RADIUS, PINCH_OFF, NO_CONVERGENCE, ASSUMPTION_VIOLATED)


@dataclass(frozen=True)
class Snapshot:
    step: int
    time: float
    curve: DiscreteCurve


@dataclass
class SimulationResult:
    config: ExperimentConfig
    dt: float
    status: str = COMPLETED
    reason: str = ""
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    energy_margins: list = field(default_factory=list)
    curve: DiscreteCurve | None = None
    curvature: np.ndarray | None = None
    guard: GuardReport | None = None
    oscillation_step: int | None = None

    @property
    def steps(self) -> int:
        return len(self.rows) - 1

    @property
    def time(self) -> float:
        return self.rows[-1]["time"]

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    @property
    def max_iterations(self) -> int:
        return max(self.iterations, default=0)


def time_step(config: ExperimentConfig, curve: DiscreteCurve) -> float:
    """Configured step size, or dt_factor times the squared largest initial
    element length."""
    if config.dt is not None:
        return float(config.dt)
    return config.dt_factor * float(curve.raw_lengths().max()) ** 2


def step_times(T: float, dt: float) -> np.ndarray:
    """Times t_1 < ... < t_M = T; all steps have size dt except possibly the
    last one."""
    n = math.floor(T / dt + 1e-9)
    times = dt * np.arange(1, n + 1)
    if T - n * dt > 1e-9 * dt:
        times = np.append(times, T)
    elif n:
        times[-1] = T
    return times


class _SnapshotSchedule:
    def __init__(self, every, interval):
        self.every, self.interval = every, interval
        self.next_time = interval if interval else None

    def due(self, step, time, dt):
        if self.every and step % self.every == 0:
            return True
        if self.next_time is not None and time >= self.next_time - 1e-9 * dt:
            while self.next_time <= time + 1e-9 * dt:
                self.next_time += self.interval
            return True
        return False


def run_simulation(config: ExperimentConfig, observer: Callable | None = None,
                   curve: DiscreteCurve | None = None, matrix_dir=None) -> SimulationResult:
    """Run ``config`` and collect per-step diagnostics.

    Failures during the run end it with a terminal status instead of raising.
    ``observer(step, time, curve)`` is called for the initial state and after
    every completed step.  ``matrix_dir`` receives the step systems as
    triplet files when matrix dumping is enabled in the config.
    """
    spec = config.flow
    if config.eliminate and (spec.scheme[0] not in "CD" or spec.exact or spec.conserved
                             or not spec.law.is_identity):
        raise InvalidConfig("curvature elimination needs a lumped C or D scheme with f(r) = r")
    if curve is None:
        curve = generate_geometry(config)
    dt = time_step(config, curve)
    result = SimulationResult(config, dt, curve=curve)
    result.rows.append(diagnostics_row(curve, 0.0))
    result.snapshots.append(Snapshot(0, 0.0, curve))
    if observer:
        observer(0, 0.0, curve)

    report = check_assumptions(curve, spec)
    if not report.ok:
        result.status = ASSUMPTION_VIOLATED
        result.reason = "; ".join(report.failures())
        return result
    result.guard = timestep_guard(curve, dt)

    dump = None
    if config.output.dump_matrices and matrix_dir is not None:
        dump = Path(matrix_dir)
        dump.mkdir(parents=True, exist_ok=True)
    schedule = _SnapshotSchedule(config.output.snapshot_every, config.output.snapshot_interval)
    stop = config.stop
    try:
        kappa = initial_curvature(curve, spec)
    except AssumptionViolated as exc:
        result.status, result.reason = ASSUMPTION_VIOLATED, str(exc)
        return result

    t = 0.0
    velocity = None
    for m, t_next in enumerate(step_times(config.T, dt), start=1):
        if stop.max_steps is not None and m > stop.max_steps:
            result.reason = f"reached max_steps = {stop.max_steps}"
            break
        try:
            guess = None if velocity is None else (t_next - t) * velocity
            step = advance(curve, t_next - t, spec, kappa, config.newton, t, config.eliminate,
                           keep_system=dump is not None, guess=guess)
        except ZeroLengthElement as exc:
            result.status, result.reason = PINCH_OFF, str(exc)
            break
        except NoConvergence as exc:
            result.status, result.reason = NO_CONVERGENCE, str(exc)
            break
        except (AssumptionViolated, DomainViolation, SingularSystem) as exc:
            result.status, result.reason = ASSUMPTION_VIOLATED, f"{type(exc).__name__}: {exc}"
            break
        if dump is not None and step.system is not None:
            step.system.dump_triplets(dump / f"step_{m:06d}.txt")
        velocity = (step.curve.nodes - curve.nodes) / (t_next - t)
        curve, kappa, t = step.curve, step.curvature, float(t_next)
        row = dict(step.diagnostics)
        row["time"] = t
        result.rows.append(row)
        result.iterations.append(step.iterations)
        if step.energy_margin is not None:
            result.energy_margins.append(step.energy_margin)
        result.curve, result.curvature = curve, kappa
        if observer:
            observer(m, t, curve)
        status = _stop_status(curve, row, stop)
        if not status and config.detect_oscillation and result.oscillation_step is None:
            try:
                if oscillating(mean_curvature_of(kappa, curve, spec), curve.n_elements):
                    result.oscillation_step = m
            except ZeroLengthElement as exc:
                status = PINCH_OFF, str(exc)
        if status:
            result.status, result.reason = status
            break
        if schedule.due(m, t, dt):
            result.snapshots.append(Snapshot(m, t, curve))
    if result.snapshots[-1].step != result.steps:
        result.snapshots.append(Snapshot(result.steps, result.time, result.curve))
    return result


def _stop_status(curve, row, stop):
    if not np.all(np.isfinite(curve.nodes)):
        return ASSUMPTION_VIOLATED, "non-finite node positions"
    if row["min_r"] < 0:
        return NEGATIVE_RADIUS, f"node radius {row['min_r']:.3e} below zero"
    if stop.min_r is not None and row["min_r"] < stop.min_r:
        return PINCH_OFF, f"min radius {row['min_r']:.3e} below {stop.min_r:g}"
    if stop.min_element is not None and row["min_element_length"] < stop.min_element:
        return PINCH_OFF, f"min element {row['min_element_length']:.3e} below {stop.min_element:g}"
    return None
