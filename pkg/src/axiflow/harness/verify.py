"""Self-contained verification suites over the canned fixtures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from axiflow.errors import StabilityViolation
from axiflow.harness import fixtures
from axiflow.harness.convergence import run_convergence_study
from axiflow.harness.geometries import generate_geometry
from axiflow.harness.runner import (
    ASSUMPTION_VIOLATED,
    COMPLETED,
    PINCH_OFF,
    run_simulation,
)
from axiflow.mesh import BoundaryKind, DiscreteCurve, check_assumptions
from axiflow.schemes import FlowSpec
from axiflow.schemes.steppers import STABILITY_SLACK

TAGS = ("stability", "equidistribution", "conservation", "convergence", "assumptions", "singular")

STABILITY_DTS = (1e-4, 1e-2, 1.0)
STAR_SPECS = tuple(FlowSpec(s, exact=e) for s in ("C_star", "D_star") for e in (False, True))
VOLUME_DRIFT_BOUND = 2e-3
EQUIDISTRIBUTION_BOUND = 1.05
CLOSING_WINDOW = (0.075, 0.09)
PINCH_TIME, PINCH_TOL = 0.5, 0.03
IMCF_TIME, IMCF_TOL = 0.52, 0.02
GRIM_SPEED = np.pi / 3
GRIM_TOL = 0.02


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerifyReport:
    tag: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {self.tag}/{c.name}: {c.detail}" for c in self.checks]


# -- measurements shared with the test suite --------------------------------

def energy_violations(result) -> int:
    """Steps where the energy grows or the discrete inequality fails."""
    e = result.column("energy_total")
    slack = STABILITY_SLACK * np.maximum(1.0, np.abs(e[:-1]))
    grows = int(np.count_nonzero(np.diff(e) > slack))
    margins = np.asarray(result.energy_margins)
    return grows + int(np.count_nonzero(margins < -slack[: len(margins)]))


def run_stability(config, spec):
    """Run ``config`` with ``spec``; returns (result or None, violations)."""
    try:
        with warnings.catch_warnings():
            # the large steps are deliberate here
            warnings.simplefilter("ignore", RuntimeWarning)
            result = run_simulation(replace(config, flow=spec))
    except StabilityViolation:
        return None, 1
    return result, energy_violations(result)


def volume_drift(result) -> float:
    v = result.column("volume")
    return float(np.abs(v - v[0]).max() / abs(v[0]))


def grim_reaper_speed(config=None, fit_fraction=0.5) -> tuple[float, object]:
    """Least-squares slope of the r coordinate of the first node over the
    last ``fit_fraction`` of the time window."""
    config = config or fixtures.grim_reaper()
    samples = []
    result = run_simulation(config, observer=lambda m, t, c: samples.append((t, c.nodes[0, 0])))
    data = np.array(samples)
    late = data[:, 0] >= (1 - fit_fraction) * data[-1, 0]
    slope = float(np.polyfit(data[late, 0], data[late, 1], 1)[0])
    return slope, result


# -- suites -----------------------------------------------------------------

def _stability(report, quick):
    steps = 3 if quick else 10
    for dt in STABILITY_DTS:
        for name, config in fixtures.stability_fixtures(dt, steps).items():
            for spec in STAR_SPECS:
                result, bad = run_stability(config, spec)
                n = 0 if result is None else result.steps
                status = "StabilityViolation" if result is None else result.status
                report.checks.append(Check(f"{name}-{spec.label}-dt{dt:g}", bad == 0 and n > 0,
                                           f"{bad} violations in {n} steps ({status})"))


def _equidistribution(report, quick):
    # tangential relaxation happens per step, not per unit time, so the quick
    # run keeps many steps on a coarser mesh
    config = fixtures.conserved_sphere("A", J=32, T=0.3) if quick else fixtures.conserved_sphere("A")
    result = run_simulation(config)
    ratio = result.rows[-1]["ratio"]
    report.checks.append(Check("A-conserved-sphere", result.status == COMPLETED and ratio <= EQUIDISTRIBUTION_BOUND,
                               f"final ratio {ratio:.4f} (bound {EQUIDISTRIBUTION_BOUND})"))


def _conservation(report, quick):
    T = 0.1 if quick else 1.0
    for scheme, exact in (("A", False), ("C_star", True), ("C_star", False)):
        result = run_simulation(fixtures.conserved_sphere(scheme, exact, T=T))
        drift = volume_drift(result)
        report.checks.append(Check(f"sphere-{result.config.flow.label}",
                                   result.status == COMPLETED and drift <= VOLUME_DRIFT_BOUND,
                                   f"relative volume drift {drift:.2e} ({result.status})"))
    config = fixtures.conserved_torus("A", T=0.05 if quick else 0.3)
    result = run_simulation(config)
    drift = volume_drift(result)
    ok_status = result.status in (COMPLETED, PINCH_OFF) if quick else result.status == PINCH_OFF
    report.checks.append(Check("torus-A-conserved", ok_status and drift <= VOLUME_DRIFT_BOUND,
                               f"relative volume drift {drift:.2e} up to t={result.time:.4f} ({result.status})"))


def _convergence(report, quick):
    Js = (32, 64) if quick else (32, 64, 128)
    for key, flow in (("A", FlowSpec("A")), ("B", FlowSpec("B"))):
        study = run_convergence_study(fixtures.sphere(flow), Js, workers=1)
        ref = fixtures.REFERENCE_ERRORS[key]
        for k, row in enumerate(study.rows):
            rel = abs(row.error / ref[k] - 1)
            report.checks.append(Check(f"{key}-J{row.J}", rel <= 0.01,
                                       f"error {row.error:.4e} vs {ref[k]:.4e} (rel {rel:.1e})"))
            if row.eoc is not None:
                report.checks.append(Check(f"{key}-eoc-J{row.J}", abs(row.eoc - 2) <= 0.05, f"EOC {row.eoc:.4f}"))


def _assumptions(report, quick):
    names = ("semicircle_nonuniform", "circle", "cylinder_segment", "disk", "cigar", "disc", "spiral")
    for name in names:
        config = replace(fixtures.sphere(FlowSpec()), geometry=name, params={})
        curve = generate_geometry(config)
        rep = check_assumptions(curve)
        report.checks.append(Check(f"generated-{name}", rep.ok, "; ".join(rep.failures()) or "all checks hold"))
    axis = BoundaryKind.axis()
    flat = DiscreteCurve(np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 0.0], [1.0, 0.0]]), False, axis, BoundaryKind.fixed())
    rep = check_assumptions(flat)
    report.checks.append(Check("detects-zero-length", not rep.lengths_ok, f"bad element {rep.bad_element}"))
    neg = DiscreteCurve(np.array([[1.0, 0.0], [-0.2, 0.5], [1.0, 1.0], [1.5, 0.5]]), closed=True)
    rep = check_assumptions(neg)
    report.checks.append(Check("detects-negative-radius", not rep.radius_ok, f"bad node {rep.bad_node}"))
    # a straight tube between two cylinders: every normal is radial, but only
    # vertical translations are admissible
    line = DiscreteCurve(np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]), False,
                         BoundaryKind.cylinder(), BoundaryKind.cylinder())
    rep = check_assumptions(line)
    report.checks.append(Check("detects-normal-rank", not rep.normals_span_ok,
                               f"ratio {rep.normals_sv_ratio:.1e}"))
    result = run_simulation(replace(fixtures.sphere(FlowSpec()), T=1e-3), curve=neg)
    report.checks.append(Check("run-refuses-bad-start", result.status == ASSUMPTION_VIOLATED and result.steps == 0,
                               f"{result.status}: {result.reason}"))


def _singular(report, quick):
    result = run_simulation(fixtures.torus(0.7))
    t = result.time
    lo, hi = CLOSING_WINDOW
    report.checks.append(Check("torus-0.7-closes", result.status == PINCH_OFF and lo <= t <= hi,
                               f"min r below 0.05 at t={t:.4f} ({result.status})"))
    result = run_simulation(fixtures.pinch_cylinder())
    t = result.time
    report.checks.append(Check("cylinder-pinch-off", result.status == PINCH_OFF and abs(t - PINCH_TIME) <= PINCH_TOL,
                               f"stopped at t={t:.4f}: {result.reason}"))
    result = run_simulation(fixtures.imcf_torus())
    t = result.time
    report.checks.append(Check("imcf-torus-unphysical",
                               result.status == ASSUMPTION_VIOLATED and abs(t - IMCF_TIME) <= IMCF_TOL,
                               f"{result.status} at t={t:.4f}: {result.reason}"))
    config = fixtures.grim_reaper(T=20.0 if quick else 100.0)
    slope, result = grim_reaper_speed(config)
    rel = slope / GRIM_SPEED - 1
    report.checks.append(Check("grim-reaper-speed", result.status == COMPLETED and abs(rel) <= GRIM_TOL,
                               f"fitted speed {slope:.5f} vs pi/3 (rel {rel:+.2%}) over [{config.T / 2:g}, {config.T:g}]"))


_SUITES = {
    "stability": _stability,
    "equidistribution": _equidistribution,
    "conservation": _conservation,
    "convergence": _convergence,
    "assumptions": _assumptions,
    "singular": _singular,
}


def verify_suite(tag: str, quick: bool = False) -> VerifyReport:
    """Run the canned experiments for ``tag``.  ``quick`` shortens the runs
    (the bounds stay the same, so a quick pass is not a full pass)."""
    if tag not in _SUITES:
        raise ValueError(f"unknown verify tag {tag!r}; choose from {', '.join(TAGS)}")
    report = VerifyReport(tag)
    _SUITES[tag](report, quick)
    return report
