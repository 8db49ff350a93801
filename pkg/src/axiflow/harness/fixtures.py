"""Canned experiment configurations shared by the verify suite and the tests."""

from __future__ import annotations

from axiflow.harness.config import ExperimentConfig, StopConfig
from axiflow.schemes.flow import FlowSpec, SpeedLaw

BETA_HALF_T = 0.5 * (2.0 / 3.0) * 2.0**-0.5

# reference errors of the shrinking-sphere refinement studies, J = 32 ... 512
REFERENCE_ERRORS = {
    "A": (7.3110e-04, 1.8422e-04, 4.6098e-05, 1.1525e-05, 2.8813e-06),
    "B": (1.2074e-03, 3.0227e-04, 7.5534e-05, 1.8878e-05, 4.7192e-06),
    "C_star-lumped": (6.5076e-03, 1.9553e-03, 5.8247e-04, 1.7056e-04, 4.9112e-05),
    "C_star-exact": (3.7596e-03, 1.1565e-03, 3.5226e-04, 1.0672e-04, 3.2277e-05),
    "D-lumped": (8.1006e-03, 2.4707e-03, 7.3144e-04, 2.1165e-04, 6.0176e-05),
    "D-exact": (3.0757e-03, 8.8590e-04, 2.5363e-04, 7.2522e-05, 2.0472e-05),
    "D_star-lumped": (8.0470e-03, 2.4549e-03, 7.2755e-04, 2.1075e-04, 5.9972e-05),
    "D_star-exact": (3.6921e-03, 1.0449e-03, 2.9111e-04, 8.0222e-05, 2.1916e-05),
    "A^f-beta": (7.4955e-05, 1.8223e-05, 4.5218e-06, 1.1282e-06, 2.8189e-07),
    "C_star^f-beta-exact": (3.0322e-03, 1.0450e-03, 3.5931e-04, 1.2357e-04, 4.2698e-05),
    "A^f-inverse": (7.1401e-04, 1.8106e-04, 4.5484e-05, 1.1388e-05, 2.8483e-06),
    "C_star^f-inverse-exact": (1.2445e-02, 4.7424e-03, 1.7539e-03, 6.3806e-04, 2.3002e-04),
}
REFERENCE_H = (1.0792e-01, 5.3988e-02, 2.6997e-02, 1.3499e-02, 6.7495e-03)


def sphere(flow: FlowSpec, J: int = 32, T: float = 0.125, r0: float = 1.0, dt=None) -> ExperimentConfig:
    """Nonuniform semicircle; dt defaults to 0.1 h^2."""
    return ExperimentConfig("semicircle_nonuniform", J, T, dt=dt, params={"r0": r0}, flow=flow,
                            name=f"sphere-{flow.label}")


def beta_sphere(flow_scheme="A", exact=False, J=32) -> ExperimentConfig:
    flow = FlowSpec(flow_scheme, exact=exact, law=SpeedLaw("power", 0.5))
    return sphere(flow, J, BETA_HALF_T)


def inverse_sphere(flow_scheme="A", exact=False, J=32) -> ExperimentConfig:
    flow = FlowSpec(flow_scheme, exact=exact, law=SpeedLaw("inverse"))
    return sphere(flow, J, 1.0)


def torus(r: float, flow: FlowSpec = FlowSpec(), J: int = 256, dt: float = 1e-4, T: float = 0.2,
          min_r: float | None = 0.05, **kw) -> ExperimentConfig:
    return ExperimentConfig("circle", J, T, dt=dt, params={"R": 1.0, "r": r}, flow=flow,
                            stop=StopConfig(min_r=min_r), name=f"torus-{r}", **kw)


def pinch_cylinder(J: int = 128, dt: float = 1e-4, T: float = 0.6) -> ExperimentConfig:
    """Cylinder of radius 1 and height 4 with both ends held fixed."""
    return ExperimentConfig("cylinder_segment", J, T, dt=dt,
                            params={"radius": 1.0, "height": 4.0, "start": "fixed", "end": "fixed"},
                            stop=StopConfig(min_r=1e-2, min_element=1e-4), name="pinch-cylinder")


def grim_reaper(J: int = 128, dt: float = 1e-3, T: float = 100.0, rho: float = -0.5) -> ExperimentConfig:
    """Unit cylinder between the planes z = 0 and z = 1 with contact density rho."""
    token = f"plane:{rho!r}"
    return ExperimentConfig("cylinder_segment", J, T, dt=dt,
                            params={"radius": 1.0, "height": 1.0, "start": token, "end": token},
                            name="grim-reaper")


def imcf_torus(J: int = 256, dt: float = 1e-4, T: float = 1.0) -> ExperimentConfig:
    return ExperimentConfig("circle", J, T, dt=dt, params={"R": 1.0, "r": 0.25},
                            flow=FlowSpec("A", law=SpeedLaw("inverse")), name="imcf-torus")


def conserved_sphere(scheme="A", exact=False, J=64, dt=1e-4, T=1.0) -> ExperimentConfig:
    return sphere(FlowSpec(scheme, exact=exact, conserved=True), J, T, dt=dt)


def conserved_torus(scheme="A", exact=False, J=256, dt=1e-4, T=0.3) -> ExperimentConfig:
    return torus(0.5, FlowSpec(scheme, exact=exact, conserved=True), J, dt, T, min_r=0.05)


def disk_in_cylinder(J: int = 128, dt: float = 1e-3, T: float = 2.0) -> ExperimentConfig:
    return ExperimentConfig("disk", J, T, dt=dt, params={"radius": 1.0, "end": "cylinder:-0.5"},
                            name="disk-in-cylinder")


def stability_fixtures(dt: float, steps: int = 10, J: int = 32):
    """Sphere, torus and a cylinder between planes for the energy checks."""
    T = dt * steps
    return {
        "sphere": ExperimentConfig("semicircle_nonuniform", J, T, dt=dt),
        "torus": ExperimentConfig("circle", 2 * J, T, dt=dt, params={"R": 1.0, "r": 0.5}),
        "cylinder": ExperimentConfig("cylinder_segment", J, T, dt=dt,
                                     params={"radius": 1.0, "height": 1.0,
                                             "start": "plane:0.5", "end": "plane:-0.5"}),
    }
