"""Energy, enclosed volume, curvatures and contact-angle checks of a curve state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from axiflow.errors import AssumptionViolated, OpenSurface
from axiflow.mesh import (
    AXIS,
    CYLINDER,
    PLANE,
    DiscreteCurve,
    element_lengths,
    lumped_mass,
    vertex_normals,
)

DIAGNOSTIC_COLUMNS = (
    "time",
    "energy_total",
    "energy_area",
    "volume",
    "ratio",
    "min_r",
    "min_element_length",
    "max_contact_residual",
)


@dataclass(frozen=True)
class EnergyBreakdown:
    area_term: float
    cylinder_contact: float
    plane_contact: float

    @property
    def total(self) -> float:
        return self.area_term + self.cylinder_contact + self.plane_contact


def discrete_energy(curve: DiscreteCurve) -> EnergyBreakdown:
    """Surface area of the surface of revolution plus the contact energies."""
    lengths = curve.raw_lengths()
    el = curve.element_nodes()
    rbar = 0.5 * (curve.r[el[:, 0]] + curve.r[el[:, 1]])
    area = 2 * np.pi * float(np.dot(lengths, rbar))
    cyl = plane = 0.0
    for idx, kind, _ in curve.endpoints():
        r, z = (float(v) for v in curve.nodes[idx])
        if kind.tag == CYLINDER:
            cyl += 2 * np.pi * kind.rho * r * z
        elif kind.tag == PLANE:
            plane += np.pi * kind.rho * r * r
    return EnergyBreakdown(area, cyl, plane)


def encloses_volume(curve: DiscreteCurve) -> bool:
    return curve.closed or (curve.start.tag == AXIS and curve.end.tag == AXIS)


def enclosed_volume(curve: DiscreteCurve) -> float:
    """pi times the integral of r^2 dz along the curve, exact on each segment.

    Positive for counterclockwise closed curves and for curves running from
    the south to the north pole on the axis.
    """
    if not encloses_volume(curve):
        raise OpenSurface("surface of revolution has a boundary")
    el = curve.element_nodes()
    ra, rb = curve.r[el[:, 0]], curve.r[el[:, 1]]
    dz = curve.z[el[:, 1]] - curve.z[el[:, 0]]
    return float(np.pi * np.sum(dz * (ra * ra + ra * rb + rb * rb)) / 3.0)


def curvature_vector(curve: DiscreteCurve) -> np.ndarray:
    """Lumped curvature vector tested against displacements that respect the
    endpoint constraints; constrained components are set to zero."""
    lengths = element_lengths(curve)
    d = curve.displacement() / lengths[:, None]
    el = curve.element_nodes()
    stiff = np.zeros((curve.n_nodes, 2))
    np.add.at(stiff, el[:, 0], -d)
    np.add.at(stiff, el[:, 1], d)
    kvec = -stiff / lumped_mass(curve)[:, None]
    kvec[curve.constrained_mask()] = 0.0
    return kvec


@dataclass(frozen=True)
class CurvatureDiagnostics:
    """Nodal curvatures of the surface of revolution.

    ``substitute`` is the value that replaces the azimuthal quotient in the
    schemes: omega_r / r off the axis and minus the in-plane curvature on it.
    ``azimuthal`` is the azimuthal principal curvature, its negative.
    """

    kappa: np.ndarray
    substitute: np.ndarray
    azimuthal: np.ndarray
    mean: np.ndarray
    gauss: np.ndarray


def curvature_diagnostics(curve: DiscreteCurve) -> CurvatureDiagnostics:
    omega = vertex_normals(curve)
    norm = np.hypot(omega[:, 0], omega[:, 1])
    if np.any(norm <= 0):
        raise AssumptionViolated("vanishing vertex normal")
    axis = curve.axis_mask()
    r = curve.r
    if np.any((r <= 0) & ~axis):
        raise AssumptionViolated("non-positive radius off the axis")
    kappa = np.einsum("ij,ij->i", curvature_vector(curve), omega) / norm
    unit_r = omega[:, 0] / norm
    sub = np.where(axis, -kappa, unit_r / np.where(axis, 1.0, r))
    azim = -sub
    return CurvatureDiagnostics(kappa, sub, azim, kappa + azim, kappa * azim)


def contact_angle_residual(curve: DiscreteCurve) -> list[float]:
    """Residual of the boundary condition at each endpoint of an open curve."""
    if curve.closed:
        return []
    d = curve.displacement()
    lengths = curve.raw_lengths()
    J = curve.n_elements
    out = []
    for idx, kind, p in curve.endpoints():
        e = 0 if p == 0 else -1
        sign = -1.0 if p else 1.0
        if kind.tag == CYLINDER:
            out.append(float(sign * d[e, 1] / lengths[e] - kind.rho))
        elif kind.tag == PLANE:
            out.append(float(sign * d[e, 0] / lengths[e] - kind.rho))
        elif kind.tag == AXIS:
            out.append(float(J * d[e, 1]))
        else:
            out.append(0.0)
    return out


def diagnostics_row(curve: DiscreteCurve, time: float) -> dict:
    """One row of the per-step diagnostics table."""
    energy = discrete_energy(curve)
    lengths = curve.raw_lengths()
    off_axis = ~curve.axis_mask()
    residual = contact_angle_residual(curve)
    return {
        "time": time,
        "energy_total": energy.total,
        "energy_area": energy.area_term,
        "volume": enclosed_volume(curve) if encloses_volume(curve) else float("nan"),
        "ratio": float(lengths.max() / lengths.min()) if lengths.min() > 0 else float("inf"),
        "min_r": float(curve.r[off_axis].min()),
        "min_element_length": float(lengths.min()),
        "max_contact_residual": max((abs(v) for v in residual), default=0.0),
    }
