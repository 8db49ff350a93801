"""Initial generating curves for the canned experiments."""

from __future__ import annotations

import numpy as np

from axiflow.errors import InvalidConfig
from axiflow.harness.config import ExperimentConfig
from axiflow.mesh import BoundaryKind, DiscreteCurve

DEFAULTS = {
    "semicircle_nonuniform": {"r0": 1.0},
    "circle": {"R": 1.0, "r": 0.5},
    "cylinder_segment": {"radius": 1.0, "height": 1.0, "z0": 0.0, "start": "fixed", "end": "fixed"},
    "disk": {"radius": 1.0, "z": 0.0, "end": "cylinder:-0.5"},
    "cigar": {"a": 0.5, "b": 2.0, "exponent": 4.0},
    "disc": {"a": 2.0, "b": 0.5, "exponent": 4.0},
    "spiral": {"center": 1.0, "inner": 0.15, "pitch": 0.25, "turns": 1.5, "thickness": 0.1},
}

# dense samples per element before equal-arclength resampling
_OVERSAMPLE = 64


def semicircle_nonuniform(J: int, r0: float = 1.0) -> DiscreteCurve:
    """Semicircle from the south to the north pole with perturbed angles
    theta_j = a_j + 0.1 cos(a_j), a_j = (j/J - 1/2) pi."""
    a = (np.arange(J + 1) / J - 0.5) * np.pi
    theta = a + 0.1 * np.cos(a)
    nodes = r0 * np.column_stack([np.cos(theta), np.sin(theta)])
    nodes[0, 0] = nodes[-1, 0] = 0.0
    return DiscreteCurve(nodes, False, BoundaryKind.axis(), BoundaryKind.axis())


def circle(J: int, R: float = 1.0, r: float = 0.5) -> DiscreteCurve:
    """Counterclockwise circle of radius r around (R, 0): a torus."""
    if not 0 < r < R:
        raise InvalidConfig("circle needs 0 < r < R to stay off the axis")
    phi = 2 * np.pi * np.arange(J) / J
    return DiscreteCurve(np.column_stack([R + r * np.cos(phi), r * np.sin(phi)]), closed=True)


def cylinder_segment(J, radius=1.0, height=1.0, z0=0.0, start="fixed", end="fixed") -> DiscreteCurve:
    """Vertical segment r = radius from z0 to z0 + height."""
    if not (radius > 0 and height > 0):
        raise InvalidConfig("cylinder needs positive radius and height")
    s, e = _kind(start), _kind(end)
    if s.tag == "axis" or e.tag == "axis":
        raise InvalidConfig("a cylinder segment cannot end on the axis")
    z = z0 + height * np.arange(J + 1) / J
    return DiscreteCurve(np.column_stack([np.full(J + 1, float(radius)), z]), False, s, e)


def disk(J, radius=1.0, z=0.0, end="cylinder:-0.5") -> DiscreteCurve:
    """Flat disk from the axis out to r = radius at height z."""
    if not radius > 0:
        raise InvalidConfig("disk needs a positive radius")
    e = _kind(end)
    if e.tag == "axis":
        raise InvalidConfig("the outer disk rim cannot sit on the axis")
    r = radius * np.arange(J + 1) / J
    return DiscreteCurve(np.column_stack([r, np.full(J + 1, float(z))]), False, BoundaryKind.axis(), e)


def superellipse(J, a, b, exponent=4.0) -> DiscreteCurve:
    """Right half of |r/a|^p + |z/b|^p = 1 from pole to pole, nodes equally
    spaced in arclength."""
    if not (a > 0 and b > 0 and exponent >= 2):
        raise InvalidConfig("superellipse needs a, b > 0 and exponent >= 2")
    theta = np.linspace(-np.pi / 2, np.pi / 2, _OVERSAMPLE * J + 1)
    q = 2.0 / exponent
    r = a * np.abs(np.cos(theta)) ** q
    z = b * np.sign(np.sin(theta)) * np.abs(np.sin(theta)) ** q
    nodes = _resample(np.column_stack([r, z]), J, closed=False)
    nodes[0, 0] = nodes[-1, 0] = 0.0
    return DiscreteCurve(nodes, False, BoundaryKind.axis(), BoundaryKind.axis())


def spiral(J, center=1.0, inner=0.15, pitch=0.25, turns=1.5, thickness=0.1) -> DiscreteCurve:
    """Closed band of the given thickness around an Archimedean spiral
    r(s) = inner + pitch s / (2 pi) centred at (center, 0), with round caps."""
    outer = inner + pitch * turns + thickness / 2
    if not (0 < thickness < pitch and thickness / 2 < inner and outer < center and turns > 0):
        raise InvalidConfig("spiral parameters give a self-intersecting or off-domain band")
    n = _OVERSAMPLE * J
    s = np.linspace(0.0, 2 * np.pi * turns, n)
    rad = inner + pitch * s / (2 * np.pi)
    c = np.column_stack([center + rad * np.cos(s), rad * np.sin(s)])
    dc = np.column_stack([pitch / (2 * np.pi) * np.cos(s) - rad * np.sin(s),
                          pitch / (2 * np.pi) * np.sin(s) + rad * np.cos(s)])
    t = dc / np.hypot(dc[:, 0], dc[:, 1])[:, None]
    nrm = np.column_stack([t[:, 1], -t[:, 0]])
    w = thickness / 2
    side_a = c + w * nrm
    side_b = (c - w * nrm)[::-1]
    phi = np.linspace(0.0, np.pi, max(n // 8, 8))[1:-1]
    cap_end = c[-1] + w * (np.cos(phi)[:, None] * nrm[-1] + np.sin(phi)[:, None] * t[-1])
    cap_start = c[0] - w * (np.cos(phi)[:, None] * nrm[0] + np.sin(phi)[:, None] * t[0])
    dense = np.concatenate([side_a, cap_end, side_b, cap_start])
    if _signed_area(dense) < 0:
        dense = dense[::-1]
    return DiscreteCurve(_resample(dense, J, closed=True), closed=True)


def generate_geometry(config: ExperimentConfig) -> DiscreteCurve:
    """Initial curve described by ``config``."""
    params = dict(DEFAULTS[config.geometry])
    unknown = set(config.params) - set(params)
    if unknown:
        raise InvalidConfig(f"unknown parameters for {config.geometry}: {sorted(unknown)}")
    params.update(config.params)
    J = config.J
    try:
        if config.geometry == "semicircle_nonuniform":
            return semicircle_nonuniform(J, float(params["r0"]))
        if config.geometry == "circle":
            return circle(J, float(params["R"]), float(params["r"]))
        if config.geometry == "cylinder_segment":
            return cylinder_segment(J, **params)
        if config.geometry == "disk":
            return disk(J, **params)
        if config.geometry in ("cigar", "disc"):
            return superellipse(J, **params)
        return spiral(J, **params)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc


def _kind(token) -> BoundaryKind:
    if isinstance(token, BoundaryKind):
        return token
    try:
        return BoundaryKind.from_token(str(token))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc


def _signed_area(points) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _resample(points, J, closed):
    """J elements of equal length along the polyline through ``points``."""
    pts = np.concatenate([points, points[:1]]) if closed else points
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = s[-1] * np.arange(J if closed else J + 1) / J
    return np.column_stack([np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])])
