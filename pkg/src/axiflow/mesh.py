"""Polygonal generating curves and the finite element machinery on them.

A curve lives in the (r, z) half-plane.  Nodes sit at the uniform reference
points q_j = j/J; all nonuniformity is carried by the node positions.  Open
curves store J+1 nodes, closed curves store J nodes and wrap around.

Nodal arrays (shape ``(n_nodes,)`` or ``(n_nodes, 2)``) represent continuous
piecewise linear fields.  Fields that may jump at nodes are wrapped in
:class:`EndpointField` (one value per element end) or :class:`ElementField`
(one value per element).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from axiflow.errors import ZeroLengthElement

AXIS = "axis"
FIXED = "fixed"
CYLINDER = "cylinder"
PLANE = "plane"
_TAGS = (AXIS, FIXED, CYLINDER, PLANE)

# element shorter than this fraction of the curve diameter counts as degenerate
DEGENERATE_FRACTION = 1e-14
# ... or shorter than this fraction of the largest coordinate, below which
# floating point no longer resolves the shape
RESOLUTION_FRACTION = 1e-12
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class BoundaryKind:
    """Classification of an open-curve endpoint.

    ``rho`` is the contact energy density, only meaningful for the sliding
    kinds ``cylinder`` (endpoint keeps its r value) and ``plane`` (endpoint
    keeps its z value).
    """

    tag: str
    rho: float = 0.0

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown boundary kind {self.tag!r}")
        if self.tag in (AXIS, FIXED) and self.rho != 0.0:
            raise ValueError(f"{self.tag} endpoints carry no contact density")
        if abs(self.rho) > 1.0:
            raise ValueError(f"contact density {self.rho} outside [-1, 1]")

    @classmethod
    def axis(cls):
        return cls(AXIS)

    @classmethod
    def fixed(cls):
        return cls(FIXED)

    @classmethod
    def cylinder(cls, rho=0.0):
        return cls(CYLINDER, float(rho))

    @classmethod
    def plane(cls, rho=0.0):
        return cls(PLANE, float(rho))

    def constrained(self) -> tuple[bool, bool]:
        """Which of the (r, z) displacement components are held at zero."""
        return {
            AXIS: (True, False),
            FIXED: (True, True),
            CYLINDER: (True, False),
            PLANE: (False, True),
        }[self.tag]

    def token(self) -> str:
        if self.tag in (CYLINDER, PLANE):
            return f"{self.tag}:{self.rho!r}"
        return self.tag

    @classmethod
    def from_token(cls, token: str) -> "BoundaryKind":
        tag, _, rho = token.partition(":")
        return cls(tag, float(rho) if rho else 0.0)


@dataclass(frozen=True)
class DiscreteCurve:
    """Immutable polygonal curve with topology and endpoint classification."""

    nodes: np.ndarray
    closed: bool = False
    start: BoundaryKind | None = None
    end: BoundaryKind | None = None
    _lengths: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must have shape (n, 2)")
        J = len(nodes) if self.closed else len(nodes) - 1
        if J < 3:
            raise ValueError(f"need at least 3 elements, got {J}")
        if self.closed:
            if self.start is not None or self.end is not None:
                raise ValueError("closed curves have no endpoints")
        else:
            if self.start is None or self.end is None:
                raise ValueError("open curves need a BoundaryKind at both ends")
            for idx, kind in ((0, self.start), (-1, self.end)):
                if kind.tag == AXIS and nodes[idx, 0] != 0.0:
                    raise ValueError("axis endpoints must have r = 0 exactly")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        d = self.displacement()
        lengths = np.hypot(d[:, 0], d[:, 1])
        lengths.setflags(write=False)
        object.__setattr__(self, "_lengths", lengths)

    def __eq__(self, other):
        if not isinstance(other, DiscreteCurve):
            return NotImplemented
        return (
            self.closed == other.closed
            and self.start == other.start
            and self.end == other.end
            and np.array_equal(self.nodes, other.nodes)
        )

    __hash__ = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return self.n_nodes if self.closed else self.n_nodes - 1

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def r(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def z(self) -> np.ndarray:
        return self.nodes[:, 1]

    @property
    def kinds(self) -> tuple:
        return () if self.closed else (self.start, self.end)

    def endpoints(self):
        """Pairs (node index, BoundaryKind, p) with p = 0 at the start, 1 at the end."""
        if self.closed:
            return []
        return [(0, self.start, 0), (self.n_nodes - 1, self.end, 1)]

    def element_nodes(self) -> np.ndarray:
        """(E, 2) indices of the left and right node of every element."""
        return _element_nodes(self.n_nodes, self.closed)

    def displacement(self) -> np.ndarray:
        """Per element X(q_j) - X(q_{j-1})."""
        if self.closed:
            return np.roll(self.nodes, -1, axis=0) - self.nodes
        return np.diff(self.nodes, axis=0)

    def raw_lengths(self) -> np.ndarray:
        """Element lengths without the degeneracy check."""
        return self._lengths

    def diameter(self) -> float:
        span = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.hypot(*span))

    def axis_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        for idx, kind, _ in self.endpoints():
            if kind.tag == AXIS:
                mask[idx] = True
        return mask

    def constrained_mask(self) -> np.ndarray:
        """(n_nodes, 2) mask of displacement components fixed at zero."""
        mask = np.zeros((self.n_nodes, 2), dtype=bool)
        for idx, kind, _ in self.endpoints():
            mask[idx] = kind.constrained()
        return mask

    def with_nodes(self, nodes) -> "DiscreteCurve":
        return DiscreteCurve(nodes, self.closed, self.start, self.end)

    def reversed(self) -> "DiscreteCurve":
        return DiscreteCurve(self.nodes[::-1], self.closed, self.end, self.start)


@lru_cache(maxsize=64)
def _element_nodes(n_nodes, closed):
    n_el = n_nodes if closed else n_nodes - 1
    left = np.arange(n_el)
    el = np.stack([left, (left + 1) % n_nodes], axis=1)
    el.setflags(write=False)
    return el


class EndpointField:
    """Piecewise field with one value at each end of every element.

    ``values`` has shape (E, 2) for scalars or (E, 2, 2) for vectors; index 0
    is the limit at the left node q_{j-1}^+, index 1 the limit at q_j^-.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)


class ElementField:
    """Piecewise constant field, shape (E,) or (E, 2)."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)


def degeneracy_tolerance(curve: DiscreteCurve) -> float:
    """Length at or below which an element counts as degenerate."""
    scale = float(np.abs(curve.nodes).max())
    return max(DEGENERATE_FRACTION * curve.diameter(), RESOLUTION_FRACTION * scale, np.finfo(float).tiny)


def element_lengths(curve: DiscreteCurve) -> np.ndarray:
    lengths = curve.raw_lengths()
    tol = degeneracy_tolerance(curve)
    bad = np.flatnonzero(lengths <= tol)
    if bad.size:
        raise ZeroLengthElement(int(bad[0]), float(lengths[bad[0]]))
    return lengths


def element_tangents_normals(curve: DiscreteCurve):
    """Unit tangents and normals per element, both of shape (E, 2).

    The normal is the tangent rotated clockwise by a right angle, so for a
    counterclockwise closed curve it points outward.
    """
    lengths = element_lengths(curve)
    tau = curve.displacement() / lengths[:, None]
    nu = np.stack([tau[:, 1], -tau[:, 0]], axis=1)
    return tau, nu


def vertex_normals(curve: DiscreteCurve) -> np.ndarray:
    """Length-weighted average of the adjacent element normals."""
    _, nu = element_tangents_normals(curve)
    lengths = curve.raw_lengths()
    return _lumped_average(curve, nu * lengths[:, None], lengths)


def _lumped_average(curve, weighted, lengths):
    """Nodal value sum_e w_e / sum_e L_e over elements touching each node."""
    n = curve.n_nodes
    el = curve.element_nodes()
    num = np.zeros((n,) + weighted.shape[1:])
    np.add.at(num, el[:, 0], weighted)
    np.add.at(num, el[:, 1], weighted)
    den = np.bincount(el.ravel(), weights=np.repeat(lengths, 2), minlength=n)
    return num / den.reshape((n,) + (1,) * (weighted.ndim - 1))


def lumped_mass(curve: DiscreteCurve) -> np.ndarray:
    """Diagonal of the mass-lumped matrix with weight |X_rho|: half the
    length of each adjacent element."""
    lengths = curve.raw_lengths()
    el = curve.element_nodes()
    return np.bincount(el.ravel(), weights=np.repeat(lengths / 2, 2), minlength=curve.n_nodes)


def _as_endpoint(f, n_elem, closed):
    if isinstance(f, EndpointField):
        return f.values
    if isinstance(f, ElementField):
        v = f.values
        return np.stack([v, v], axis=1)
    v = np.asarray(f, dtype=float)
    if v.ndim == 0:
        return np.full((n_elem, 2), float(v))
    expected = n_elem if closed else n_elem + 1
    if v.shape[0] != expected:
        raise ValueError(f"nodal field has {v.shape[0]} entries, expected {expected}")
    right = np.roll(v, -1, axis=0)[:n_elem] if closed else v[1:]
    return np.stack([v[:n_elem], right], axis=1)


def _product(factors, n_elem, closed, points):
    """Multiply factors evaluated at local coordinates ``points`` in [0, 1].

    Vector factors are contracted pairwise with dot products, so an even
    number of vector factors is required.
    """
    scalar = np.ones((n_elem, len(points)))
    vectors = []
    for fac in factors:
        ev = _as_endpoint(fac, n_elem, closed)
        left, right = ev[:, 0], ev[:, 1]
        if left.ndim == 1:
            vals = left[:, None] * (1 - points) + right[:, None] * points
            scalar = scalar * vals
        else:
            vals = left[:, None, :] * (1 - points)[None, :, None] + right[:, None, :] * points[None, :, None]
            vectors.append(vals)
    if len(vectors) % 2:
        raise ValueError("vector factors must pair up into dot products")
    for a, b in zip(vectors[::2], vectors[1::2]):
        scalar = scalar * np.einsum("epk,epk->ep", a, b)
    return scalar


def _factors(f):
    return tuple(f) if isinstance(f, tuple) else (f,)


def _weight(weight, n_elem):
    if weight is None:
        return ElementField(np.ones(n_elem))
    if isinstance(weight, (EndpointField, ElementField)):
        return weight
    w = np.asarray(weight, dtype=float)
    if w.ndim == 2:
        return EndpointField(w)
    return ElementField(np.broadcast_to(w, (n_elem,)))


def ip_lumped(f, g, weight=None, closed=False, n_elements=None) -> float:
    """Mass-lumped inner product on the reference interval.

    Every argument may be a tuple of factors whose product forms the field.
    ``weight`` is per element, either constant (shape (E,)) or given at both
    element ends (shape (E, 2)).
    """
    factors = _factors(f) + _factors(g)
    E = _infer_elements(factors + ((weight,) if weight is not None else ()), closed, n_elements)
    vals = _product(factors + (_weight(weight, E),), E, closed, np.array([0.0, 1.0]))
    return float(vals.sum() * 0.5 / E)


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def ip_exact(f, g, weight=None, closed=False, n_elements=None) -> float:
    """Exact inner product for per-element integrands of degree at most 5,
    by three-point Gauss quadrature on every element."""
    factors = _factors(f) + _factors(g)
    E = _infer_elements(factors + ((weight,) if weight is not None else ()), closed, n_elements)
    vals = _product(factors + (_weight(weight, E),), E, closed, _GAUSS_X)
    return float((vals @ _GAUSS_W).sum() / E)


def _infer_elements(items, closed, n_elements):
    if n_elements is not None:
        return n_elements
    for it in items:
        if isinstance(it, (EndpointField, ElementField)):
            return it.values.shape[0]
    for it in items:
        v = np.asarray(it)
        if v.ndim >= 1:
            return v.shape[0] if closed else v.shape[0] - 1
    raise ValueError("cannot infer the number of elements; pass n_elements")


def element_ratio(curve: DiscreteCurve) -> float:
    lengths = element_lengths(curve)
    return float(lengths.max() / lengths.min())


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the well-posedness checks.

    Each ``*_ok`` flag comes with the offending index (element or node) or
    None; the rank checks report the singular value ratio instead.
    """

    lengths_ok: bool
    bad_element: int | None
    radius_ok: bool
    bad_node: int | None
    normals_span_ok: bool
    normals_sv_ratio: float
    weighted_span_ok: bool
    weighted_sv_ratio: float

    @property
    def ok(self) -> bool:
        return self.lengths_ok and self.radius_ok and self.normals_span_ok

    def failures(self) -> list[str]:
        out = []
        if not self.lengths_ok:
            out.append(f"degenerate element {self.bad_element}")
        if not self.radius_ok:
            out.append(f"non-positive radius at node {self.bad_node}")
        if not self.normals_span_ok:
            out.append(f"vertex normals miss an admissible translation (ratio {self.normals_sv_ratio:.2e})")
        if not self.weighted_span_ok:
            out.append(f"weighted normals miss an admissible translation (ratio {self.weighted_sv_ratio:.2e})")
        return out


def free_translations(curve: DiscreteCurve) -> tuple[bool, bool]:
    """Coordinate directions along which a rigid translation of the curve
    respects every endpoint constraint."""
    mask = curve.constrained_mask()
    return tuple(bool(v) for v in ~mask.any(axis=0))


def span_ratio(vectors, free=(True, True)) -> float:
    """Detection of admissible translations by a family of vectors.

    With both directions free this is the ratio of the singular values of
    the stacked (n, 2) matrix, so it vanishes iff the vectors do not span the
    plane.  With one free direction it is the size of the vectors' component
    along it relative to the largest singular value; with none it is 1.
    """
    v = np.asarray(vectors, dtype=float).reshape(-1, 2)
    if not any(free):
        return 1.0
    a, b, c = np.dot(v[:, 0], v[:, 0]), np.dot(v[:, 0], v[:, 1]), np.dot(v[:, 1], v[:, 1])
    mid, rad = 0.5 * (a + c), np.hypot(0.5 * (a - c), b)
    hi, lo = mid + rad, max(mid - rad, 0.0)
    if not hi > 0:
        return 0.0
    if all(free):
        return float(np.sqrt(lo / hi)) if len(v) >= 2 else 0.0
    along = a if free[0] else c
    return float(np.sqrt(along / hi))


def check_assumptions(curve: DiscreteCurve, scheme=None) -> AssumptionReport:
    """Run the positivity and span checks on ``curve``.

    ``scheme`` is consulted only for its ``exact`` attribute, which selects
    the exactly integrated variant of the r-weighted span test.
    """
    lengths = curve.raw_lengths()
    tol = degeneracy_tolerance(curve)
    bad_el = np.flatnonzero(lengths <= tol)
    lengths_ok = bad_el.size == 0
    axis = curve.axis_mask()
    bad_r = np.flatnonzero((curve.r <= 0) & ~axis)
    radius_ok = bad_r.size == 0
    if not lengths_ok:
        return AssumptionReport(False, int(bad_el[0]), radius_ok,
                                None if radius_ok else int(bad_r[0]), False, 0.0, False, 0.0)
    omega = vertex_normals(curve)
    free = free_translations(curve)
    b_ratio = span_ratio(omega, free)
    if getattr(scheme, "exact", False):
        _, nu = element_tangents_normals(curve)
        el = curve.element_nodes()
        r = curve.r
        rl, rr = r[el[:, 0]], r[el[:, 1]]
        # integral of r times the hat function over each element, per end
        wl = lengths * (rl / 3 + rr / 6)
        wr = lengths * (rl / 6 + rr / 3)
        z = np.zeros((curve.n_nodes, 2))
        np.add.at(z, el[:, 0], wl[:, None] * nu)
        np.add.at(z, el[:, 1], wr[:, None] * nu)
        c_ratio = span_ratio(z, free)
    else:
        c_ratio = span_ratio(omega[~axis], free)
    return AssumptionReport(
        lengths_ok=True,
        bad_element=None,
        radius_ok=radius_ok,
        bad_node=None if radius_ok else int(bad_r[0]),
        normals_span_ok=b_ratio > RANK_TOLERANCE,
        normals_sv_ratio=b_ratio,
        weighted_span_ok=c_ratio > RANK_TOLERANCE,
        weighted_sv_ratio=c_ratio,
    )


def curve_to_text(curve: DiscreteCurve) -> str:
    if curve.closed:
        header = "closed"
    else:
        header = f"open {curve.start.token()} {curve.end.token()}"
    lines = [header] + [f"{r!r} {z!r}" for r, z in curve.nodes.tolist()]
    return "\n".join(lines) + "\n"


def curve_from_text(text: str) -> DiscreteCurve:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty curve file")
    head = lines[0].split()
    nodes = [[float(v) for v in ln.split()] for ln in lines[1:]]
    if head[0] == "closed" and len(head) == 1:
        return DiscreteCurve(nodes, closed=True)
    if head[0] == "open" and len(head) == 3:
        return DiscreteCurve(nodes, False, BoundaryKind.from_token(head[1]),
                             BoundaryKind.from_token(head[2]))
    raise ValueError(f"bad curve header {lines[0]!r}")


def save_curve(curve: DiscreteCurve, path) -> None:
    with open(path, "w") as fh:
        fh.write(curve_to_text(curve))


def load_curve(path) -> DiscreteCurve:
    with open(path) as fh:
        return curve_from_text(fh.read())

