"""Block layout of the step unknowns and the level-m geometric data.

Unknowns are stored node by node: two displacement components followed by
one (scalar) or two (vector) curvature components.  Global unknowns such as
the Lagrange-type average of the conserved variant come last.  Constrained
slots are removed from the reduced system.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from axiflow.mesh import DiscreteCurve, element_lengths
from axiflow.solver import SparsePattern, StepSystem


class Layout:
    def __init__(self, n_nodes, closed, free_mask, n_extra=0, extra_rows=(), extra_cols=()):
        free_mask = np.asarray(free_mask, dtype=bool)
        self.n_nodes = n_nodes
        self.b = b = free_mask.shape[1]
        self.n_full = n_nodes * b + n_extra
        self.free = np.concatenate([free_mask.ravel(), np.ones(n_extra, dtype=bool)])
        red = np.cumsum(self.free) - 1
        red[~self.free] = -1
        self.red = red
        self.n = int(self.free.sum())

        n_el = n_nodes if closed else n_nodes - 1
        left = np.arange(n_el)
        right = (left + 1) % n_nodes
        slots = np.arange(b)
        loc = np.concatenate([left[:, None] * b + slots, right[:, None] * b + slots], axis=1)
        erows = np.broadcast_to(loc[:, :, None], (n_el, 2 * b, 2 * b))
        ecols = np.broadcast_to(loc[:, None, :], (n_el, 2 * b, 2 * b))
        nloc = np.arange(n_nodes)[:, None] * b + slots
        nrows = np.broadcast_to(nloc[:, :, None], (n_nodes, b, b))
        ncols = np.broadcast_to(nloc[:, None, :], (n_nodes, b, b))
        rows = np.concatenate([erows.ravel(), nrows.ravel(), np.asarray(extra_rows, dtype=np.int64)])
        cols = np.concatenate([ecols.ravel(), ncols.ravel(), np.asarray(extra_cols, dtype=np.int64)])
        keep = (red[rows] >= 0) & (red[cols] >= 0)
        self.keep = keep
        border = []
        if closed:
            border.extend(red[(n_nodes - 1) * b + slots])
        border.extend(red[n_nodes * b + np.arange(n_extra)])
        border = [i for i in border if i >= 0]
        self.pattern = SparsePattern(red[rows[keep]], red[cols[keep]], self.n, border)

    def expand(self, x_red):
        full = np.zeros(self.n_full)
        full[self.free] = x_red
        return full

    def system(self, residual_full, elem_blocks, node_blocks, extra_vals=()):
        vals = np.concatenate([elem_blocks.ravel(), node_blocks.ravel(), np.asarray(extra_vals, dtype=float)])
        return StepSystem(self.pattern, vals[self.keep], -residual_full[self.free])


@lru_cache(maxsize=64)
def cached_layout(n_nodes, closed, free_bytes, b, n_extra, extra_key):
    free_mask = np.frombuffer(free_bytes, dtype=bool).reshape(n_nodes, b)
    rows, cols = extra_key if extra_key else ((), ())
    return Layout(n_nodes, closed, free_mask, n_extra, np.array(rows), np.array(cols))


def get_layout(curve: DiscreteCurve, free_mask, n_extra=0, extra_rows=(), extra_cols=()):
    free_mask = np.ascontiguousarray(free_mask, dtype=bool)
    key = (tuple(int(v) for v in extra_rows), tuple(int(v) for v in extra_cols)) if n_extra else None
    return cached_layout(curve.n_nodes, curve.closed, free_mask.tobytes(), free_mask.shape[1], n_extra, key)


class LevelData:
    """Everything the schemes need from the curve at the old time level."""

    def __init__(self, curve: DiscreteCurve):
        self.curve = curve
        X = curve.nodes
        self.X = X
        self.N = N = curve.n_nodes
        self.closed = curve.closed
        self.el = el = curve.element_nodes()
        self.L = L = element_lengths(curve)
        d = curve.displacement()
        self.tau = tau = d / L[:, None]
        nu = np.empty_like(tau)
        nu[:, 0] = tau[:, 1]
        nu[:, 1] = -tau[:, 0]
        self.nu = nu
        half = 0.5 * L
        self.M = self.scatter(half, half)
        wnu = nu * half[:, None]
        self.omega = self.scatter(wnu, wnu) / self.M[:, None]
        self.r = r = X[:, 0]
        self.axis = curve.axis_mask()
        rl, rr = r[el[:, 0]], r[el[:, 1]]
        self.rbar = 0.5 * (rl + rr)
        # exact integral of r phi_a phi_b over each element
        Mr = np.empty((len(L), 2, 2))
        Mr[:, 0, 0] = L * (rl / 4 + rr / 12)
        Mr[:, 1, 1] = L * (rl / 12 + rr / 4)
        Mr[:, 0, 1] = Mr[:, 1, 0] = L * (rl + rr) / 12
        self.Mr = Mr
        self.W = r * self.M  # lumped r-weighted mass, zero on the axis
        # exact integral of r times each hat function
        self.w_exact = self.scatter(Mr[:, 0, 0] + Mr[:, 0, 1], Mr[:, 1, 0] + Mr[:, 1, 1])
        self.r_integral = float(np.dot(L, self.rbar))
        self.constrained = curve.constrained_mask()

    def scatter(self, left_vals, right_vals):
        """Sum per-element contributions at the left and right node."""
        if self.closed:
            out = left_vals.copy()
            out[1:] += right_vals[:-1]
            out[0] += right_vals[-1]
            return out
        out = np.zeros((self.N,) + left_vals.shape[1:])
        out[:-1] = left_vals
        out[1:] += right_vals
        return out

    def substitute(self):
        """omega_r / r off the axis (zero placeholder on it)."""
        r_safe = np.where(self.axis, 1.0, self.r)
        return np.where(self.axis, 0.0, self.omega[:, 0] / r_safe)

    def lam(self):
        return np.where(self.axis, 2.0, 1.0)

