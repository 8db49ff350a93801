"""Direct solution of the block-banded step systems and damped Newton iteration."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from axiflow.errors import DomainViolation, NoConvergence, SingularSystem
from axiflow.mesh import DiscreteCurve


class SparsePattern:
    """Sparsity structure of a square system, prepared for bordered banded
    elimination.

    ``border`` lists the unknowns that couple outside the band: the last node
    block of a closed curve (it touches node 0) and any global unknowns.  All
    remaining unknowns form a banded block.  Duplicate (row, col) entries are
    summed.
    """

    def __init__(self, rows, cols, n, border=()):
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.n = int(n)
        self.border = np.asarray(sorted(set(int(b) for b in border)), dtype=np.int64)
        k = len(self.border)
        is_border = np.zeros(self.n, dtype=bool)
        is_border[self.border] = True
        self.interior = np.flatnonzero(~is_border)
        ni = len(self.interior)
        local = np.empty(self.n, dtype=np.int64)
        local[self.interior] = np.arange(ni)
        local[self.border] = np.arange(k)
        br, bc = is_border[self.rows], is_border[self.cols]
        lr, lc = local[self.rows], local[self.cols]

        ii = ~br & ~bc
        diff = lr[ii] - lc[ii]
        self.lower = int(max(diff.max(initial=0), 0))
        self.upper = int(max((-diff).max(initial=0), 0))
        self.ni, self.k = ni, k
        self.banded = (self.lower + self.upper) <= max(ni // 4, 16)
        width = self.lower + self.upper + 1
        self._ii = ii
        self._ii_flat = (self.upper + diff) * ni + lc[ii]
        self._ii_size = width * ni
        self._ii_rc = (lr[ii], lc[ii])
        self._ib = ~br & bc
        self._ib_flat = lr[self._ib] * k + lc[self._ib]
        self._bi = br & ~bc
        self._bi_flat = lr[self._bi] * ni + lc[self._bi]
        self._bb = br & bc
        self._bb_flat = lr[self._bb] * k + lc[self._bb]

    def matrix(self, values) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix((values, (self.rows, self.cols)), shape=(self.n, self.n))

    def matvec(self, values, x) -> np.ndarray:
        return np.bincount(self.rows, weights=values * x[self.cols], minlength=self.n)


@dataclass
class StepSystem:
    """Assembled linear system ``A x = rhs`` with A given by ``pattern`` and
    ``values`` in coordinate form."""

    pattern: SparsePattern
    values: np.ndarray
    rhs: np.ndarray

    @classmethod
    def from_dense(cls, matrix, rhs, border=()):
        a = np.asarray(matrix, dtype=float)
        r, c = np.nonzero(a)
        return cls(SparsePattern(r, c, a.shape[0], border), a[r, c], np.asarray(rhs, dtype=float))

    @property
    def n(self) -> int:
        return self.pattern.n

    def matrix(self):
        return self.pattern.matrix(self.values)

    def matvec(self, x):
        return self.pattern.matvec(self.values, x)

    def dump_triplets(self, path) -> None:
        """Write the matrix as 'row col value' lines and the right-hand side
        as 'rhs index value' lines."""
        with open(path, "w") as fh:
            fh.write(f"# n {self.n}\n")
            for i, j, v in zip(self.pattern.rows.tolist(), self.pattern.cols.tolist(), self.values.tolist()):
                fh.write(f"{i} {j} {v!r}\n")
            for i, v in enumerate(self.rhs.tolist()):
                fh.write(f"rhs {i} {v!r}\n")


_gbsv = scipy.linalg.get_lapack_funcs("gbsv", dtype=np.float64)


def _band_matvec(ab, lower, upper, x):
    """Product of a matrix in LAPACK band storage (ab[upper + i - j, j] = a_ij)
    with x (vector or matrix of columns)."""
    n = ab.shape[1]
    y = np.zeros_like(x)
    for k in range(lower + upper + 1):
        off = k - upper  # i - j
        if off >= 0:
            y[off:] += (ab[k, : n - off] * x[: n - off].T).T
        else:
            y[:off] += (ab[k, -off:] * x[-off:].T).T
    return y


class _Interior:
    """Factor-free direct solver for the banded interior block."""

    def __init__(self, p: SparsePattern, values):
        self.p = p
        if p.banded:
            self.ab = np.bincount(p._ii_flat, weights=values[p._ii], minlength=p._ii_size).reshape(
                p.lower + p.upper + 1, p.ni
            )
        else:
            lr, lc = p._ii_rc
            self.a = scipy.sparse.csc_matrix((values[p._ii], (lr, lc)), shape=(p.ni, p.ni))

    def solve(self, b):
        p = self.p
        if not p.banded:
            return scipy.sparse.linalg.splu(self.a).solve(np.asarray(b, dtype=float))
        work = np.empty((2 * p.lower + p.upper + 1, p.ni), order="F")
        work[p.lower:] = self.ab
        _, _, x, info = _gbsv(p.lower, p.upper, work, b, overwrite_ab=1, overwrite_b=0)
        if info != 0:
            raise SingularSystem(f"banded factorization failed (info={info})")
        return x

    def matvec(self, x):
        if self.p.banded:
            return _band_matvec(self.ab, self.p.lower, self.p.upper, x)
        return self.a @ x


def _direct_solve(system: StepSystem):
    """Return the solution and the max-norm of its residual."""
    p, vals, rhs = system.pattern, system.values, system.rhs
    inner = _Interior(p, vals)
    if p.k == 0:
        x = inner.solve(rhs)
        return x, float(np.abs(inner.matvec(x) - rhs).max(initial=0.0))
    ni, k = p.ni, p.k
    a12 = np.bincount(p._ib_flat, weights=vals[p._ib], minlength=ni * k).reshape(ni, k)
    a21 = np.bincount(p._bi_flat, weights=vals[p._bi], minlength=k * ni).reshape(k, ni)
    a22 = np.bincount(p._bb_flat, weights=vals[p._bb], minlength=k * k).reshape(k, k)
    b1, b2 = rhs[p.interior], rhs[p.border]
    if ni:
        sol = inner.solve(np.column_stack([b1, a12]))
        y, z = sol[:, 0], sol[:, 1:]
        schur = a22 - a21 @ z
        x2 = np.linalg.solve(schur, b2 - a21 @ y)
        x1 = y - z @ x2
        r1 = inner.matvec(x1) + a12 @ x2 - b1
    else:
        x1, x2 = np.zeros(0), np.linalg.solve(a22, b2)
        r1 = np.zeros(0)
    r2 = a21 @ x1 + a22 @ x2 - b2
    x = np.empty(p.n)
    x[p.interior] = x1
    x[p.border] = x2
    res = max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
    return x, float(res)


def matrix_norm(system: StepSystem) -> float:
    """Infinity norm (maximal absolute row sum) of the system matrix."""
    p = system.pattern
    return float(np.bincount(p.rows, weights=np.abs(system.values), minlength=p.n).max(initial=0.0))


def solve_linear(system: StepSystem) -> np.ndarray:
    """Direct solve with a residual check.

    Raises SingularSystem if the factorization breaks down or the computed
    solution leaves a residual above 1e-10 (1 + |rhs|_inf + |A|_inf |x|_inf),
    a backward-error bound that stays meaningful when the entries of A grow
    like the inverse element lengths.
    """
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            x, res = _direct_solve(system)
        except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
            raise SingularSystem(str(exc)) from exc
    bound = 1e-10 * (1.0 + np.abs(system.rhs).max(initial=0.0) + matrix_norm(system) * np.abs(x).max(initial=0.0))
    if not np.isfinite(res) or res > bound:
        raise SingularSystem(f"residual {res:.3e} exceeds {bound:.3e}")
    return x


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 20
    damping: float = 0.5
    max_halvings: int = 4

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def _solve_jacobian(jac, rhs):
    if isinstance(jac, StepSystem):
        return solve_linear(StepSystem(jac.pattern, jac.values, rhs))
    if scipy.sparse.issparse(jac):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                return scipy.sparse.linalg.spsolve(jac.tocsc(), rhs)
            except Exception as exc:
                raise SingularSystem(str(exc)) from exc
    try:
        return np.linalg.solve(np.atleast_2d(jac), np.atleast_1d(rhs))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def newton_solve(residual, jacobian, start, cfg: NewtonConfig = NewtonConfig()) -> NewtonResult:
    """Damped Newton iteration on ``residual(x) = 0``.

    ``jacobian(x)`` may return a StepSystem (its rhs is ignored), a scipy
    sparse matrix or a dense array.  A full step is tried first and halved up
    to ``cfg.max_halvings`` times while the residual max-norm grows or the
    residual raises DomainViolation.
    """
    x = np.array(start, dtype=float)
    f = np.atleast_1d(residual(x))
    norm = float(np.abs(f).max(initial=0.0))
    it = 0
    while not norm <= cfg.tol:
        if not np.isfinite(norm):
            raise NoConvergence(it, norm)
        if it >= cfg.max_iter:
            raise NoConvergence(it, norm)
        dx = _solve_jacobian(jacobian(x), -f)
        step = 1.0
        for attempt in range(cfg.max_halvings + 1):
            last = attempt == cfg.max_halvings
            try:
                xn = x + step * dx
                fn = np.atleast_1d(residual(xn))
            except DomainViolation:
                if last:
                    raise
                step *= cfg.damping
                continue
            nn = float(np.abs(fn).max(initial=0.0))
            if nn <= norm or last:
                break
            step *= cfg.damping
        if not np.isfinite(nn):
            raise NoConvergence(it + 1, nn)
        x, f, norm = xn, fn, nn
        it += 1
    return NewtonResult(x, it, norm)


def finite_difference_jacobian(residual, x, step=1e-7) -> np.ndarray:
    """Central-difference Jacobian, column by column."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.asarray(residual(x + e)) - np.asarray(residual(x - e))) / (2 * step))
    return np.column_stack(cols)


@dataclass(frozen=True)
class GuardReport:
    status: str  # "pass", "warn" or "skipped"
    message: str


def timestep_guard(curve: DiscreteCurve, dt: float) -> GuardReport:
    """Compare ``dt`` with the sufficient bound 3 min r^2.

    Only meaningful when no endpoint sits on the axis; never blocks.
    """
    if curve.axis_mask().any():
        return GuardReport("skipped", "curve touches the axis; bound does not apply")
    bound = 3.0 * float(curve.r.min()) ** 2
    if dt >= bound:
        msg = f"time step {dt:g} is not below 3 min r^2 = {bound:g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return GuardReport("warn", msg)
    return GuardReport("pass", f"time step {dt:g} below 3 min r^2 = {bound:g}")
