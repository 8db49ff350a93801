"""Time steppers for the fully discrete schemes.

Every scheme is written as a residual in the unknowns (displacement,
curvature[, average]) together with its analytic Jacobian.  Linear schemes
take one direct solve; the others run the damped Newton iteration from
``axiflow.solver``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from axiflow.errors import AssumptionViolated, DomainViolation, InvalidConfig, StabilityViolation
from axiflow.geometry import curvature_diagnostics, curvature_vector, diagnostics_row, discrete_energy
from axiflow.mesh import (
    CYLINDER,
    PLANE,
    RANK_TOLERANCE,
    DiscreteCurve,
    free_translations,
    lumped_mass,
    span_ratio,
    vertex_normals,
)
from axiflow.schemes._assembly import LevelData, get_layout
from axiflow.schemes.flow import FlowSpec
from axiflow.solver import NewtonConfig, StepSystem, newton_solve, solve_linear

STABILITY_SLACK = 1e-12


@dataclass(frozen=True)
class StepResult:
    """Outcome of one time step.

    ``curvature`` is the new discrete curvature: scalar per node for A and
    the C family, a vector per node for B and the D family.
    ``energy_margin`` is E(X^m) - E(X^{m+1}) - 2 pi dt D for the starred
    schemes, where D is the discrete dissipation; None otherwise.
    """

    curve: DiscreteCurve
    curvature: np.ndarray
    iterations: int
    diagnostics: dict
    energy_margin: float | None = None
    system: StepSystem | None = None


class StepProblem:
    """Residual and Jacobian of one time step of ``spec`` from ``curve``."""

    def __init__(self, curve: DiscreteCurve, dt: float, spec: FlowSpec, kappa=None, eliminate=False,
                 guess=None):
        if not dt > 0:
            raise InvalidConfig("time step must be positive")
        self.spec, self.dt = spec, float(dt)
        self.family = spec.scheme[0]
        self.star = spec.scheme.endswith("_star")
        self.eliminate = eliminate
        if eliminate and (self.family not in "CD" or spec.exact or not spec.law.is_identity or spec.conserved):
            raise InvalidConfig("curvature elimination needs a lumped C or D scheme with f(r) = r")
        self.d = d = LevelData(curve)
        self._check_assumptions()
        N = d.N
        if eliminate:
            b = 2
        else:
            b = 4 if spec.vector_curvature else 3
        self.b = b
        free = np.ones((N, b), dtype=bool)
        free[:, :2] = ~d.constrained
        if self.family in "CD" and not spec.exact and not eliminate:
            free[d.axis, 2:] = False
        self.has_mu = spec.conserved and self.family == "C"
        n_extra = 1 if self.has_mu else 0
        mu = N * b
        if self.has_mu:
            kslots = np.arange(N) * b + 2
            extra_rows = np.concatenate([np.full(N, mu), kslots, [mu]])
            extra_cols = np.concatenate([kslots, np.full(N, mu), [mu]])
        else:
            extra_rows = extra_cols = ()
        self.layout = get_layout(curve, free, n_extra, extra_rows, extra_cols)
        self.free_nodes = free[:, 2] if b > 2 else ~d.axis

        # stiffness weights and the constant Jacobian part
        c = 1.0 / d.L if self.family in "AB" else d.rbar / d.L
        self.c = c
        E = len(d.L)
        base = np.zeros((E, 2 * b, 2 * b))
        for k in range(2):
            base[:, k, k] = c
            base[:, k, b + k] = -c
            base[:, b + k, k] = -c
            base[:, b + k, b + k] = c
        self.elem_base = base

        # constant parts of the displacement rows
        rb = np.zeros((N, 2))
        self.plane_plus = []
        for idx, kind, _ in curve.endpoints():
            scale = 1.0 if self.family in "AB" else d.r[idx]
            if kind.tag == CYLINDER:
                rb[idx, 1] += kind.rho * scale
            elif kind.tag == PLANE:
                if self.star:
                    plus, minus = max(kind.rho, 0.0), min(kind.rho, 0.0)
                    rb[idx, 0] += minus * d.r[idx]
                    if plus:
                        self.plane_plus.append((idx, plus))
                else:
                    rb[idx, 0] += kind.rho * scale
        if self.family in "CD" and not self.star:
            rb[:, 0] += d.M
        self.rb_const = rb

        self.sub = d.substitute()
        self.lam = d.lam()
        self.kappa_prev = None if kappa is None else np.asarray(kappa, dtype=float)
        self.guess = None if guess is None else np.asarray(guess, dtype=float)
        self._prepare_speed()
        self._cache_x = None

    # -- setup helpers -------------------------------------------------
    def _check_assumptions(self):
        d = self.d
        if np.any((d.r <= 0) & ~d.axis):
            bad = int(np.flatnonzero((d.r <= 0) & ~d.axis)[0])
            raise AssumptionViolated(f"non-positive radius at node {bad}")
        free = free_translations(d.curve)
        if self.family == "A" and span_ratio(d.omega, free) <= RANK_TOLERANCE:
            raise AssumptionViolated("vertex normals miss an admissible translation")
        if self.family == "C":
            if self.spec.exact:
                ends = d.Mr.sum(axis=2)
                z = d.scatter(ends[:, :1] * d.nu, ends[:, 1:] * d.nu)
            else:
                z = d.omega[~d.axis]
            if span_ratio(z, free) <= RANK_TOLERANCE:
                raise AssumptionViolated("r-weighted normals miss an admissible translation")

    def _prepare_speed(self):
        d, spec = self.d, self.spec
        self.g_const = None
        self.avg_const = 0.0
        if self.family != "A":
            return
        if spec.speed is not None or spec.conserved:
            if self.kappa_prev is None:
                raise InvalidConfig("this scheme needs the previous curvature")
            k = self.kappa_prev
            frak = np.where(d.axis, -k, self.sub)
            km = k - frak
            if spec.speed is not None:
                kg = -k * frak
                self.g_const = np.asarray(spec.speed_fn(km, kg), dtype=float) * np.ones(d.N)
            else:
                num = float(np.dot(d.W, spec.law(km)))
                self.avg_const = num / d.r_integral

    def _diff(self, X1):
        if self.d.closed:
            return np.roll(X1, -1, axis=0) - X1
        return X1[1:] - X1[:-1]

    # -- evaluation -----------------------------------------------------
    def _evaluate(self, x_red):
        d, b, N, dt, spec = self.d, self.b, self.d.N, self.dt, self.spec
        xf = self.layout.expand(x_red)
        U = xf[: N * b].reshape(N, b)
        dX = U[:, :2]
        X1 = d.X + dX
        diff = self._diff(X1)
        s = self.c[:, None] * diff
        Rb = d.scatter(-s, s) + self.rb_const
        R = np.zeros((N, b))
        elem = self.elem_base.copy()
        node = np.zeros((N, b, b))
        extra_res, extra_vals = [], []

        if self.star:
            L1 = np.hypot(diff[:, 0], diff[:, 1])
            half = 0.5 * L1
            Rb[:, 0] += d.scatter(half, half)
            t = 0.5 * diff / np.maximum(L1, np.finfo(float).tiny)[:, None]
            elem[:, 0, 0:2] -= t
            elem[:, 0, b:b + 2] += t
            elem[:, b, 0:2] -= t
            elem[:, b, b:b + 2] += t
            for idx, plus in self.plane_plus:
                Rb[idx, 0] += plus * X1[idx, 0]
                node[idx, 0, 0] += plus

        fam = self.family
        if self.eliminate:
            W = d.W
            if fam == "C":
                vn = np.einsum("ij,ij->i", d.omega, dX) / dt
                Rb += (W * vn)[:, None] * d.omega
                node[:, :2, :2] += (W / dt)[:, None, None] * d.omega[:, :, None] * d.omega[:, None, :]
            else:
                Rb += (W / dt)[:, None] * dX
                node[:, 0, 0] += W / dt
                node[:, 1, 1] += W / dt
        elif fam == "A":
            K = U[:, 2]
            M, om = d.M, d.omega
            if self.g_const is not None:
                g, gp = self.g_const, np.zeros(N)
            else:
                arg = self.lam * K - self.sub
                g, gp = spec.law(arg), spec.law.derivative(arg)
            vn = np.einsum("ij,ij->i", om, dX)
            R[:, 2] = M * (vn / dt - g + self.avg_const)
            Rb += (M * K)[:, None] * om
            node[:, 2, 0:2] = (M / dt)[:, None] * om
            node[:, 2, 2] = -M * gp * self.lam
            node[:, 0:2, 2] = M[:, None] * om
        elif fam == "B":
            K = U[:, 2:4]
            M = d.M
            norm2 = np.einsum("ij,ij->i", d.omega, d.omega)
            subvec = (self.sub / norm2)[:, None] * d.omega
            R[:, 2:4] = M[:, None] * (dX / dt - (self.lam[:, None] * K - subvec))
            Rb += M[:, None] * K
            for k in range(2):
                node[:, 2 + k, k] = M / dt
                node[:, 2 + k, 2 + k] = -M * self.lam
                node[:, k, 2 + k] = M
        elif fam == "C":
            K = U[:, 2]
            mu = xf[N * b] if self.has_mu else 0.0
            fk = self.free_nodes
            g = np.zeros(N)
            gp = np.zeros(N)
            if fk.all():
                g, gp = spec.law(K), spec.law.derivative(K)
            else:
                g[fk], gp[fk] = spec.law(K[fk]), spec.law.derivative(K[fk])
            if spec.exact:
                w = d.w_exact
                el, Mr, nu = d.el, d.Mr, d.nu
                vn = np.einsum("ek,eak->ea", nu, dX[el])
                src = vn / dt - g[el]
                ra = np.einsum("eab,eb->ea", Mr, src)
                R[:, 2] = d.scatter(ra[:, 0], ra[:, 1]) + mu * w
                mk = np.einsum("eab,eb->ea", Mr, K[el])
                Rb += d.scatter(mk[:, :1] * nu, mk[:, 1:] * nu)
                gpe = gp[el]
                for a in range(2):
                    for c in range(2):
                        m = Mr[:, a, c]
                        elem[:, a * b + 2, c * b:c * b + 2] += (m / dt)[:, None] * nu
                        elem[:, a * b + 2, c * b + 2] -= m * gpe[:, c]
                        elem[:, a * b:a * b + 2, c * b + 2] += m[:, None] * nu
            else:
                W, om = d.W, d.omega
                w = W
                vn = np.einsum("ij,ij->i", om, dX)
                R[:, 2] = W * (vn / dt - g) + mu * W
                Rb += (W * K)[:, None] * om
                node[:, 2, 0:2] = (W / dt)[:, None] * om
                node[:, 2, 2] = -W * gp
                node[:, 0:2, 2] = W[:, None] * om
            if self.has_mu:
                extra_res.append(d.r_integral * mu - float(np.dot(w, g)))
                extra_vals = np.concatenate([-w * gp, w, [d.r_integral]])
        else:  # D family
            K = U[:, 2:4]
            if spec.exact:
                el, Mr = d.el, d.Mr
                src = dX[el] / dt - K[el]
                ra = np.einsum("eab,ebk->eak", Mr, src)
                R[:, 2:4] = d.scatter(ra[:, 0], ra[:, 1])
                mk = np.einsum("eab,ebk->eak", Mr, K[el])
                Rb += d.scatter(mk[:, 0], mk[:, 1])
                for a in range(2):
                    for c in range(2):
                        m = Mr[:, a, c]
                        for k in range(2):
                            elem[:, a * b + 2 + k, c * b + k] += m / dt
                            elem[:, a * b + 2 + k, c * b + 2 + k] -= m
                            elem[:, a * b + k, c * b + 2 + k] += m
            else:
                W = d.W
                R[:, 2:4] = W[:, None] * (dX / dt - K)
                Rb += W[:, None] * K
                for k in range(2):
                    node[:, 2 + k, k] = W / dt
                    node[:, 2 + k, 2 + k] = -W
                    node[:, k, 2 + k] = W
        R[:, :2] = Rb
        res_full = np.concatenate([R.ravel(), np.asarray(extra_res, dtype=float)])
        return res_full, elem, node, extra_vals

    def residual(self, x_red):
        res_full, elem, node, extra = self._evaluate(x_red)
        self._cache_x = np.array(x_red, copy=True)
        self._cache = (res_full, elem, node, extra)
        return res_full[self.layout.free]

    def jacobian(self, x_red) -> StepSystem:
        if self._cache_x is None or not np.array_equal(self._cache_x, x_red):
            self.residual(x_red)
        res_full, elem, node, extra = self._cache
        return self.layout.system(res_full, elem, node, extra)

    def start(self):
        """Initial guess: previous curvature where known, with either the
        predicted displacement or none, whichever has the smaller residual."""
        N, b = self.d.N, self.b
        U = np.zeros((N, b))
        if b > 2 and self.kappa_prev is not None:
            U[:, 2:] = self.kappa_prev.reshape(N, -1)[:, : b - 2]
        xf = np.zeros(self.layout.n_full)
        xf[: N * b] = U.ravel()
        plain = xf[self.layout.free]
        if self.guess is None:
            return plain
        U[:, :2] = np.where(self.d.constrained, 0.0, self.guess)
        xf[: N * b] = U.ravel()
        predicted = xf[self.layout.free]
        try:
            r_pred = np.abs(self.residual(predicted)).max()
        except DomainViolation:
            return plain
        return predicted if r_pred <= np.abs(self.residual(plain)).max() else plain

    def unpack(self, x_red):
        d, b, N = self.d, self.b, self.d.N
        xf = self.layout.expand(x_red)
        U = xf[: N * b].reshape(N, b)
        dX = U[:, :2]
        curve = d.curve.with_nodes(d.X + dX)
        if self.eliminate:
            if self.family == "C":
                k = np.einsum("ij,ij->i", d.omega, dX) / self.dt
                k[d.axis] = 0.0
            else:
                k = dX / self.dt
                k[d.axis] = 0.0
        elif b == 3:
            k = U[:, 2].copy()
        else:
            k = U[:, 2:4].copy()
        return curve, k, (xf[N * b] if self.has_mu else None)

    # -- stability ------------------------------------------------------
    def dissipation(self, kappa, mu=None) -> float:
        """Discrete dissipation D with E(X^{m+1}) + 2 pi dt D <= E(X^m)."""
        d, spec = self.d, self.spec
        if self.family == "D":
            if spec.exact:
                ke = kappa[d.el]
                return float(np.einsum("eak,eab,ebk->", ke, d.Mr, ke))
            return float(np.dot(d.W, np.einsum("ij,ij->i", kappa, kappa)))
        g = np.zeros_like(kappa)
        fk = self.free_nodes
        g[fk] = spec.law(kappa[fk])
        if spec.exact:
            val = float(np.einsum("ea,eab,eb->", g[d.el], d.Mr, kappa[d.el]))
            w = d.w_exact
        else:
            val = float(np.dot(d.W, g * kappa))
            w = d.W
        if mu is not None:
            val -= mu * float(np.dot(w, kappa))
        return val


def _solve_problem(problem: StepProblem, newton: NewtonConfig | None, keep_system=False):
    if problem.spec.linear:
        x0 = np.zeros(problem.layout.n)
        system = problem.jacobian(x0)
        return solve_linear(system), 0, system
    res = newton_solve(problem.residual, problem.jacobian, problem.start(), newton or NewtonConfig())
    system = None
    if keep_system:
        jac = problem.jacobian(res.x)
        system = StepSystem(jac.pattern, jac.values, -problem.residual(res.x))
    return res.x, res.iterations, system


def advance(curve: DiscreteCurve, dt: float, spec: FlowSpec, kappa=None,
            newton: NewtonConfig | None = None, time: float = 0.0, eliminate=False,
            keep_system=False, guess=None) -> StepResult:
    """One time step of any scheme; ``kappa`` is the curvature at the old
    level (needed by the lagged variants, otherwise only a Newton start).
    It defaults to ``initial_curvature(curve, spec)``.

    Linear schemes always return their system; Newton schemes return the
    Jacobian at the solution (with the final residual as right-hand side)
    only when ``keep_system`` is set.  ``guess`` is a predicted nodal
    displacement used as the Newton start."""
    if kappa is None:
        kappa = initial_curvature(curve, spec)
    problem = StepProblem(curve, dt, spec, kappa, eliminate=eliminate, guess=guess)
    x, iterations, system = _solve_problem(problem, newton, keep_system)
    new_curve, k, mu = problem.unpack(x)
    margin = None
    if problem.star:
        e0 = discrete_energy(curve).total
        e1 = discrete_energy(new_curve).total
        margin = e0 - e1 - 2 * np.pi * dt * problem.dissipation(k, mu)
        if margin < -STABILITY_SLACK * max(1.0, abs(e0)):
            raise StabilityViolation(f"energy inequality violated by {-margin:.3e}")
    diag = diagnostics_row(new_curve, time + dt)
    return StepResult(new_curve, k, iterations, diag, margin, system)


def _family_check(spec, allowed):
    if spec.scheme not in allowed:
        raise InvalidConfig(f"scheme {spec.scheme} not handled here")


def step_A(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0) -> StepResult:
    """Linear scheme A, including the explicit general-speed variant."""
    _family_check(spec, ("A",))
    return advance(curve, dt, spec, kappa, newton, time)


def step_A_f(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0) -> StepResult:
    """Scheme A with a nonlinear speed law, optionally volume preserving."""
    _family_check(spec, ("A",))
    return advance(curve, dt, spec, kappa, newton, time)


def step_B(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0) -> StepResult:
    _family_check(spec, ("B",))
    return advance(curve, dt, spec, kappa, newton, time)


def step_C(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0, eliminate=False) -> StepResult:
    _family_check(spec, ("C",))
    return advance(curve, dt, spec, kappa, newton, time, eliminate)


def step_C_star(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0, eliminate=False) -> StepResult:
    """Semi-implicit scheme C with the new length in the r-force; stable."""
    _family_check(spec, ("C_star",))
    return advance(curve, dt, spec, kappa, newton, time, eliminate)


def step_D(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0, eliminate=False) -> StepResult:
    _family_check(spec, ("D",))
    return advance(curve, dt, spec, kappa, newton, time, eliminate)


def step_D_star(curve, dt, spec: FlowSpec, kappa=None, newton=None, time=0.0, eliminate=False) -> StepResult:
    _family_check(spec, ("D_star",))
    return advance(curve, dt, spec, kappa, newton, time, eliminate)


def axis_substitute(kappa, curve: DiscreteCurve, omega=None) -> np.ndarray:
    """Replacement of the azimuthal quotient: omega_r / r off the axis,
    ``-kappa`` on it.  Vector curvatures get the off-axis value times
    omega / |omega|^2."""
    omega = vertex_normals(curve) if omega is None else np.asarray(omega)
    axis = curve.axis_mask()
    r = curve.r
    if np.any((r <= 0) & ~axis):
        raise AssumptionViolated("non-positive radius off the axis")
    kappa = np.asarray(kappa, dtype=float)
    q = np.where(axis, 0.0, omega[:, 0] / np.where(axis, 1.0, r))
    if kappa.ndim == 1:
        return np.where(axis, -kappa, q)
    norm2 = np.einsum("ij,ij->i", omega, omega)
    vec = (q / norm2)[:, None] * omega
    return np.where(axis[:, None], -kappa, vec)


def init_kappa0(curve: DiscreteCurve) -> np.ndarray:
    """Initial scalar curvature from the lumped curvature vector tested
    against all piecewise linear fields, projected on omega / |omega|."""
    lengths = curve.raw_lengths()
    d = curve.displacement() / lengths[:, None]
    stiff = np.zeros((curve.n_nodes, 2))
    np.add.at(stiff, curve.element_nodes()[:, 0], -d)
    np.add.at(stiff, curve.element_nodes()[:, 1], d)
    kvec = -stiff / lumped_mass(curve)[:, None]
    omega = vertex_normals(curve)
    norm = np.hypot(omega[:, 0], omega[:, 1])
    if np.any(norm <= 0):
        raise AssumptionViolated("vanishing vertex normal")
    return np.einsum("ij,ij->i", kvec, omega) / norm


def initial_curvature(curve: DiscreteCurve, spec: FlowSpec) -> np.ndarray:
    """Curvature field used as the old-level input of the first step.

    For scheme A with a nonlinear law or a general speed the nodal in-plane
    curvature is used because the unconstrained projection vanishes at axis
    nodes, where the laws may be singular or undefined and the explicit
    speed would hold the poles still.
    """
    if spec.scheme == "A":
        if not spec.law.is_identity or spec.speed is not None:
            return curvature_diagnostics(curve).kappa
        return init_kappa0(curve)
    if spec.scheme == "B":
        return curvature_vector(curve)
    diag = curvature_diagnostics(curve)
    mean = diag.mean.copy()
    if not spec.exact:
        mean[curve.axis_mask()] = 0.0
    if spec.scheme in ("C", "C_star"):
        return mean
    omega = vertex_normals(curve)
    unit = omega / np.hypot(omega[:, 0], omega[:, 1])[:, None]
    return mean[:, None] * unit


def mean_curvature_of(curvature, curve: DiscreteCurve, spec: FlowSpec) -> np.ndarray:
    """Nodal mean curvature implied by a scheme's curvature field."""
    k = np.asarray(curvature)
    omega = vertex_normals(curve)
    if spec.scheme == "A":
        return k - axis_substitute(k, curve, omega)
    if spec.scheme == "B":
        frak = axis_substitute(k, curve, omega)
        v = k - frak
        norm = np.hypot(omega[:, 0], omega[:, 1])
        return np.einsum("ij,ij->i", v, omega) / norm
    if spec.scheme in ("C", "C_star"):
        return k
    norm = np.hypot(omega[:, 0], omega[:, 1])
    return np.einsum("ij,ij->i", k, omega) / norm


def sign_alternations(values) -> int:
    """Number of sign changes between consecutive entries."""
    s = np.sign(np.asarray(values))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def oscillating(mean_curvature, n_elements: int) -> bool:
    """Flag curvature oscillations: more than J/4 sign alternations of the
    nodal mean curvature along the curve."""
    return sign_alternations(mean_curvature) > n_elements / 4
