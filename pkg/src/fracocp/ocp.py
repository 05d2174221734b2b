"""Reduced Moreau-Yosida regularized control problem.

For a fixed penalty parameter γ the discrete problem is

    min_{z ∈ Z_ad,h}  ½‖S_h z - u_d‖² + α/2 ‖z‖² + 1/(2γ) ‖(μ̂ + γ(S_h z - u_b))₊‖²

over piecewise-constant controls, all norms in L²(Ω).  The gradient in the
L² metric on P0 is ``α z + Π_h ξ`` where ξ solves the adjoint equation and
Π_h takes cell averages.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.optimize

from .analysis import getoor_profile, violation_norms
from .assembly import FracOperator
from .exceptions import ConfigurationError, ConvergenceWarning, DimensionError, FracOCPError, ParameterError
from .mesh import Mesh, P0Function, P1Function, interpolate_nodal
from .pde import (
    active_mass,
    penalty_argument,
    positive_part_load,
)

__all__ = [
    "ProblemConfig",
    "OcpSolution",
    "PathRecord",
    "PathReport",
    "MultiplierRecord",
    "ReducedProblem",
    "objective",
    "plain_objective",
    "gradient",
    "project_control",
    "kkt_residual",
    "solve_fixed_gamma",
    "gamma_continuation",
    "recover_multiplier",
    "METHODS",
    "ARMIJO_C",
    "ARMIJO_SHRINK",
]

log = logging.getLogger(__name__)

METHODS = ("newton", "pgd", "lbfgs")
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ProblemConfig:
    """Continuous problem data.

    ``u_d`` may be ``"getoor"`` / ``"getoor:<radius>"`` (the closed-form
    profile for this ``s``), a constant, ``"file:<path>"``, a callable of x
    or an array of nodal values.  ``mu_hat`` accepts the same except the
    closed-form tag and must be non-negative.
    """

    s: float
    alpha: float = 1e-2
    u_d: object = "getoor"
    u_b: float = 0.1
    mu_hat: object = 0.0
    control_bounds: tuple[float, float] | None = None
    opt_tol: float = 1e-9
    max_iter: int = 5000
    method: str = "newton"

    def __post_init__(self):
        s = float(self.s)
        if not (0.0 < s < 1.0):
            raise ConfigurationError(f"s must lie in (0, 1), got {self.s!r}")
        if s <= 0.25:
            raise ConfigurationError(
                f"s = {s} rejected: L² controls in one dimension need s > N/4 = 0.25 "
                "(the integrability condition p > N/(2s) with p = 2); "
                "in two dimensions the threshold would be 0.5"
            )
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha!r}")
        if not math.isfinite(self.u_b):
            raise ConfigurationError("u_b must be finite")
        if self.control_bounds is not None:
            lo, hi = map(float, self.control_bounds)
            if not lo < hi:
                raise ConfigurationError(f"control bounds need z_lo < z_hi, got {self.control_bounds!r}")
            object.__setattr__(self, "control_bounds", (lo, hi))
        if not self.opt_tol > 0:
            raise ConfigurationError("opt_tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigurationError("max_iter must be a positive integer")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if isinstance(self.mu_hat, (int, float)) and self.mu_hat < 0:
            raise ConfigurationError("mu_hat must be non-negative")
        object.__setattr__(self, "s", s)

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)


def _load_nodal_file(path: str, mesh: Mesh) -> np.ndarray:
    if not os.path.exists(path):
        raise ConfigurationError(f"nodal data file not found: {path}")
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] == 1:
        vals = data[:, 0]
        if vals.size != mesh.nodes.size:
            raise ConfigurationError(
                f"{path}: single-column file needs {mesh.nodes.size} values, got {vals.size}"
            )
        return vals
    if data.shape[1] == 2:
        order = np.argsort(data[:, 0])
        return np.interp(mesh.nodes, data[order, 0], data[order, 1])
    raise ConfigurationError(f"{path}: expected one or two columns")


def _resolve_nodal(spec, mesh: Mesh, s: float, name: str, allow_getoor: bool) -> np.ndarray:
    if isinstance(spec, str):
        if allow_getoor and spec.startswith("getoor"):
            radius = float(spec.split(":", 1)[1]) if ":" in spec else 0.5
            return getoor_profile(s, mesh.nodes, radius)
        if spec.startswith("file:"):
            return _load_nodal_file(spec[5:], mesh)
        try:
            spec = float(spec)
        except ValueError:
            raise ConfigurationError(f"cannot interpret {name} = {spec!r}") from None
    if callable(spec):
        return interpolate_nodal(mesh, spec)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.nodes.size, float(arr))
    if arr.shape != (mesh.nodes.size,):
        raise DimensionError(f"{name} needs {mesh.nodes.size} nodal values, got {arr.shape}")
    return arr.copy()


@dataclass(frozen=True)
class MultiplierRecord:
    """(μ̂ + γ(u - u_b))₊ as nodal values plus exact norms."""

    nodal: np.ndarray = field(repr=False)
    l1: float
    l2: float
    active_cells: np.ndarray = field(repr=False)


@dataclass
class OcpSolution:
    z: P0Function
    u: P1Function
    xi: P1Function
    gamma: float
    objective: float
    plain_objective: float
    kkt_residual: float
    multiplier_l1: float
    iterations: int
    converged: bool
    method: str = "newton"
    status: str = "converged"
    history: list = field(default_factory=list, repr=False)


@dataclass
class _Point:
    z: np.ndarray
    u: np.ndarray  # interior values
    w: np.ndarray  # full nodal penalty argument
    J: float
    Jg: float
    xi: np.ndarray | None = None
    grad: np.ndarray | None = None
    pos_l1: float = 0.0


class ReducedProblem:
    """Discrete reduced problem for one (config, operator) pair.

    Resolves data to nodal vectors once and caches the dense Gauss-Newton
    pieces used by the semismooth Newton solver.
    """

    def __init__(self, cfg: ProblemConfig, op: FracOperator):
        if cfg.s != op.s:
            raise ParameterError(f"config s={cfg.s} does not match operator s={op.s}")
        self.cfg = cfg
        self.op = op
        self.mesh = op.mesh
        self.h = op.mesh.widths
        self.u_d = _resolve_nodal(cfg.u_d, self.mesh, cfg.s, "u_d", True)
        self.mu_hat = _resolve_nodal(cfg.mu_hat, self.mesh, cfg.s, "mu_hat", False)
        if np.any(self.mu_hat < 0):
            raise ConfigurationError("mu_hat must be non-negative")
        self._tracking_hessian = None

    # -- basic maps ---------------------------------------------------------
    def norm(self, z: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.h * z * z)))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.h * a * b))

    def project(self, z: np.ndarray) -> np.ndarray:
        b = self.cfg.control_bounds
        return z.copy() if b is None else np.clip(z, b[0], b[1])

    def _full(self, u_int: np.ndarray) -> np.ndarray:
        return np.concatenate(([0.0], u_int, [0.0]))

    def point(self, z: np.ndarray, gamma: float, with_grad: bool = True) -> _Point:
        op = self.op
        u = op.solve(op.B @ z)
        uf = self._full(u)
        diff = uf - self.u_d
        Md = op.M_full @ diff
        J = 0.5 * float(diff @ Md) + 0.5 * self.cfg.alpha * self.inner(z, z)
        w = self.mu_hat + gamma * (uf - self.cfg.u_b)
        pos = positive_part_load(self.mesh, w)
        Jg = J + 0.5 / gamma * pos.l2**2
        pt = _Point(z, u, w, J, Jg, pos_l1=pos.l1)
        if with_grad:
            xi = op.solve(Md[1:-1] + pos.load)
            pt.xi = xi
            pt.grad = self.cfg.alpha * z + (op.B.T @ xi) / self.h
        return pt

    def residual(self, pt: _Point, c: float = 1.0) -> float:
        return self.norm(pt.z - self.project(pt.z - c * pt.grad))

    @property
    def tracking_hessian(self) -> np.ndarray:
        """Xᵀ M X with X = A⁻¹B, the state-tracking part of the reduced Hessian."""
        if self._tracking_hessian is None:
            X = self.op.state_map
            self._tracking_hessian = X.T @ (self.op.M @ X)
        return self._tracking_hessian

    def hessian(self, w: np.ndarray, gamma: float) -> np.ndarray:
        """Generalized reduced Hessian Xᵀ(M + γ M_act(w))X (coefficient space)."""
        H = self.tracking_hessian.copy()
        Ma = active_mass(self.mesh, w)
        rows = np.unique(Ma.nonzero()[0])
        if rows.size:
            X = self.op.state_map[rows]
            H += gamma * (X.T @ (Ma[rows][:, rows] @ X))
        return H

    def solution(self, pt: _Point, gamma: float, iterations: int, converged: bool,
                 method: str, status: str, history: list) -> OcpSolution:
        if pt.grad is None:
            pt = self.point(pt.z, gamma)
        return OcpSolution(
            z=P0Function(self.mesh, pt.z),
            u=P1Function(self.mesh, pt.u),
            xi=P1Function(self.mesh, pt.xi),
            gamma=gamma,
            objective=pt.Jg,
            plain_objective=pt.J,
            kkt_residual=self.residual(pt),
            multiplier_l1=pt.pos_l1,
            iterations=iterations,
            converged=converged,
            method=method,
            status=status,
            history=history,
        )


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def _zvals(z, mesh: Mesh) -> np.ndarray:
    if isinstance(z, P0Function):
        if not z.mesh.same_as(mesh):
            raise DimensionError("control and operator live on different meshes")
        return np.array(z.values)
    arr = np.asarray(z, dtype=float)
    if arr.shape != (mesh.n_cells,):
        raise DimensionError(f"control needs {mesh.n_cells} cell values, got {arr.shape}")
    return arr.copy()


def _check_gamma(gamma: float) -> float:
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ParameterError(f"gamma must be positive and finite, got {gamma!r}")
    return float(gamma)


def objective(cfg: ProblemConfig, op: FracOperator, z, gamma: float) -> float:
    """Regularized reduced objective J^γ_h(z)."""
    prob = ReducedProblem(cfg, op)
    return prob.point(_zvals(z, op.mesh), _check_gamma(gamma), with_grad=False).Jg


def plain_objective(cfg: ProblemConfig, op: FracOperator, z) -> float:
    """Unregularized J_h(z) = ½‖S_h z - u_d‖² + α/2‖z‖²."""
    prob = ReducedProblem(cfg, op)
    return prob.point(_zvals(z, op.mesh), 1.0, with_grad=False).J


def gradient(cfg: ProblemConfig, op: FracOperator, z, gamma: float) -> P0Function:
    """L²(Ω) Riesz representative α z + Π_h ξ of the derivative of J^γ_h."""
    prob = ReducedProblem(cfg, op)
    return P0Function(op.mesh, prob.point(_zvals(z, op.mesh), _check_gamma(gamma)).grad)


def project_control(z: P0Function, bounds) -> P0Function:
    """Cellwise clamp onto [z_lo, z_hi]; identity without bounds."""
    if bounds is None:
        return P0Function(z.mesh, z.values)
    lo, hi = bounds
    return P0Function(z.mesh, np.clip(z.values, lo, hi))


def kkt_residual(cfg: ProblemConfig, op: FracOperator, z, gamma: float, c: float = 1.0) -> float:
    """‖z - P(z - c ∇J^γ_h(z))‖_{L²}; zero exactly at discrete KKT points."""
    prob = ReducedProblem(cfg, op)
    return prob.residual(prob.point(_zvals(z, op.mesh), _check_gamma(gamma)), c)


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

def _accept(prob: ReducedProblem, cur: _Point, trial: _Point, gamma: float) -> tuple[bool, _Point]:
    """Armijo test along the projection arc, robust to roundoff near optimality.

    When the objective change is at the level of rounding, the decrease is
    measured by the trapezoidal rule on the gradient instead of a difference
    of nearly equal numbers.
    """
    d = trial.z - cur.z
    slope = prob.inner(cur.grad, d)
    if trial.Jg <= cur.Jg + ARMIJO_C * slope:
        return True, trial
    if abs(trial.Jg - cur.Jg) <= 1e3 * _EPS * max(abs(cur.Jg), 1.0) and slope < 0:
        trial = prob.point(trial.z, gamma)
        change = 0.5 * prob.inner(cur.grad + trial.grad, d)
        return change <= ARMIJO_C * slope, trial
    return False, trial


def _pgd_step(prob: ReducedProblem, cur: _Point, gamma: float) -> _Point | None:
    t = 1.0 / prob.cfg.alpha
    while t > 1e-16 / prob.cfg.alpha:
        zt = prob.project(cur.z - t * cur.grad)
        if np.array_equal(zt, cur.z):
            return None
        ok, trial = _accept(prob, cur, prob.point(zt, gamma, with_grad=False), gamma)
        if ok:
            return trial if trial.grad is not None else prob.point(trial.z, gamma)
        t *= ARMIJO_SHRINK
    return None


def _newton_direction(prob: ReducedProblem, cur: _Point, gamma: float, eps: float) -> np.ndarray:
    """Projected Newton direction with ε-binding bounds.

    Cells within ``eps`` of a bound whose gradient pushes outward are binding
    and move along -g; the remaining cells take a Newton step with the
    generalized Hessian.  The result is a descent direction for J^γ.
    """
    g = cur.grad
    z = cur.z
    d = -g.copy()
    free = np.ones(z.size, dtype=bool)
    bounds = prob.cfg.control_bounds
    if bounds is not None:
        free = ~(((z <= bounds[0] + eps) & (g > 0)) | ((z >= bounds[1] - eps) & (g < 0)))
    if not np.any(free):
        return d
    H = prob.hessian(cur.w, gamma)
    K = H[np.ix_(free, free)]
    K[np.diag_indices_from(K)] += prob.cfg.alpha * prob.h[free]
    d[free] = scipy.linalg.solve(K, -(prob.h * g)[free], assume_a="pos", check_finite=False)
    return d


def _polish(prob: ReducedProblem, cur: _Point, gamma: float, r: float) -> _Point:
    """One extra full Newton step, kept only if it lowers the residual.

    Inside the superlinear regime this costs one solve and pushes the
    residual to roundoff, so fixed-point identities hold with step 1/α too.
    """
    if r == 0.0:
        return cur
    try:
        delta = _newton_direction(prob, cur, gamma, min(1e-3, r))
    except (np.linalg.LinAlgError, ValueError):
        return cur
    trial = prob.point(prob.project(cur.z + delta), gamma)
    return trial if prob.residual(trial) < r else cur


def _run_newton(prob, z0, gamma, tol, max_iter, history):
    cur = prob.point(prob.project(z0), gamma)
    for it in range(max_iter):
        r = prob.residual(cur)
        history.append(r)
        log.debug("newton it=%d kkt=%.3e J=%.12e", it, r, cur.Jg)
        if r <= tol:
            return _polish(prob, cur, gamma, r), it, True, "converged"
        delta = _newton_direction(prob, cur, gamma, min(1e-3, r))
        t = 1.0
        nxt = None
        while t >= 1e-6:
            zt = prob.project(cur.z + t * delta)
            ok, trial = _accept(prob, cur, prob.point(zt, gamma, with_grad=False), gamma)
            if ok:
                nxt = trial if trial.grad is not None else prob.point(trial.z, gamma)
                break
            t *= ARMIJO_SHRINK
        if nxt is None:
            nxt = _pgd_step(prob, cur, gamma)
            if nxt is None:
                return cur, it, False, "stalled"
        cur = nxt
    r = prob.residual(cur)
    history.append(r)
    ok = r <= tol
    return cur, max_iter, ok, "converged" if ok else "max_iter"


def _run_pgd(prob, z0, gamma, tol, max_iter, history):
    cur = prob.point(prob.project(z0), gamma)
    for it in range(max_iter):
        r = prob.residual(cur)
        history.append(r)
        if r <= tol:
            return cur, it, True, "converged"
        nxt = _pgd_step(prob, cur, gamma)
        if nxt is None:
            return cur, it, False, "stalled"
        cur = nxt
    r = prob.residual(cur)
    history.append(r)
    ok = r <= tol
    return cur, max_iter, ok, "converged" if ok else "max_iter"


def _run_lbfgs(prob, z0, gamma, tol, max_iter, history):
    """L-BFGS-B in L²-scaled coordinates y = sqrt(h) z, followed by the common KKT test."""
    sq = np.sqrt(prob.h)

    def fun(y):
        pt = prob.point(y / sq, gamma)
        return pt.Jg, pt.grad * sq

    bounds = None
    if prob.cfg.control_bounds is not None:
        lo, hi = prob.cfg.control_bounds
        bounds = list(zip(lo * sq, hi * sq))
    res = scipy.optimize.minimize(
        fun, prob.project(z0) * sq, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": max_iter, "maxcor": 20, "ftol": 0.0, "gtol": 0.0, "maxls": 50},
    )
    cur = prob.point(prob.project(res.x / sq), gamma)
    r = prob.residual(cur)
    history.append(r)
    ok = r <= tol
    return cur, int(res.nit), ok, "converged" if ok else "max_iter"


_RUNNERS: dict[str, Callable] = {"newton": _run_newton, "pgd": _run_pgd, "lbfgs": _run_lbfgs}


def solve_fixed_gamma(cfg: ProblemConfig, op: FracOperator, gamma: float, z0=None,
                      method: str | None = None, problem: ReducedProblem | None = None) -> OcpSolution:
    """Minimize J^γ_h over admissible P0 controls.

    Stops when ‖z - P(z - ∇J^γ_h)‖ ≤ opt_tol, which implies the relative
    test ``opt_tol (1 + ‖z‖)``.  On failure to
    converge the last (lowest-objective) iterate is returned with
    ``converged=False`` and a :class:`ConvergenceWarning` is emitted.
    """
    gamma = _check_gamma(gamma)
    method = method or cfg.method
    if method not in _RUNNERS:
        raise ConfigurationError(f"unknown method {method!r}")
    prob = problem if problem is not None else ReducedProblem(cfg, op)
    z0 = np.zeros(op.mesh.n_cells) if z0 is None else _zvals(z0, op.mesh)
    history: list = []
    pt, iters, ok, status = _RUNNERS[method](prob, z0, gamma, cfg.opt_tol, int(cfg.max_iter), history)
    sol = prob.solution(pt, gamma, iters, ok, method, status, history)
    if not ok:
        warnings.warn(
            f"{method} did not converge at gamma={gamma:g} ({status}); kkt={sol.kkt_residual:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return sol


def recover_multiplier(cfg: ProblemConfig, u: P1Function, gamma: float, mu_hat=None) -> MultiplierRecord:
    """Penalty multiplier (μ̂ + γ(u - u_b))₊ approximating the state-constraint measure."""
    gamma = _check_gamma(gamma)
    mu = _resolve_nodal(cfg.mu_hat if mu_hat is None else mu_hat, u.mesh, cfg.s, "mu_hat", False)
    w = penalty_argument(u, mu, gamma, cfg.u_b)
    pos = positive_part_load(u.mesh, w)
    return MultiplierRecord(np.maximum(w, 0.0), pos.l1, pos.l2, pos.active)


# ---------------------------------------------------------------------------
# γ-continuation
# ---------------------------------------------------------------------------

@dataclass
class PathRecord:
    gamma: float
    J: float
    Jgamma: float
    Jgamma_ref: float
    viol_l2: float
    viol_sup: float
    mult_l1: float
    dz_l2: float
    kkt: float
    iters: int
    converged: bool
    omega: float = float("nan")


@dataclass
class PathReport:
    """Per-γ diagnostics of a continuation run."""

    records: list = field(default_factory=list)
    gamma0: float = 0.1
    factor: float = 4.0
    count: int = 13
    final: OcpSolution | None = field(default=None, repr=False)
    solutions: list = field(default_factory=list, repr=False)
    aborted: str | None = None

    @property
    def gammas(self) -> np.ndarray:
        return np.array([r.gamma for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def all_converged(self) -> bool:
        return self.aborted is None and all(r.converged for r in self.records)


def gamma_continuation(cfg: ProblemConfig, op: FracOperator, gamma0: float = 0.1, factor: float = 4.0,
                       count: int = 13, z_ref=None, z0=None, keep_solutions: bool = False) -> PathReport:
    """Solve along γ_k = γ0 factor^k, k = 0..count-1, warm-starting each solve.

    ``z_ref`` is the feasible reference control for the chain
    J(z_γ) ≤ J^γ(z_γ) ≤ J^γ(z_ref) (default 0).
    """
    gamma0 = _check_gamma(gamma0)
    if not factor > 1:
        raise ParameterError("continuation factor must exceed 1")
    if int(count) != count or count < 1:
        raise ParameterError("count must be a positive integer")
    prob = ReducedProblem(cfg, op)
    zref = np.zeros(op.mesh.n_cells) if z_ref is None else _zvals(z_ref, op.mesh)
    z = prob.project(np.zeros(op.mesh.n_cells) if z0 is None else _zvals(z0, op.mesh))
    report = PathReport(gamma0=gamma0, factor=factor, count=int(count))
    prev = None
    for k in range(int(count)):
        gamma = gamma0 * factor**k
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                sol = solve_fixed_gamma(cfg, op, gamma, z, problem=prob)
        except FracOCPError as exc:
            report.aborted = f"gamma={gamma:g}: {exc}"
            log.error("continuation aborted at %s", report.aborted)
            break
        viol_l2, viol_sup = violation_norms(sol.u, cfg.u_b)
        ref = prob.point(zref, gamma, with_grad=False).Jg
        dz = float("nan") if prev is None else prob.norm(sol.z.values - prev)
        report.records.append(PathRecord(
            gamma=gamma, J=sol.plain_objective, Jgamma=sol.objective, Jgamma_ref=ref,
            viol_l2=viol_l2, viol_sup=viol_sup, mult_l1=sol.multiplier_l1, dz_l2=dz,
            kkt=sol.kkt_residual, iters=sol.iterations, converged=sol.converged,
        ))
        if not sol.converged:
            log.warning("gamma=%g not converged (kkt=%.3e)", gamma, sol.kkt_residual)
        if keep_solutions:
            report.solutions.append(sol)
        report.final = sol
        prev = sol.z.values
        z = sol.z.values
    _fill_omega(report, prob)
    return report


def _fill_omega(report: PathReport, prob: ReducedProblem):
    """ω(1/γ) = 2 max(‖μ̂‖²/(2γ), (J(z̄) - J(z_γ))₊)^{1/2} with J(z̄) ≈ J at the largest γ."""
    if not report.records:
        return
    J_limit = report.records[-1].J
    mu_sq = float(prob.mu_hat @ (prob.op.M_full @ prob.mu_hat))
    for r in report.records:
        r.omega = 2.0 * math.sqrt(max(mu_sq / (2 * r.gamma), max(J_limit - r.J, 0.0)))
