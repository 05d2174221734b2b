"""Independent oracles, norms and convergence-rate fitting.

Nothing in here reuses the closed-form moments of :mod:`fracocp.assembly`:
stiffness entries are recomputed by composite Gauss quadrature in relative
coordinates ``t = x - y`` with geometric grading, and the pointwise
fractional Laplacian of the Getoor profile is evaluated with mpmath.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .exceptions import DimensionError, FitError, OracleError, ParameterError
from .mesh import Mesh, P0Function, P1Function
from .pde import positive_part_l2norm

__all__ = [
    "RateFit",
    "getoor_constant",
    "getoor_constant_2d",
    "getoor_profile",
    "fractional_laplacian_pointwise",
    "quadrature_oracle_entry",
    "quadrature_oracle_matrix",
    "ORACLE_METHOD",
    "l2_norm",
    "l2_error",
    "l2_error_to_function",
    "energy_norm",
    "violation_norms",
    "fit_rate",
    "expected_state_rate",
    "expected_control_rate",
    "RATE_EPS",
    "semismooth_newton_oracle",
    "SSN_ORACLE_MAX_CELLS",
]

ORACLE_METHOD = "adaptive graded composite Gauss in relative coordinates"

# Arbitrarily small epsilon in the rate exponents, fixed for thresholds.
RATE_EPS = 0.05


def getoor_constant(s: float) -> float:
    """c(s) with (-Δ)^s [c(s)(r²-x²)₊^s] = 1 on (-r, r) in one dimension."""
    return math.gamma(0.5) / (2.0 ** (2 * s) * math.gamma(1 + s) * math.gamma(s + 0.5))


def getoor_constant_2d(s: float) -> float:
    """Two-dimensional counterpart 2^{-2s}/Γ(1+s)², the disk desired-state prefactor."""
    return 2.0 ** (-2 * s) / math.gamma(1 + s) ** 2


def getoor_profile(s: float, x, radius: float = 0.5):
    """c(s)(r²-x²)₊^s, the solution of (-Δ)^s u = 1 on (-r, r) with zero exterior."""
    if not (0.0 < s < 1.0):
        raise ParameterError(f"s must lie in (0, 1), got {s!r}")
    x = np.asarray(x, dtype=float)
    out = getoor_constant(s) * np.maximum(radius**2 - x**2, 0.0) ** s
    return float(out) if out.ndim == 0 else out


def fractional_laplacian_pointwise(func, s: float, x: float, breakpoints=(), support=None, dps: int = 30):
    """C_{1,s} ∫_0^∞ (2u(x) - u(x+t) - u(x-t)) t^{-1-2s} dt with mpmath tanh-sinh.

    ``func`` must accept mpmath numbers and evaluate in the working
    precision, which is raised near t = 0.  ``support`` = (lo, hi) outside of
    which ``func`` vanishes; the tail beyond it is integrated analytically.
    ``breakpoints`` are points where ``func`` is non-smooth.
    """
    with mpmath.workdps(dps):
        s_mp = mpmath.mpf(s)
        x_mp = mpmath.mpf(x)
        c = s_mp * mpmath.power(2, 2 * s_mp) * mpmath.gamma((2 * s_mp + 1) / 2) / (
            mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - s_mp)
        )
        ux = func(x_mp)
        lo, hi = support
        t_max = max(x_mp - lo, hi - x_mp)
        cuts = {mpmath.mpf(0), t_max}
        for p in breakpoints:
            d = abs(mpmath.mpf(p) - x_mp)
            if 0 < d < t_max:
                cuts.add(d)
        cuts = sorted(cuts)

        def integrand(t):
            # the second difference cancels like t²; carry extra digits near t = 0
            extra = 10 + max(0, int(-2 * mpmath.log10(t)))
            with mpmath.extradps(extra):
                diff = 2 * func(x_mp) - func(x_mp + t) - func(x_mp - t)
            return diff * mpmath.power(t, -1 - 2 * s_mp)

        total = mpmath.quad(integrand, cuts)
        total += 2 * ux * mpmath.power(t_max, -2 * s_mp) / (2 * s_mp)
        return float(c * total)


# ---------------------------------------------------------------------------
# Quadrature oracle for the stiffness matrix
# ---------------------------------------------------------------------------

def _normalization_mp(s: float) -> float:
    s_mp = mpmath.mpf(s)
    return float(
        s_mp * mpmath.power(2, 2 * s_mp) * mpmath.gamma((2 * s_mp + 1) / 2)
        / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - s_mp))
    )


@functools.lru_cache(maxsize=None)
def _unit_rule(toward_end: bool, q: int, levels: int, sigma: float):
    g, w = np.polynomial.legendre.leggauss(q)
    if toward_end:
        edges = np.concatenate(([0.0], sigma ** np.arange(levels, 0, -1), [1.0]))
    else:
        edges = np.array([0.0, 1.0])
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = (0.5 * (b - a) * g[None, :] + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel()
    return nodes, weights


def _graded_rule(lo: float, hi: float, toward: str, q: int, levels: int, sigma: float = 0.15):
    """Composite Gauss nodes/weights on [lo, hi], geometrically graded toward one end."""
    length = hi - lo
    nodes, weights = _unit_rule(toward != "none", q, levels, sigma)
    # distances are measured from the graded end so they keep full precision
    if toward == "hi":
        return hi - length * nodes, length * weights
    return lo + length * nodes, length * weights


def _separated_rule(lo: float, hi: float, sing: float, q: int):
    """Composite Gauss on [lo, hi] for an integrand singular at ``sing`` outside it.

    Sub-intervals double in length away from the singular point, so each is at
    least its own length away from it.
    """
    g, w = _unit_rule(False, q, 0, 0.15)
    near, far = (lo, hi) if abs(lo - sing) <= abs(hi - sing) else (hi, lo)
    direction = 1.0 if far > near else -1.0
    dist = abs(near - sing)
    total = abs(far - near)
    edges = [0.0]
    step = max(dist, 1e-300)
    while edges[-1] + step < total:
        edges.append(edges[-1] + step)
        step *= 2.0
    edges.append(total)
    e = np.array(edges)
    a, b = e[:-1, None], e[1:, None]
    off = (a + (b - a) * g[None, :]).ravel()
    wts = ((b - a) * w[None, :]).ravel()
    return near + direction * off, wts


def _hat(mesh: Mesh, i: int):
    vals = np.zeros(mesh.nodes.size)
    vals[i] = 1.0

    def f(x):
        return np.interp(x, mesh.nodes, vals, left=0.0, right=0.0)

    return f


def _hat_increment(mesh: Mesh, i: int):
    """φ_i(y+t) - φ_i(y) as Σ slope × overlap, exact in t for same-cell points.

    Differencing two interpolated values loses all accuracy when |t| is tiny,
    which the |t|^{-1-2s} weight amplifies for s >= 1/2.
    """
    x = mesh.nodes
    cells = [c for c in (i - 1, i) if 0 <= c < mesh.n_cells]
    slopes = [(1.0 if c == i - 1 else -1.0) / (x[c + 1] - x[c]) for c in cells]

    def d(y, t):
        lo = np.where(t >= 0, y, y + t)
        length = np.abs(t)
        out = np.zeros(np.broadcast(y, t).shape)
        for c, sl in zip(cells, slopes):
            ov = length - np.maximum(0.0, x[c] - lo) - np.maximum(0.0, lo + length - x[c + 1])
            out += sl * np.clip(ov, 0.0, length)
        return np.sign(t) * out

    return d


def _pair_pieces(mesh, k, l):
    """t-intervals on which the inner integral over T_l is a smooth function of t."""
    x = mesh.nodes
    xk0, xk1 = x[k], x[k + 1]
    yl0, yl1 = x[l], x[l + 1]
    cuts = sorted({xk0 - yl1, xk0 - yl0, xk1 - yl1, xk1 - yl0})
    if cuts[0] < 0.0 < cuts[-1]:
        cuts = sorted(set(cuts) | {0.0})
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            toward = "lo" if lo == 0.0 else "hi" if hi == 0.0 else "none"
            yield lo, hi, toward, (xk0, xk1, yl0, yl1)


def _double_integral(mesh, di, dj, pairs, s, q, levels):
    """Σ over cell pairs of ∬ (φ_i(x)-φ_i(y))(φ_j(x)-φ_j(y)) |x-y|^{-1-2s}, x∈T_k, y∈T_l."""
    ts, ws, bounds = [], [], []
    for k, l in pairs:
        for lo, hi, toward, box in _pair_pieces(mesh, k, l):
            if toward == "none":
                t, wt = _separated_rule(lo, hi, 0.0, q)
            else:
                t, wt = _graded_rule(lo, hi, toward, q, levels)
            ts.append(t)
            ws.append(wt)
            bounds.append(np.broadcast_to(np.array(box), (t.size, 4)))
    t = np.concatenate(ts)
    wt = np.concatenate(ws)
    box = np.concatenate(bounds)
    gi, wi = np.polynomial.legendre.leggauss(3)
    ylo = np.maximum(box[:, 2], box[:, 0] - t)
    yhi = np.minimum(box[:, 3], box[:, 1] - t)
    span = np.maximum(yhi - ylo, 0.0)
    y = 0.5 * (ylo + yhi)[:, None] + 0.5 * span[:, None] * gi[None, :]
    tt = np.broadcast_to(t[:, None], y.shape)
    f = di(y, tt) * dj(y, tt)
    inner = 0.5 * span * (f @ wi)
    return float(np.sum(wt * inner * np.abs(t) ** (-1.0 - 2.0 * s)))


def _kappa_term(mesh, fi, fj, cells, s, c, q, levels):
    """∫ φ_i φ_j κ, each power term of κ integrated with a rule adapted to its singularity."""
    total = 0.0
    n = mesh.n_cells
    for k in cells:
        lo, hi = mesh.nodes[k], mesh.nodes[k + 1]
        for end, sign in ((mesh.a, 1.0), (mesh.b, -1.0)):
            touching = (k == 0 and sign > 0) or (k == n - 1 and sign < 0)
            if touching:
                toward = "lo" if sign > 0 else "hi"
                xq, wq = _graded_rule(lo, hi, toward, q, levels)
                dist = _graded_rule(0.0, hi - lo, "lo", q, levels)[0]
            else:
                xq, wq = _separated_rule(lo, hi, end, q)
                dist = sign * (xq - end)
            total += float(np.sum(wq * fi(xq) * fj(xq) * dist ** (-2 * s)))
    return c / (2 * s) * total


def _oracle_entry_once(mesh, s, i, j, q, levels):
    c = _normalization_mp(s)
    # interior index -> node index
    ni, nj = i + 1, j + 1
    fi, fj = _hat(mesh, ni), _hat(mesh, nj)
    di, dj = _hat_increment(mesh, ni), _hat_increment(mesh, nj)
    cells_i = {ni - 1, ni}
    cells_j = {nj - 1, nj}
    n = mesh.n_cells
    pairs = [
        (k, l)
        for k in range(n)
        for l in range(n)
        if ({k, l} & cells_i) and ({k, l} & cells_j)
    ]
    double = _double_integral(mesh, di, dj, pairs, s, q, levels)
    kap = _kappa_term(mesh, fi, fj, sorted(cells_i & cells_j), s, c, q, levels)
    return 0.5 * c * double + kap


def quadrature_oracle_entry(mesh: Mesh, s: float, i: int, j: int, rtol: float = 1e-11) -> float:
    """E(φ_i, φ_j) by graded composite Gauss (interior indices ``i``, ``j``).

    Refines order and grading depth until two successive levels agree to
    ``rtol``; raises :class:`OracleError` otherwise.
    """
    if not (0 <= i < mesh.n_interior and 0 <= j < mesh.n_interior):
        raise DimensionError(f"indices ({i}, {j}) out of range for {mesh.n_interior} interior nodes")
    prev = None
    for q, levels in ((10, 30), (14, 45), (18, 60), (24, 80)):
        val = _oracle_entry_once(mesh, s, i, j, q, levels)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
    raise OracleError(f"quadrature oracle did not converge for entry ({i}, {j})")


def quadrature_oracle_matrix(mesh: Mesh, s: float, rtol: float = 1e-11) -> np.ndarray:
    """Upper triangle by the oracle, mirrored."""
    n = mesh.n_interior
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = quadrature_oracle_entry(mesh, s, i, j, rtol)
    return out


# ---------------------------------------------------------------------------
# Small-instance semismooth Newton oracle
# ---------------------------------------------------------------------------

SSN_ORACLE_MAX_CELLS = 32


def _gauss_positive_part(mesh: Mesh, w: np.ndarray):
    """∫ (w)₊ φ_i and ∫_{w>0} φ_i φ_j by two-point Gauss on the positive sub-cells.

    The integrands are quadratic on every sub-cell, so the rule is exact.  This
    deliberately avoids the closed-form cell formulas used by the solver.
    """
    g = np.array([-1.0, 1.0]) / math.sqrt(3.0)
    size = mesh.nodes.size
    load = np.zeros(size)
    mass = np.zeros((size, size))
    x = mesh.nodes
    for k in range(mesh.n_cells):
        w0, w1 = w[k], w[k + 1]
        if w0 <= 0 and w1 <= 0:
            continue
        lo, hi = x[k], x[k + 1]
        if w0 < 0 < w1:
            lo = x[k] + (x[k + 1] - x[k]) * w0 / (w0 - w1)
        elif w1 < 0 < w0:
            hi = x[k] + (x[k + 1] - x[k]) * w0 / (w0 - w1)
        pts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * g
        wts = 0.5 * (hi - lo) * np.ones(2)
        t = (pts - x[k]) / (x[k + 1] - x[k])
        phi = np.vstack([1 - t, t])
        wv = w0 * phi[0] + w1 * phi[1]
        idx = [k, k + 1]
        load[idx] += phi @ (wts * np.maximum(wv, 0.0))
        mass[np.ix_(idx, idx)] += (phi * wts) @ phi.T
    return load[1:-1], mass[1:-1, 1:-1]


def semismooth_newton_oracle(cfg, op, gamma: float, z0=None, tol: float = 1e-12, max_iter: int = 100):
    """Independent optimizer for small instances: Newton on the full first-order system.

    Unknowns are (u, ξ, z) together; the equations are

        A u = B z,
        A ξ = M(u - u_d) + ∫(μ̂ + γ(u - u_b))₊ φ,
        z = P(-Π_h ξ / α),

    linearized with the active-set derivative of (·)₊ and of the clamp.  Full
    steps are taken while the residual decreases; otherwise the step is damped
    by backtracking on the residual norm.  Stops once the projected-gradient
    residual of consistent (u, ξ) falls below ``tol (1 + ‖z‖)``.
    """
    from .ocp import ReducedProblem  # local import: ocp depends on this module

    mesh = op.mesh
    if mesh.n_cells > SSN_ORACLE_MAX_CELLS:
        raise ParameterError(
            f"semismooth Newton oracle is limited to {SSN_ORACLE_MAX_CELLS} cells, got {mesh.n_cells}"
        )
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma!r}")
    prob = ReducedProblem(cfg, op)
    A = op.A.toarray() if hasattr(op.A, "toarray") else np.asarray(op.A)
    B = op.B.toarray()
    Mf = op.M_full.toarray()
    h = mesh.widths
    alpha = cfg.alpha
    bounds = cfg.control_bounds
    ni, nc = mesh.n_interior, mesh.n_cells

    def clamp(v):
        return v if bounds is None else np.clip(v, bounds[0], bounds[1])

    def full(v):
        return np.concatenate(([0.0], v, [0.0]))

    def residual(u, xi, z):
        w = prob.mu_hat + gamma * (full(u) - cfg.u_b)
        load, _ = _gauss_positive_part(mesh, w)
        r1 = A @ u - B @ z
        r2 = A @ xi - (Mf @ (full(u) - prob.u_d))[1:-1] - load
        r3 = z - clamp(-(B.T @ xi) / h / alpha)
        return np.concatenate([r1, r2, r3])

    def consistent_kkt(z):
        u = np.linalg.solve(A, B @ z)
        w = prob.mu_hat + gamma * (full(u) - cfg.u_b)
        load, _ = _gauss_positive_part(mesh, w)
        xi = np.linalg.solve(A, (Mf @ (full(u) - prob.u_d))[1:-1] + load)
        g = alpha * z + (B.T @ xi) / h
        r = z - clamp(z - g)
        return float(np.sqrt(np.sum(h * r * r))), u, xi

    z = clamp(np.zeros(nc) if z0 is None else np.array(getattr(z0, "values", z0), dtype=float))
    kkt, u, xi = consistent_kkt(z)
    steps = 0
    history = [kkt]
    while kkt > tol * (1.0 + math.sqrt(np.sum(h * z * z))):
        if steps >= max_iter:
            raise OracleError(f"semismooth Newton oracle did not converge (kkt={kkt:.3e})")
        w = prob.mu_hat + gamma * (full(u) - cfg.u_b)
        _, Mact = _gauss_positive_part(mesh, w)
        target = -(B.T @ xi) / h / alpha
        free = np.ones(nc) if bounds is None else ((target > bounds[0]) & (target < bounds[1])).astype(float)
        J = np.zeros((2 * ni + nc, 2 * ni + nc))
        J[:ni, :ni] = A
        J[:ni, 2 * ni:] = -B
        J[ni:2 * ni, :ni] = -Mf[1:-1, 1:-1] - gamma * Mact
        J[ni:2 * ni, ni:2 * ni] = A
        J[2 * ni:, ni:2 * ni] = (free / (h * alpha))[:, None] * B.T
        J[2 * ni:, 2 * ni:] = np.eye(nc)
        F = residual(u, xi, z)
        d = np.linalg.solve(J, -F)
        base = np.linalg.norm(F)
        t = 1.0
        while True:
            cand = (u + t * d[:ni], xi + t * d[ni:2 * ni], clamp(z + t * d[2 * ni:]))
            if np.linalg.norm(residual(*cand)) <= (1 - 1e-4 * t) * base or t < 1e-10:
                break
            t *= 0.5
        u, xi, z = cand
        steps += 1
        kkt, u, xi = consistent_kkt(z)
        history.append(kkt)
    sol = prob.solution(prob.point(z, gamma), gamma, steps, True, "ssn-oracle", "converged", history)
    return sol


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def _check_same_mesh(f, g):
    if not f.mesh.same_as(g.mesh):
        raise DimensionError("functions live on different meshes")


def l2_norm(f) -> float:
    """Exact L² norm of a P1 or P0 function."""
    if isinstance(f, P0Function):
        return f.l2_norm()
    if isinstance(f, P1Function):
        v = f.nodal
        h = f.mesh.widths
        return float(np.sqrt(np.sum(h * (v[:-1] ** 2 + v[:-1] * v[1:] + v[1:] ** 2) / 3.0)))
    raise TypeError(f"unsupported function type {type(f).__name__}")


def l2_error(f, g) -> float:
    """‖f - g‖ for two functions of the same kind on the same mesh."""
    _check_same_mesh(f, g)
    if type(f) is not type(g):
        raise DimensionError("cannot compare P0 and P1 functions directly")
    return l2_norm(type(f)(f.mesh, f.values - g.values))


def l2_error_to_function(f, func, q: int = 10, levels: int = 30) -> float:
    """‖f - func‖_{L²(Ω)} with composite Gauss, graded on the two boundary cells.

    ``func`` may have algebraic boundary singularities such as dist^s.
    """
    mesh = f.mesh
    total = 0.0
    g, w = np.polynomial.legendre.leggauss(q)
    interior = np.arange(1, mesh.n_cells - 1)
    lo = mesh.nodes[interior][:, None]
    hi = mesh.nodes[interior + 1][:, None]
    xq = 0.5 * (hi - lo) * g[None, :] + 0.5 * (hi + lo)
    wq = 0.5 * (hi - lo) * w[None, :]
    total += float(np.sum(wq * (evaluate_any(f, xq) - func(xq)) ** 2))
    for k, toward in ((0, "lo"), (mesh.n_cells - 1, "hi")):
        xb, wb = _graded_rule(mesh.nodes[k], mesh.nodes[k + 1], toward, q, levels)
        total += float(np.sum(wb * (evaluate_any(f, xb) - func(xb)) ** 2))
    return math.sqrt(total)


def evaluate_any(f, x):
    x = np.asarray(x, dtype=float)
    if isinstance(f, P1Function):
        return np.interp(x, f.mesh.nodes, f.nodal)
    return f.values[f.mesh.cell_index(x)]


def energy_norm(op, u: P1Function) -> float:
    """sqrt(uᵀ A u), the discrete fractional energy norm."""
    if not u.mesh.same_as(op.mesh):
        raise DimensionError("function and operator live on different meshes")
    return float(np.sqrt(max(u.values @ (op.A @ u.values), 0.0)))


def violation_norms(u: P1Function, u_b: float) -> tuple[float, float]:
    """(‖(u-u_b)₊‖_{L²}, max(u-u_b)₊), exact for piecewise-linear u.

    The supremum of a P1 function is attained at a node.
    """
    w = u.nodal - u_b
    return positive_part_l2norm(u.mesh, w), float(max(np.max(w), 0.0))


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

def expected_state_rate(s: float, eps: float = RATE_EPS) -> float:
    """β = min{2s, 1-ε}."""
    return min(2 * s, 1 - eps)


def expected_control_rate(s: float, eps: float = RATE_EPS) -> float:
    """λ = min{3s, s+1/2-ε, 1-ε}."""
    return min(3 * s, s + 0.5 - eps, 1 - eps)


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(errors) against log(abscissae)."""

    abscissae: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    slope: float
    residual: float
    window: tuple[int, int]


def _flat(local: np.ndarray, ref: float) -> np.ndarray:
    return np.abs(local) < 0.5 * abs(ref)


def _floor_window(logx, loge, leading: bool = False) -> tuple[int, int]:
    """Drop trailing points whose local slope magnitude is below half the median.

    With ``leading`` the same rule also trims a flat pre-asymptotic start.
    """
    local = np.diff(loge) / np.diff(logx)
    if local.size < 2:
        return 0, logx.size
    flat = _flat(local, np.median(local))
    stop = logx.size
    while stop > 2 and flat[stop - 2]:
        stop -= 1
    start = 0
    if leading:
        while start < stop - 2 and flat[start]:
            start += 1
    return start, stop


def fit_rate(xs, errs, window=None) -> RateFit:
    """Log-log least-squares slope.

    ``window`` is ``None`` (all points), a ``(start, stop)`` slice,
    ``"floor"`` to drop trailing points at a discretization floor, or
    ``"asymptotic"`` to additionally drop a flat pre-asymptotic start.
    """
    xs = np.asarray(xs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if xs.shape != errs.shape or xs.ndim != 1:
        raise FitError("abscissae and errors must be 1D arrays of equal length")
    if np.any(xs <= 0) or np.any(errs <= 0) or not np.all(np.isfinite(errs)):
        raise FitError("rate fits need positive, finite data")
    d = np.diff(xs)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise FitError("abscissae must be strictly monotone")
    logx, loge = np.log(xs), np.log(errs)
    if window is None:
        start, stop = 0, xs.size
    elif window == "floor":
        start, stop = _floor_window(logx, loge)
    elif window == "asymptotic":
        start, stop = _floor_window(logx, loge, leading=True)
    else:
        start, stop = window
        start, stop, _ = slice(start, stop).indices(xs.size)
    if stop - start < 3:
        raise FitError(f"need at least 3 points in the fit window, got {stop - start}")
    lx, le = logx[start:stop], loge[start:stop]
    coef, res, *_ = np.polyfit(lx, le, 1, full=True)
    resid = float(np.sqrt(res[0] / lx.size)) if res.size else 0.0
    return RateFit(xs, errs, float(coef[0]), resid, (start, stop))
