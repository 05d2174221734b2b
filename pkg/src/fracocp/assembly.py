"""Discrete bilinear form of the integral fractional Laplacian on P1 elements.

For u, v supported in ``(a, b)`` the energy form splits as

    E(u, v) = C/2 ∬_{Ω×Ω} (u(x)-u(y))(v(x)-v(y)) |x-y|^{-1-2s} dx dy + ∫_Ω u v κ

with the exterior weight ``κ(x) = C/(2s) [(x-a)^{-2s} + (b-x)^{-2s}]``.

The Ω×Ω part is assembled over element pairs:

* same-cell and neighbouring-cell pairs use closed-form moments of the
  kernel, arranged so that only convergent combinations are integrated;
* for well-separated pairs the diagonal products ``u(x)v(x)`` are folded
  into a one-dimensional weight (integrated in closed form together with
  κ) and only the cross products ``u(x)v(y)`` remain.  The kernel is
  analytic on those pairs and they are integrated by tensor Gauss-Legendre
  with an order chosen from the separation ratio.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import gamma as gamma_fn

from .exceptions import DomainError, IntegrationError, OperatorError, ParameterError
from .mesh import Mesh

__all__ = [
    "FracOperator",
    "normalization_constant",
    "kappa",
    "kernel_moment",
    "corner_moment",
    "assemble_stiffness",
    "assemble_mass_p1",
    "assemble_mass_full",
    "assemble_coupling",
    "assemble_operator",
    "LOG_BRANCH_TOL",
]

# Exponents within this distance of zero switch to the logarithmic limit.
LOG_BRANCH_TOL = 1e-13

METHOD = "closed-form near field + separated Gauss-Legendre far field"


def _check_s(s: float) -> float:
    s = float(s)
    if not (0.0 < s < 1.0):
        raise ParameterError(f"fractional order s must lie in (0, 1), got {s!r}")
    return s


def normalization_constant(s: float) -> float:
    """C_{1,s} = s 2^{2s} Γ((2s+1)/2) / (π^{1/2} Γ(1-s))."""
    s = _check_s(s)
    return float(s * 2.0 ** (2 * s) * gamma_fn((2 * s + 1) / 2) / (math.sqrt(math.pi) * gamma_fn(1 - s)))


def kappa(mesh: Mesh, s: float, x):
    """Exterior weight ∫_{R∖Ω} C|x-y|^{-1-2s} dy at interior points ``x``."""
    s = _check_s(s)
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr > mesh.a) | ~(x_arr < mesh.b)):
        raise DomainError("kappa is only defined strictly inside the interval")
    c = normalization_constant(s)
    out = c / (2 * s) * ((x_arr - mesh.a) ** (-2 * s) + (mesh.b - x_arr) ** (-2 * s))
    return float(out) if out.ndim == 0 else out


def _expm1_over(p, logt):
    """(exp(p logt) - 1) / p, continuous through p = 0 (limit logt)."""
    p_arr = np.asarray(p, dtype=float)
    logt = np.asarray(logt, dtype=float)
    small = np.abs(p_arr) <= LOG_BRANCH_TOL
    safe_p = np.where(small, 1.0, p_arr)
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.expm1(safe_p * logt) / safe_p
    return np.where(small, logt, val)


def _phi(t, m: int, s: float):
    """Second antiderivative of sign(t)^m |t|^{m-1-2s}, up to affine terms."""
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    with np.errstate(divide="ignore"):
        logt = np.log(at)
    if m == 0:
        p = 1.0 - 2.0 * s
        if abs(p) <= LOG_BRANCH_TOL:
            return -logt
        return _expm1_over(p, logt) / (p - 1.0)
    if m == 1:
        q = 1.0 - 2.0 * s
        out = t * _expm1_over(q, logt) / (q + 1.0)
        return np.where(at == 0.0, 0.0, out)
    if m == 2:
        e = 3.0 - 2.0 * s
        return at**e / ((e - 1.0) * e)
    raise ValueError("moment order must be 0, 1 or 2")


def kernel_moment(x_range, y_range, m: int, s: float) -> float:
    """Exact ∬ (x-y)^m |x-y|^{-1-2s} dx dy over ``x_range × y_range``."""
    s = _check_s(s)
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if x1 < x0 or y1 < y0:
        raise ValueError("intervals must be ordered")
    if m == 0 and s >= 0.5 - LOG_BRANCH_TOL and min(x1, y1) >= max(x0, y0):
        raise IntegrationError(f"raw moment m=0 diverges for touching ranges at s={s}")
    val = _phi(x1 - y0, m, s) - _phi(x1 - y1, m, s) - _phi(x0 - y0, m, s) + _phi(x0 - y1, m, s)
    val = float(val)
    if not math.isfinite(val):
        raise IntegrationError("kernel moment is not finite")
    return val


def _tail_integral(tau, c1):
    """∫_0^tau (1-t)^{c1-1} dt, continuous through c1 = 0."""
    return -_expm1_over(c1, np.log1p(-np.asarray(tau, dtype=float)))


def _beta_piece(p: int, q: int, tau, s: float):
    """∫_0^tau t^p (1-t)^{q-k} dt with k = 3-2s, via binomial expansion of t^p."""
    k = 3.0 - 2.0 * s
    total = 0.0
    for j in range(p + 1):
        coef = math.comb(p, j) * (-1) ** j
        total = total + coef * _tail_integral(tau, j + q - k + 1.0)
    return total


def corner_moment(h1, h2, p: int, q: int, s: float):
    """∫_0^{h1}∫_0^{h2} a^p b^q (a+b)^{-1-2s} db da for p + q = 2.

    Used for neighbouring cells meeting at a node: ``a`` is the distance of
    x from the shared node into the left cell, ``b`` that of y into the
    right cell.
    """
    if p + q != 2:
        raise IntegrationError("only second-order corner moments are convergent for all s")
    s = _check_s(s)
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    k = 3.0 - 2.0 * s
    tau1 = h1 / (h1 + h2)
    tau2 = h2 / (h1 + h2)
    return (h2**k * _beta_piece(p, q, tau1, s) + h1**k * _beta_piece(q, p, tau2, s)) / k


def _power_moments(lo, hi, s: float):
    """∫_lo^hi t^{m-2s} dt for m = 0, 1, 2 (``lo`` may be 0)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = []
    for m in range(3):
        p = m + 1.0 - 2.0 * s
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.log(hi / lo)
            from_lo = lo**p * _expm1_over(p, log_ratio)
            from_zero = hi**p / p if p > 0 else np.full_like(hi, np.inf)
        out.append(np.where(lo > 0, from_lo, from_zero))
    return out


def _quadratic_weight_integral(mu, r1, r2):
    """∫ (t-r1)(t-r2) t^{-2s} dt from precomputed power moments; zero roots skip terms."""
    mu0, mu1, mu2 = mu
    lin = r1 + r2
    const = r1 * r2
    with np.errstate(invalid="ignore"):
        t1 = np.where(lin == 0.0, 0.0, lin * mu1)
        t0 = np.where(const == 0.0, 0.0, const * mu0)
    return mu2 - t1 + t0


def _near_weight_local(mesh: Mesh, s: float) -> np.ndarray:
    """Per-cell 2x2 ∫ N_a N_b ρ̂ with ρ̂(x) = [(x-L)^{-2s} + (R-x)^{-2s}]/(2s).

    ``[L, R]`` spans the cell and its two neighbours, clipped to the interval.
    """
    x = mesh.nodes
    n = mesh.n_cells
    h = mesh.widths
    k = np.arange(n)
    left = x[np.maximum(k - 1, 0)]
    right = x[np.minimum(k + 2, n)]
    local = np.zeros((n, 2, 2))

    # Left power term, t = x - L on [d0, d1].
    d0 = x[k] - left
    d1 = x[k + 1] - left
    mu = _power_moments(d0, d1, s)
    i00 = _quadratic_weight_integral(mu, d1, d1)
    i11 = _quadratic_weight_integral(mu, d0, d0)
    i01 = -_quadratic_weight_integral(mu, d0, d1)
    # Right power term, t = R - x on [e1, e0].
    e1 = right - x[k + 1]
    e0 = right - x[k]
    mu = _power_moments(e1, e0, s)
    i00 = i00 + _quadratic_weight_integral(mu, e1, e1)
    i11 = i11 + _quadratic_weight_integral(mu, e0, e0)
    i01 = i01 - _quadratic_weight_integral(mu, e0, e1)

    scale = 1.0 / (2.0 * s * h**2)
    local[:, 0, 0] = i00 * scale
    local[:, 1, 1] = i11 * scale
    local[:, 0, 1] = local[:, 1, 0] = i01 * scale
    # Shape functions of boundary nodes never enter the interior matrix; the
    # corresponding weights may be infinite.
    local[0, 0, :] = local[0, :, 0] = 0.0
    local[-1, 1, :] = local[-1, :, 1] = 0.0
    return local


def _gauss_order(delta: float, target: float = 1e-16) -> int:
    """Gauss points for an analytic integrand with a singularity at normalized distance ``delta``."""
    rho = delta + math.sqrt(delta * delta - 1.0)
    q = math.ceil(-math.log(target) / (2.0 * math.log(rho))) + 2
    return int(min(max(q, 3), 60))


def _far_local(xk, hk, xl, hl, s: float, q: int) -> np.ndarray:
    """∬_{T_k×T_l} N_a(x) N_b(y) |x-y|^{-1-2s} for separated cells, vectorized over pairs."""
    g, w = np.polynomial.legendre.leggauss(q)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    X = xk[:, None] + hk[:, None] * g[None, :]
    Y = xl[:, None] + hl[:, None] * g[None, :]
    K = np.abs(X[:, :, None] - Y[:, None, :]) ** (-1.0 - 2.0 * s)
    K *= (w[:, None] * w[None, :])[None]
    shape = np.stack([1.0 - g, g])  # (2, q)
    out = np.einsum("ai,pij,bj->pab", shape, K, shape)
    return out * (hk * hl)[:, None, None]


def _far_field(mesh: Mesh, s: float) -> np.ndarray:
    """Full (n+1)x(n+1) matrix of ∬ φ_i(x)φ_j(y)K over cell pairs at least two apart."""
    x = mesh.nodes
    h = mesh.widths
    n = mesh.n_cells
    far = np.zeros((n + 1, n + 1))
    for d in range(2, n):
        k = np.arange(n - d)
        l = k + d
        gap = x[l] - x[k + 1]
        hmax = np.maximum(h[k], h[l])
        delta = 1.0 + 2.0 * float(np.min(gap / hmax))
        q = _gauss_order(delta)
        if mesh.uniform:
            loc = np.broadcast_to(_far_local(x[:1], h[:1], x[d:d + 1], h[d:d + 1], s, q), (k.size, 2, 2))
        else:
            loc = _far_local(x[k], h[k], x[l], h[l], s, q)
        for a in range(2):
            for b in range(2):
                r = k + a
                c = l + b
                far[r, c] += loc[:, a, b]
                far[c, r] += loc[:, a, b]
    return far


def assemble_stiffness(mesh: Mesh, s: float) -> np.ndarray:
    """Dense symmetric matrix A_ij = E(φ_i, φ_j) over interior hat functions."""
    s = _check_s(s)
    c = normalization_constant(s)
    h = mesh.widths
    n = mesh.n_cells
    full = np.zeros((n + 1, n + 1))
    k = np.arange(n)

    # Same-cell pairs: (φ_i(x)-φ_i(y)) = slope_i (x-y).
    same = 2.0 * h ** (3 - 2 * s) / ((2 - 2 * s) * (3 - 2 * s))
    slopes = np.stack([-1.0 / h, 1.0 / h], axis=1)
    local = 0.5 * c * same[:, None, None] * slopes[:, :, None] * slopes[:, None, :]

    # Closed-form weight combining the far-field diagonal and the exterior.
    local = local + c * _near_weight_local(mesh, s)
    for a in range(2):
        for b in range(2):
            np.add.at(full, (k + a, k + b), local[:, a, b])

    # Neighbouring cells sharing node k+1; both orderings of (x, y).
    if n >= 2:
        kk = np.arange(n - 1)
        h1 = h[kk]
        h2 = h[kk + 1]
        f20 = corner_moment(h1, h2, 2, 0, s)
        f11 = corner_moment(h1, h2, 1, 1, s)
        f02 = corner_moment(h1, h2, 0, 2, s)
        zero = np.zeros_like(h1)
        # slopes of nodes (k, k+1, k+2) on the left and right cell
        s_left = np.stack([-1.0 / h1, 1.0 / h1, zero], axis=1)
        s_right = np.stack([zero, -1.0 / h2, 1.0 / h2], axis=1)
        for a in range(3):
            for b in range(3):
                val = (
                    s_left[:, a] * s_left[:, b] * f20
                    + (s_left[:, a] * s_right[:, b] + s_right[:, a] * s_left[:, b]) * f11
                    + s_right[:, a] * s_right[:, b] * f02
                )
                np.add.at(full, (kk + a, kk + b), c * val)

    full -= c * _far_field(mesh, s)
    A = full[1:-1, 1:-1].copy()
    # exact symmetry regardless of summation order
    A = 0.5 * (A + A.T)
    return A


def assemble_mass_full(mesh: Mesh) -> sp.csr_matrix:
    """P1 mass matrix over all nodes, boundary included."""
    h = mesh.widths
    n = mesh.n_cells
    diag = np.zeros(n + 1)
    diag[:-1] += h / 3.0
    diag[1:] += h / 3.0
    off = h / 6.0
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def assemble_mass_p1(mesh: Mesh) -> sp.csr_matrix:
    """Interior P1 mass matrix (entries 2h/3 and h/6 on uniform meshes)."""
    return assemble_mass_full(mesh)[1:-1, 1:-1].tocsr()


def assemble_coupling(mesh: Mesh) -> sp.csr_matrix:
    """B_ik = ∫_{T_k} φ_i for interior hats i and cells k."""
    h = mesh.widths
    n = mesh.n_cells
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    vals = np.concatenate([h / 2.0, h / 2.0])
    full = sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))
    return full[1:-1].tocsr()


class FracOperator:
    """Assembled discrete operators for a fixed mesh and order ``s``.

    Holds the stiffness matrix ``A``, the interior and full P1 mass matrices,
    the P1×P0 coupling ``B`` and a Cholesky factorization of ``A``.  All
    arrays are read-only; the control-to-state matrix is computed lazily.
    """

    method = METHOD

    def __init__(self, mesh: Mesh, s: float, A: np.ndarray | None = None):
        self.mesh = mesh
        self.s = _check_s(s)
        self.c_ns = normalization_constant(self.s)
        A = assemble_stiffness(mesh, self.s) if A is None else np.array(A, dtype=float)
        if A.shape != (mesh.n_interior, mesh.n_interior):
            raise OperatorError(f"stiffness matrix has shape {A.shape}")
        A.setflags(write=False)
        self.A = A
        self.M = assemble_mass_p1(mesh)
        self.M_full = assemble_mass_full(mesh)
        self.B = assemble_coupling(mesh)
        try:
            self._chol = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise OperatorError(f"Cholesky factorization of the stiffness matrix failed: {exc}") from exc
        self._state_map = None

    @property
    def n(self) -> int:
        return self.mesh.n_interior

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """A^{-1} rhs using the cached factorization."""
        return scipy.linalg.cho_solve(self._chol, rhs, check_finite=False)

    @property
    def state_map(self) -> np.ndarray:
        """Dense control-to-state matrix A^{-1} B (interior nodes × cells)."""
        if self._state_map is None:
            X = self.solve(self.B.toarray())
            X.setflags(write=False)
            self._state_map = X
        return self._state_map

    def dump(self, prefix: str):
        """Write A, M and B as dense text, one row per line, full precision."""
        np.savetxt(f"{prefix}_A.txt", self.A, fmt="%.17e")
        np.savetxt(f"{prefix}_M.txt", self.M.toarray(), fmt="%.17e")
        np.savetxt(f"{prefix}_B.txt", self.B.toarray(), fmt="%.17e")

    def __repr__(self) -> str:
        return f"FracOperator(s={self.s}, mesh={self.mesh!r})"


def assemble_operator(mesh: Mesh, s: float) -> FracOperator:
    return FracOperator(mesh, s)
