"""State and adjoint solves, with exact integration of the penalty positive part.

Data that need not vanish on the boundary (desired state, multiplier shift,
penalty argument) are passed as *full* nodal vectors over all ``n + 1`` mesh
nodes.  States and adjoints are :class:`~fracocp.mesh.P1Function` objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import FracOperator
from .exceptions import DimensionError, ParameterError
from .mesh import Mesh, P0Function, P1Function

__all__ = [
    "StateProblem",
    "AdjointProblem",
    "PositivePart",
    "solve_state",
    "solve_adjoint",
    "positive_part_load",
    "positive_part_l2norm",
    "positive_part_l1norm",
    "active_mass",
    "penalty_argument",
]


@dataclass(frozen=True)
class PositivePart:
    """Exact integrals of ``(w)₊`` for a piecewise-linear ``w``.

    load : ∫ (w)₊ φ_i for interior hats
    active : boolean mask of cells where ``w > 0`` somewhere
    l1, l2 : ‖(w)₊‖_{L¹}, ‖(w)₊‖_{L²}
    """

    load: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)
    l1: float
    l2: float


def _cell_values(mesh: Mesh, w) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    if w.shape != (mesh.nodes.size,):
        raise DimensionError(f"expected {mesh.nodes.size} nodal values, got {w.shape}")
    return w[:-1], w[1:]


def _split_cells(mesh: Mesh, w):
    """Per-cell exact integrals of (w)₊ against N0 = 1-ξ and N1 = ξ, plus norms."""
    w0, w1 = _cell_values(mesh, w)
    h = mesh.widths
    l0 = np.zeros_like(h)
    l1 = np.zeros_like(h)
    int1 = np.zeros_like(h)
    int2 = np.zeros_like(h)

    both = (w0 >= 0) & (w1 >= 0)
    l0[both] = h[both] * (2 * w0[both] + w1[both]) / 6
    l1[both] = h[both] * (w0[both] + 2 * w1[both]) / 6
    int1[both] = h[both] * (w0[both] + w1[both]) / 2
    int2[both] = h[both] * (w0[both] ** 2 + w0[both] * w1[both] + w1[both] ** 2) / 3

    # rising through zero: positive on [ξ*, 1], length fraction L
    up = (w0 < 0) & (w1 > 0)
    if np.any(up):
        top, hh = w1[up], h[up]
        L = top / (top - w0[up])
        root = 1.0 - L
        l1[up] = hh * top * (L**2 / 3 + root * L / 2)
        l0[up] = hh * top * L**2 / 6
        int1[up] = hh * top * L / 2
        int2[up] = hh * top**2 * L / 3

    # falling through zero: positive on [0, L]
    down = (w0 > 0) & (w1 < 0)
    if np.any(down):
        top, hh = w0[down], h[down]
        L = top / (top - w1[down])
        l0[down] = hh * top * (L**2 / 3 + (1 - L) * L / 2)
        l1[down] = hh * top * L**2 / 6
        int1[down] = hh * top * L / 2
        int2[down] = hh * top**2 * L / 3

    active = (w0 > 0) | (w1 > 0)
    return l0, l1, int1, int2, active


def positive_part_load(mesh: Mesh, w) -> PositivePart:
    """∫_Ω (w)₊ φ_i for all interior hats, with the cell split at sign changes."""
    l0, l1, int1, int2, active = _split_cells(mesh, w)
    full = np.zeros(mesh.nodes.size)
    full[:-1] += l0
    full[1:] += l1
    return PositivePart(full[1:-1], active, float(np.sum(int1)), float(np.sqrt(np.sum(int2))))


def positive_part_l2norm(mesh: Mesh, w) -> float:
    return float(np.sqrt(np.sum(_split_cells(mesh, w)[3])))


def positive_part_l1norm(mesh: Mesh, w) -> float:
    return float(np.sum(_split_cells(mesh, w)[2]))


def active_mass(mesh: Mesh, w) -> sp.csr_matrix:
    """∫_{w>0} φ_i φ_j over interior hats: the generalized derivative of the load in ``w``."""
    w0, w1 = _cell_values(mesh, w)
    h = mesh.widths
    lo = np.zeros_like(h)
    hi = np.zeros_like(h)
    both = (w0 >= 0) & (w1 >= 0) & ((w0 > 0) | (w1 > 0))
    hi[both] = 1.0
    up = (w0 < 0) & (w1 > 0)
    lo[up] = w0[up] / (w0[up] - w1[up])
    hi[up] = 1.0
    down = (w0 > 0) & (w1 < 0)
    hi[down] = w0[down] / (w0[down] - w1[down])

    def f11(x):
        return x**3 / 3

    def f01(x):
        return x**2 / 2 - x**3 / 3

    def f00(x):
        return -((1 - x) ** 3) / 3

    m00 = h * (f00(hi) - f00(lo))
    m01 = h * (f01(hi) - f01(lo))
    m11 = h * (f11(hi) - f11(lo))
    n = mesh.n_cells
    diag = np.zeros(n + 1)
    diag[:-1] += m00
    diag[1:] += m11
    full = sp.diags([m01, diag, m01], [-1, 0, 1], format="csr")
    return full[1:-1, 1:-1].tocsr()


def penalty_argument(u: P1Function, mu_hat, gamma: float, u_b: float = 0.0) -> np.ndarray:
    """Full nodal values of μ̂ + γ(u - u_b)."""
    return np.asarray(mu_hat, dtype=float) + gamma * (u.nodal - u_b)


@dataclass(frozen=True)
class StateProblem:
    operator: FracOperator
    z: P0Function

    def __post_init__(self):
        if not self.z.mesh.same_as(self.operator.mesh):
            raise DimensionError("control and operator live on different meshes")

    def solve(self) -> P1Function:
        return solve_state(self.operator, self.z)


@dataclass(frozen=True)
class AdjointProblem:
    """Data of the discrete adjoint equation.

    ``u_d`` and ``mu_hat`` are full nodal vectors; the penalty uses the
    shifted argument μ̂ + γ(u - u_b).
    """

    operator: FracOperator
    u: P1Function
    u_d: np.ndarray
    mu_hat: np.ndarray
    gamma: float
    u_b: float = 0.0

    def __post_init__(self):
        size = self.operator.mesh.nodes.size
        for name in ("u_d", "mu_hat"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (size,):
                raise DimensionError(f"{name} needs {size} nodal values, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if not self.u.mesh.same_as(self.operator.mesh):
            raise DimensionError("state and operator live on different meshes")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma!r}")
        if np.any(self.mu_hat < 0):
            raise ParameterError("multiplier shift must be non-negative")

    def rhs(self) -> np.ndarray:
        op = self.operator
        tracking = (op.M_full @ (self.u.nodal - self.u_d))[1:-1]
        w = penalty_argument(self.u, self.mu_hat, self.gamma, self.u_b)
        return tracking + positive_part_load(op.mesh, w).load

    def solve(self) -> P1Function:
        return solve_adjoint(self)


def solve_state(op: FracOperator, z: P0Function) -> P1Function:
    """Discrete state: A u = B z."""
    if not z.mesh.same_as(op.mesh):
        raise DimensionError("control and operator live on different meshes")
    return P1Function(op.mesh, op.solve(op.B @ z.values))


def solve_adjoint(prob: AdjointProblem) -> P1Function:
    """Discrete adjoint: A ξ = M(u - u_d) + ∫ (μ̂ + γ(u - u_b))₊ φ."""
    return P1Function(prob.operator.mesh, prob.operator.solve(prob.rhs()))
