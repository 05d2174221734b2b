"""One-dimensional meshes and the two discrete function families.

States live in the space of continuous piecewise-linear functions that vanish
at both endpoints (and on the whole exterior of the interval); controls are
piecewise constant on the cells.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionError, DomainError

__all__ = [
    "Mesh",
    "P1Function",
    "P0Function",
    "build_uniform_mesh",
    "build_mesh",
    "refine",
    "evaluate",
    "interpolate_p1",
    "interpolate_nodal",
    "prolong_p1",
    "prolong_p0",
]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mesh:
    """Partition ``a = x_0 < x_1 < ... < x_n = b`` of the interval ``(a, b)``."""

    nodes: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ConfigurationError("a mesh needs at least 2 cells (3 nodes)")
        if not np.all(np.isfinite(nodes)):
            raise ConfigurationError("mesh nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @property
    def n_interior(self) -> int:
        return self.nodes.size - 2

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        return float(self.widths.max())

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def cell_index(self, x) -> np.ndarray:
        """Cell containing ``x``; interior nodes resolve to the cell on their left."""
        x = np.asarray(x, dtype=float)
        self._check_inside(x)
        idx = np.searchsorted(self.nodes, x, side="left") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def _check_inside(self, x: np.ndarray):
        if np.any(~np.isfinite(x)) or np.any(x < self.a) or np.any(x > self.b):
            raise DomainError(f"point(s) outside [{self.a}, {self.b}]")

    def same_as(self, other: "Mesh") -> bool:
        return self is other or (
            self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)
        )

    def __repr__(self) -> str:
        kind = "uniform" if self.uniform else "nonuniform"
        return f"Mesh({kind}, a={self.a:g}, b={self.b:g}, n_cells={self.n_cells})"


@dataclass(frozen=True, eq=False)
class P1Function:
    """Continuous piecewise-linear function, zero at ``a``, ``b`` and outside."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.mesh.n_interior,):
            raise DimensionError(
                f"P1 function needs {self.mesh.n_interior} interior values, got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def nodal(self) -> np.ndarray:
        """Values at all mesh nodes, boundary zeros included."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True, eq=False)
class P0Function:
    """Piecewise-constant function, one value per cell."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.mesh.n_cells,):
            raise DimensionError(
                f"P0 function needs {self.mesh.n_cells} cell values, got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.mesh.widths * self.values**2)))

    def __call__(self, x):
        return evaluate(self, x)


def build_mesh(nodes) -> Mesh:
    """Mesh from an arbitrary strictly increasing node sequence."""
    nodes = np.asarray(nodes, dtype=float)
    w = np.diff(nodes)
    uniform = bool(w.size > 0 and np.allclose(w, w[0], rtol=1e-13, atol=0.0))
    return Mesh(nodes, uniform=uniform)


def build_uniform_mesh(a: float, b: float, n: int) -> Mesh:
    """Uniform mesh of ``n`` equal cells on ``(a, b)``."""
    if int(n) != n or n < 2:
        raise ConfigurationError(f"number of cells must be an integer >= 2, got {n!r}")
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise ConfigurationError(f"need a < b, got a={a!r}, b={b!r}")
    n = int(n)
    nodes = a + (b - a) * np.arange(n + 1) / n
    nodes[-1] = b
    return Mesh(nodes, uniform=True)


def refine(mesh: Mesh) -> Mesh:
    """Bisect every cell."""
    x = mesh.nodes
    fine = np.empty(2 * x.size - 1)
    fine[0::2] = x
    fine[1::2] = 0.5 * (x[:-1] + x[1:])
    return Mesh(fine, uniform=mesh.uniform)


def evaluate(f, x):
    """Point values of a P1 or P0 function; raises DomainError outside ``[a, b]``."""
    x_arr = np.asarray(x, dtype=float)
    f.mesh._check_inside(x_arr)
    if isinstance(f, P1Function):
        out = np.interp(x_arr, f.mesh.nodes, f.nodal)
    elif isinstance(f, P0Function):
        out = f.values[f.mesh.cell_index(x_arr)]
    else:
        raise TypeError(f"cannot evaluate {type(f).__name__}")
    return float(out) if np.ndim(out) == 0 else out


def interpolate_nodal(mesh: Mesh, func) -> np.ndarray:
    """Nodal values of ``func`` at every mesh node (boundary included)."""
    return np.asarray(func(mesh.nodes), dtype=float) * np.ones(mesh.nodes.size)


def interpolate_p1(mesh: Mesh, func) -> P1Function:
    """P1 interpolant of ``func``; boundary values are discarded (set to zero)."""
    return P1Function(mesh, interpolate_nodal(mesh, func)[1:-1])


def prolong_p1(f: P1Function, fine: Mesh) -> P1Function:
    """Exact re-expression of a P1 function on a nested finer mesh."""
    return P1Function(fine, np.interp(fine.interior_nodes, f.mesh.nodes, f.nodal))


def prolong_p0(f: P0Function, fine: Mesh) -> P0Function:
    """Re-express a P0 function on a nested finer mesh (cell midpoints locate parents)."""
    return P0Function(fine, f.values[f.mesh.cell_index(fine.midpoints)])
