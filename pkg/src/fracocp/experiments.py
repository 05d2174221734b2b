"""Experiment runners shared by the command line and the validation suite.

The mesh-refinement study follows the reference-projection recipe: the
problem is solved on a fine reference mesh, the reference control and state
are L²-projected onto each coarse mesh, and the distance to the coarse
solution is measured there.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analysis import RateFit, fit_rate, l2_norm
from .assembly import assemble_mass_full, assemble_mass_p1, assemble_operator
from .exceptions import ConfigurationError, FitError, FracOCPError
from .mesh import Mesh, P0Function, P1Function, build_uniform_mesh, prolong_p0, prolong_p1
from .ocp import OcpSolution, PathReport, ProblemConfig, gamma_continuation, solve_fixed_gamma

__all__ = [
    "HSweepRow",
    "HSweepReport",
    "prolongation_matrix",
    "project_p0",
    "project_p1",
    "h_sweep",
    "gamma_sweep",
]

log = logging.getLogger(__name__)


def _check_nested(coarse: Mesh, fine: Mesh) -> np.ndarray:
    pos = np.searchsorted(fine.nodes, coarse.nodes)
    if np.any(pos >= fine.nodes.size) or not np.allclose(
        fine.nodes[np.minimum(pos, fine.nodes.size - 1)], coarse.nodes, rtol=0, atol=1e-14
    ):
        raise ConfigurationError("reference mesh is not a refinement of the coarse mesh")
    return pos


def prolongation_matrix(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """Full-nodal matrix P with P @ coarse_nodal = fine_nodal for nested meshes."""
    _check_nested(coarse, fine)
    cells = coarse.cell_index(fine.nodes)
    x0 = coarse.nodes[cells]
    t = (fine.nodes - x0) / coarse.widths[cells]
    rows = np.concatenate([np.arange(fine.nodes.size)] * 2)
    cols = np.concatenate([cells, cells + 1])
    vals = np.concatenate([1.0 - t, t])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(fine.nodes.size, coarse.nodes.size))
    P.eliminate_zeros()
    return P


def project_p0(z: P0Function, coarse: Mesh) -> P0Function:
    """L² projection of a fine P0 function onto a nested coarse mesh (cell averages)."""
    pos = _check_nested(coarse, z.mesh)
    mass = np.concatenate(([0.0], np.cumsum(z.mesh.widths * z.values)))
    return P0Function(coarse, np.diff(mass[pos]) / coarse.widths)


def project_p1(u: P1Function, coarse: Mesh) -> P1Function:
    """L² projection of a fine P1 function onto the coarse P1 space (zero boundary)."""
    P = prolongation_matrix(coarse, u.mesh)[:, 1:-1]
    rhs = P.T @ (assemble_mass_full(u.mesh) @ u.nodal)
    vals = spla.spsolve(assemble_mass_p1(coarse).tocsc(), rhs)
    return P1Function(coarse, np.atleast_1d(vals))


@dataclass
class HSweepRow:
    h: float
    n: int
    err_u_l2: float
    err_z_l2: float
    kkt: float
    iters: int
    converged: bool


@dataclass
class HSweepReport:
    rows: list = field(default_factory=list)
    reference_n: int = 0
    reference: OcpSolution | None = field(default=None, repr=False)
    fit_u: RateFit | None = None
    fit_z: RateFit | None = None
    failed: str | None = None

    @property
    def all_converged(self) -> bool:
        return self.failed is None and all(r.converged for r in self.rows) and (
            self.reference is not None and self.reference.converged
        )


def _solve_level(cfg: ProblemConfig, a: float, b: float, n: int, gamma: float, z0=None) -> OcpSolution:
    mesh = build_uniform_mesh(a, b, n)
    op = assemble_operator(mesh, cfg.s)
    return solve_fixed_gamma(cfg, op, gamma, z0)


def h_sweep(cfg: ProblemConfig, a: float, b: float, levels, reference_n: int, gamma: float,
            workers: int = 1) -> HSweepReport:
    """Self-convergence study at fixed γ against a reference solution.

    Coarse levels are independent and may run on ``workers`` threads; the
    reference solve is warm-started from the finest coarse control.
    """
    levels = sorted(int(n) for n in levels)
    if len(levels) < 1 or levels[-1] > reference_n or any(reference_n % n for n in levels):
        raise ConfigurationError("reference_n must be a multiple of every level and at least the finest")
    report = HSweepReport(reference_n=reference_n)
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                coarse = list(pool.map(lambda n: _solve_level(cfg, a, b, n, gamma), levels))
        else:
            coarse = [_solve_level(cfg, a, b, n, gamma) for n in levels]
        fine_mesh = build_uniform_mesh(a, b, reference_n)
        z0 = prolong_p0(coarse[-1].z, fine_mesh)
        ref = solve_fixed_gamma(cfg, assemble_operator(fine_mesh, cfg.s), gamma, z0)
    except FracOCPError as exc:
        report.failed = str(exc)
        log.error("h-sweep failed: %s", exc)
        return report
    report.reference = ref
    for n, sol in zip(levels, coarse):
        mesh = sol.z.mesh
        ez = l2_norm(P0Function(mesh, project_p0(ref.z, mesh).values - sol.z.values))
        eu = l2_norm(P1Function(mesh, project_p1(ref.u, mesh).values - sol.u.values))
        report.rows.append(HSweepRow(mesh.h, n, eu, ez, sol.kkt_residual, sol.iterations, sol.converged))
    if len(report.rows) >= 3:
        hs = [r.h for r in report.rows]
        try:
            report.fit_u = fit_rate(hs, [r.err_u_l2 for r in report.rows])
            report.fit_z = fit_rate(hs, [r.err_z_l2 for r in report.rows])
        except FitError as exc:
            log.warning("rate fit skipped: %s", exc)
    return report


def fine_distance(coarse: OcpSolution, reference: OcpSolution) -> tuple[float, float]:
    """Exact L² distances (state, control) after prolonging the coarse solution."""
    fine = reference.z.mesh
    du = prolong_p1(coarse.u, fine).values - reference.u.values
    dz = prolong_p0(coarse.z, fine).values - reference.z.values
    return l2_norm(P1Function(fine, du)), l2_norm(P0Function(fine, dz))


def gamma_sweep(cfg: ProblemConfig, a: float, b: float, n: int, gamma0: float, factor: float,
                count: int, dump_prefix: str | None = None) -> PathReport:
    """Continuation path on one uniform mesh (sequential: every solve warm-starts the next)."""
    mesh = build_uniform_mesh(a, b, n)
    op = assemble_operator(mesh, cfg.s)
    if dump_prefix:
        op.dump(dump_prefix)
    return gamma_continuation(cfg, op, gamma0, factor, count)
