"""scikit-learn style facade over the solver.

``fit(X, y)`` takes the mesh nodes as ``X`` and, optionally, nodal values of
the desired state as ``y``; ``predict(X)`` evaluates the optimal state at
arbitrary points of the interval.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .assembly import assemble_operator
from .mesh import build_mesh, evaluate
from .ocp import ProblemConfig, gamma_continuation, recover_multiplier, solve_fixed_gamma

__all__ = ["FractionalControlEstimator"]


def _as_points(X) -> np.ndarray:
    arr = check_array(X, ensure_2d=False, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single feature (the coordinate), got {arr.shape[1]}")
        arr = arr[:, 0]
    return column_or_1d(arr)


class FractionalControlEstimator(BaseEstimator):
    """Optimal control of the fractional Laplacian on a 1D mesh.

    Parameters mirror :class:`~fracocp.ocp.ProblemConfig`.  When ``gamma``
    is None a continuation path ``gamma0 * factor**k`` (k < count) is
    followed and the last solve is kept; otherwise a single solve is run at
    that penalty.

    Attributes
    ----------
    mesh_, operator_ : the mesh built from ``X`` and its assembled operator
    control_, state_, adjoint_ : discrete optimal triple at the final γ
    multiplier_ : :class:`~fracocp.ocp.MultiplierRecord`
    path_report_ : :class:`~fracocp.ocp.PathReport` or None
    n_iter_, converged_, kkt_residual_, gamma_ : solver diagnostics
    """

    def __init__(self, s=0.5, alpha=1e-2, u_b=0.1, mu_hat=0.0, z_lo=None, z_hi=None, gamma=None,
                 gamma0=0.1, factor=4.0, count=13, opt_tol=1e-9, max_iter=5000, method="newton"):
        self.s = s
        self.alpha = alpha
        self.u_b = u_b
        self.mu_hat = mu_hat
        self.z_lo = z_lo
        self.z_hi = z_hi
        self.gamma = gamma
        self.gamma0 = gamma0
        self.factor = factor
        self.count = count
        self.opt_tol = opt_tol
        self.max_iter = max_iter
        self.method = method

    def _config(self, u_d) -> ProblemConfig:
        if (self.z_lo is None) != (self.z_hi is None):
            lo = -np.inf if self.z_lo is None else self.z_lo
            hi = np.inf if self.z_hi is None else self.z_hi
            bounds = (lo, hi)
        elif self.z_lo is None:
            bounds = None
        else:
            bounds = (self.z_lo, self.z_hi)
        return ProblemConfig(
            s=self.s, alpha=self.alpha, u_d=u_d, u_b=self.u_b, mu_hat=self.mu_hat,
            control_bounds=bounds, opt_tol=self.opt_tol, max_iter=self.max_iter, method=self.method,
        )

    def fit(self, X, y=None):
        """Solve the control problem on the mesh with nodes ``X``.

        ``y`` holds the desired state at the nodes; the closed-form profile is
        used when it is omitted.
        """
        nodes = _as_points(X)
        u_d = "getoor" if y is None else column_or_1d(check_array(y, ensure_2d=False, dtype=np.float64))
        if y is not None and u_d.shape != nodes.shape:
            raise ValueError(f"y has {u_d.size} values but X has {nodes.size} nodes")
        order = np.argsort(nodes)
        nodes = nodes[order]
        if y is not None:
            u_d = u_d[order]
        cfg = self._config(u_d)
        self.mesh_ = build_mesh(nodes)
        self.operator_ = assemble_operator(self.mesh_, cfg.s)
        if self.gamma is None:
            self.path_report_ = gamma_continuation(cfg, self.operator_, self.gamma0, self.factor, self.count)
            sol = self.path_report_.final
            self.converged_ = self.path_report_.all_converged
        else:
            self.path_report_ = None
            sol = solve_fixed_gamma(cfg, self.operator_, self.gamma)
            self.converged_ = sol.converged
        self.control_ = sol.z
        self.state_ = sol.u
        self.adjoint_ = sol.xi
        self.gamma_ = sol.gamma
        self.n_iter_ = sol.iterations
        self.kkt_residual_ = sol.kkt_residual
        self.objective_ = sol.objective
        self.multiplier_ = recover_multiplier(cfg, sol.u, sol.gamma)
        return self

    def predict(self, X) -> np.ndarray:
        """Optimal state evaluated at the points ``X``."""
        check_is_fitted(self, "state_")
        return np.atleast_1d(evaluate(self.state_, _as_points(X)))

    def predict_control(self, X) -> np.ndarray:
        """Optimal control evaluated at the points ``X``."""
        check_is_fitted(self, "control_")
        return np.atleast_1d(evaluate(self.control_, _as_points(X)))
