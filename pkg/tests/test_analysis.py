import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracocp.analysis import (
    RATE_EPS,
    SSN_ORACLE_MAX_CELLS,
    energy_norm,
    expected_control_rate,
    expected_state_rate,
    fit_rate,
    fractional_laplacian_pointwise,
    getoor_constant,
    getoor_constant_2d,
    getoor_profile,
    l2_error,
    l2_norm,
    quadrature_oracle_entry,
    semismooth_newton_oracle,
    violation_norms,
)
from fracocp.assembly import assemble_operator, assemble_stiffness
from fracocp.exceptions import DimensionError, FitError, ParameterError
from fracocp.mesh import P1Function, build_uniform_mesh
from fracocp.ocp import ProblemConfig


class TestGetoor:
    def test_half(self):
        assert getoor_constant(0.5) == pytest.approx(1.0, rel=1e-15)
        assert getoor_profile(0.5, 0.0) == pytest.approx(0.5)

    def test_two_dimensional_prefactor(self):
        s = 0.2
        assert getoor_constant_2d(s) == pytest.approx(2 ** (-2 * s) / math.gamma(1 + s) ** 2)

    @pytest.mark.parametrize("x", [-0.5, 0.5, 0.7, -3.0])
    def test_vanishes_outside(self, x):
        assert getoor_profile(0.3, x) == 0.0

    def test_invalid_s(self):
        with pytest.raises(ParameterError):
            getoor_profile(1.2, 0.0)

    @pytest.mark.parametrize("s", [0.3, 0.7])
    def test_pointwise_laplacian_is_one(self, s):
        c = getoor_constant(s)

        def f(x):
            r = mpmath.mpf(0.25) - x * x
            return c * mpmath.power(r, s) if r > 0 else mpmath.mpf(0)

        for x in (0.0, 0.21, -0.4):
            assert fractional_laplacian_pointwise(f, s, x, (-0.5, 0.5), (-0.5, 0.5)) == pytest.approx(1.0, abs=1e-6)


class TestQuadratureOracle:
    def test_symmetry(self, mesh16):
        a = quadrature_oracle_entry(mesh16, 0.7, 2, 5)
        b = quadrature_oracle_entry(mesh16, 0.7, 5, 2)
        assert a == pytest.approx(b, rel=1e-10)

    def test_log_branch_point(self, mesh16):
        A = assemble_stiffness(mesh16, 0.5)
        for i, j in [(0, 0), (3, 4), (2, 9)]:
            assert quadrature_oracle_entry(mesh16, 0.5, i, j) == pytest.approx(A[i, j], rel=1e-8)

    def test_index_range(self, mesh16):
        with pytest.raises(DimensionError):
            quadrature_oracle_entry(mesh16, 0.5, 0, 15)


class TestSemismoothOracle:
    def test_size_guard(self):
        op = assemble_operator(build_uniform_mesh(-0.5, 0.5, SSN_ORACLE_MAX_CELLS + 2), 0.5)
        with pytest.raises(ParameterError):
            semismooth_newton_oracle(ProblemConfig(s=0.5), op, 10.0)

    def test_linear_quadratic_one_step(self, op8):
        cfg = ProblemConfig(s=0.5, alpha=0.1, u_b=100.0)
        sol = semismooth_newton_oracle(cfg, op8, 10.0)
        assert sol.iterations == 1
        X = op8.state_map
        M = op8.M.toarray()
        h = op8.mesh.widths
        from fracocp.ocp import ReducedProblem
        ud = ReducedProblem(cfg, op8).u_d
        rhs = X.T @ (op8.M_full @ ud)[1:-1]
        z = np.linalg.solve(cfg.alpha * np.diag(h) + X.T @ M @ X, rhs)
        np.testing.assert_allclose(sol.z.values, z, atol=1e-12)

    def test_restart_is_idempotent(self, op8):
        cfg = ProblemConfig(s=0.5, alpha=0.1, control_bounds=(0.0, 10.0))
        sol = semismooth_newton_oracle(cfg, op8, 100.0)
        again = semismooth_newton_oracle(cfg, op8, 100.0, sol.z)
        assert again.iterations == 0


class TestNorms:
    def test_p1_norm_exact(self):
        m = build_uniform_mesh(0, 1, 2)
        u = P1Function(m, [1.0])
        assert l2_norm(u) == pytest.approx(math.sqrt(1 / 3))

    def test_self_error(self, mesh16, rng):
        u = P1Function(mesh16, rng.normal(size=15))
        assert l2_error(u, u) == 0.0
        with pytest.raises(DimensionError):
            l2_error(u, P1Function(build_uniform_mesh(-0.5, 0.5, 8), np.zeros(7)))

    def test_energy_norm(self, op16, rng):
        u = P1Function(op16.mesh, rng.normal(size=15))
        assert energy_norm(op16, u) > 0
        assert energy_norm(op16, P1Function(op16.mesh, np.zeros(15))) == 0.0

    def test_violation_at_bound(self, mesh16):
        u = P1Function(mesh16, np.full(15, 0.1))
        assert violation_norms(u, 0.1) == (0.0, 0.0)

    def test_violation_exact(self):
        m = build_uniform_mesh(0, 1, 2)
        l2, sup = violation_norms(P1Function(m, [2.0]), 1.0)
        # (2·hat - 1)₊ is positive on [1/4, 3/4] with peak 1: two triangles of height 1, base 1/4
        assert sup == pytest.approx(1.0)
        assert l2 == pytest.approx(math.sqrt(2 * 0.25 / 3))


class TestRates:
    def test_constants(self):
        assert RATE_EPS == 0.05
        assert expected_state_rate(0.3) == pytest.approx(0.6)
        assert expected_state_rate(0.7) == pytest.approx(0.95)
        assert expected_control_rate(0.2) == pytest.approx(0.6)
        assert expected_control_rate(0.5) == pytest.approx(0.95)

    def test_exact_halving(self):
        assert fit_rate([1, 2, 4], [1, 0.5, 0.25]).slope == pytest.approx(-1.0)

    def test_constant(self):
        assert fit_rate([1, 2, 4, 8], [3, 3, 3, 3]).slope == pytest.approx(0.0, abs=1e-14)

    def test_noisy(self, rng):
        xs = 2.0 ** np.arange(8)
        errs = (1 / xs) * (1 + 0.01 * rng.uniform(-1, 1, size=8))
        assert fit_rate(xs, errs).slope == pytest.approx(-1.0, abs=0.05)

    @given(st.floats(1e-6, 1e6))
    def test_scale_invariant(self, c):
        xs = np.array([1.0, 2.0, 4.0, 8.0])
        errs = np.array([1.0, 0.4, 0.3, 0.05])
        assert fit_rate(xs, c * errs).slope == pytest.approx(fit_rate(xs, errs).slope, rel=1e-9)

    def test_floor_window(self):
        g = 4.0 ** np.arange(10)
        errs = np.r_[1 / g[:7], (1 / g[6]) * np.array([0.9, 0.85, 0.83])]
        fit = fit_rate(g, errs, window="floor")
        assert fit.window == (0, 7)
        assert fit.slope == pytest.approx(-1.0)

    def test_asymptotic_window_trims_start(self):
        g = 4.0 ** np.arange(8)
        errs = np.r_[1.0, 0.95, 0.9 / g[2:] * g[2]]
        fit = fit_rate(g, errs, window="asymptotic")
        assert fit.window[0] >= 1 and fit.slope == pytest.approx(-1.0, abs=1e-9)

    @pytest.mark.parametrize("xs,errs", [([1, 2], [1, 0.5]), ([1, 2, 2], [1, 1, 1]), ([1, 2, 3], [1, 0, 1])])
    def test_bad_input(self, xs, errs):
        with pytest.raises(FitError):
            fit_rate(xs, errs)
