import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracocp.exceptions import ConfigurationError, DimensionError, DomainError
from fracocp.mesh import (
    P0Function,
    P1Function,
    build_mesh,
    build_uniform_mesh,
    evaluate,
    interpolate_p1,
    prolong_p0,
    prolong_p1,
    refine,
)


class TestBuild:
    def test_uniform(self):
        m = build_uniform_mesh(-0.5, 0.5, 4)
        np.testing.assert_allclose(m.nodes, [-0.5, -0.25, 0.0, 0.25, 0.5])
        assert m.uniform
        assert m.n_cells == 4 and m.n_interior == 3
        assert m.h == pytest.approx(0.25)

    def test_nonuniform_detected(self):
        m = build_mesh([0.0, 0.1, 0.5, 1.0])
        assert not m.uniform
        np.testing.assert_allclose(m.widths, [0.1, 0.4, 0.5])

    @pytest.mark.parametrize("nodes", [[0.0, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0, np.nan, 1.0], [1.0, 0.5, 0.0]])
    def test_invalid_nodes(self, nodes):
        with pytest.raises(ConfigurationError):
            build_mesh(nodes)

    @pytest.mark.parametrize("a,b,n", [(0, 1, 1), (1, 0, 4), (0, 1, 2.5)])
    def test_invalid_uniform(self, a, b, n):
        with pytest.raises(ConfigurationError):
            build_uniform_mesh(a, b, n)

    def test_nodes_read_only(self):
        m = build_uniform_mesh(0, 1, 4)
        with pytest.raises(ValueError):
            m.nodes[1] = 0.3

    def test_refine_bisects(self):
        m = refine(build_mesh([0.0, 0.2, 1.0]))
        np.testing.assert_allclose(m.nodes, [0.0, 0.1, 0.2, 0.6, 1.0])


class TestLocate:
    def test_interior_node_goes_left(self):
        m = build_uniform_mesh(0, 1, 4)
        assert m.cell_index(0.25) == 0
        assert m.cell_index(0.0) == 0
        assert m.cell_index(1.0) == 3

    def test_outside_raises(self):
        m = build_uniform_mesh(0, 1, 4)
        with pytest.raises(DomainError):
            m.cell_index(1.5)
        with pytest.raises(DomainError):
            evaluate(P0Function(m, np.ones(4)), -0.1)


class TestFunctions:
    def test_p1_shape_checked(self):
        m = build_uniform_mesh(0, 1, 4)
        with pytest.raises(DimensionError):
            P1Function(m, np.ones(4))
        with pytest.raises(DimensionError):
            P0Function(m, np.ones(3))

    def test_p1_evaluation_interpolates(self):
        m = build_uniform_mesh(0, 1, 4)
        u = P1Function(m, [1.0, 2.0, 1.0])
        assert u(0.125) == pytest.approx(0.5)
        assert u(0.5) == pytest.approx(2.0)
        assert u(1.0) == 0.0
        np.testing.assert_allclose(u.nodal, [0, 1, 2, 1, 0])

    def test_p0_l2_norm(self):
        m = build_mesh([0.0, 0.5, 2.0])
        z = P0Function(m, [2.0, 1.0])
        assert z.l2_norm() == pytest.approx(np.sqrt(0.5 * 4 + 1.5))

    def test_interpolation_drops_boundary(self):
        m = build_uniform_mesh(0, 1, 4)
        u = interpolate_p1(m, lambda x: 1 + x)
        np.testing.assert_allclose(u.nodal, [0, 1.25, 1.5, 1.75, 0])

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
    def test_prolongation_is_exact(self, vals):
        m = build_uniform_mesh(0, 1, 4)
        fine = refine(m)
        u = P1Function(m, vals)
        uf = prolong_p1(u, fine)
        xs = np.linspace(0, 1, 37)
        np.testing.assert_allclose(uf(xs), u(xs), atol=1e-12)
        z = P0Function(m, [1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(prolong_p0(z, fine).values, [1, 1, 2, 2, 3, 3, 4, 4])
