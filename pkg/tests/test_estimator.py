import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fracocp.analysis import getoor_profile
from fracocp.estimator import FractionalControlEstimator
from fracocp.exceptions import ConfigurationError


@pytest.fixture(scope="module")
def nodes():
    return np.linspace(-0.5, 0.5, 33)


class TestEstimator:
    def test_params_roundtrip(self):
        est = FractionalControlEstimator(s=0.4, alpha=0.1, z_lo=0.0, z_hi=10.0)
        params = est.get_params()
        assert params["s"] == 0.4 and params["z_hi"] == 10.0
        assert clone(est).get_params() == params
        est.set_params(alpha=0.5)
        assert est.alpha == 0.5

    def test_predict_before_fit(self, nodes):
        with pytest.raises(NotFittedError):
            FractionalControlEstimator().predict(nodes)

    def test_fit_path(self, nodes):
        est = FractionalControlEstimator(s=0.4, z_lo=0.0, z_hi=10.0, count=8).fit(nodes)
        assert est.converged_
        assert len(est.path_report_.records) == 8
        assert est.gamma_ == pytest.approx(0.1 * 4.0**7)
        u = est.predict(nodes)
        assert u.shape == nodes.shape and u[0] == 0.0 and u[-1] == 0.0
        assert est.predict_control([0.0]).shape == (1,)

    def test_fit_fixed_gamma_with_target(self, nodes):
        y = getoor_profile(0.5, nodes)
        est = FractionalControlEstimator(s=0.5, gamma=100.0).fit(nodes.reshape(-1, 1), y)
        assert est.path_report_ is None and est.converged_
        assert est.multiplier_.l1 >= 0

    def test_unsorted_nodes_accepted(self, nodes):
        perm = np.random.default_rng(0).permutation(nodes.size)
        a = FractionalControlEstimator(s=0.5, gamma=10.0).fit(nodes)
        b = FractionalControlEstimator(s=0.5, gamma=10.0).fit(nodes[perm])
        np.testing.assert_allclose(a.control_.values, b.control_.values, atol=1e-12)

    def test_input_validation(self, nodes):
        with pytest.raises(ValueError):
            FractionalControlEstimator().fit(np.c_[nodes, nodes])
        with pytest.raises(ValueError):
            FractionalControlEstimator().fit(nodes, np.ones(3))
        with pytest.raises(ConfigurationError):
            FractionalControlEstimator(s=0.2).fit(nodes)

    def test_one_sided_bound(self, nodes):
        est = FractionalControlEstimator(s=0.5, gamma=10.0, z_lo=0.0).fit(nodes)
        assert est.control_.values.min() >= 0.0
