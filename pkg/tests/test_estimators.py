import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from whflow.estimators import OBSERVABLE_NAMES, CouplingFlowEstimator, GridFlowEstimator, SchrodingerEstimator

# rows: harmonic, single well lambda0 = 1, weak double well (grid flow stops at the spinodal)
X = np.array([[0, 0, 0.5, 0, 0], [0, 0, 0.5, 0, 1.0], [0, 0, -0.5, 0, 0.02]])


def test_params_and_clone():
    est = GridFlowEstimator(points=801)
    assert est.get_params()["points"] == 801
    twin = clone(est).set_params(lambda0=50.0)
    assert twin.lambda0 == 50.0 and est.lambda0 == 100.0


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        SchrodingerEstimator().predict(X)


def test_fit_validates_width_and_parameters():
    with pytest.raises(ValueError):
        SchrodingerEstimator().fit(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        GridFlowEstimator(lambda_ir=200.0).fit(X)
    with pytest.raises(ValueError):
        CouplingFlowEstimator(order=1).fit(X)
    est = SchrodingerEstimator().fit(X)
    with pytest.raises(ValueError):
        est.predict(X[:, :3])


def test_grid_estimator_rows_and_failures():
    est = GridFlowEstimator().fit(X)
    out = est.predict(X)
    assert out.shape == (3, len(OBSERVABLE_NAMES))
    assert list(est.get_feature_names_out()) == list(OBSERVABLE_NAMES)
    e0, gap = out[0, 1], out[0, 2]
    assert e0 == pytest.approx(0.5, abs=1e-3) and gap == pytest.approx(1.0, abs=1e-3)
    assert np.all(np.isnan(out[2]))
    assert set(est.failures_) == {2}


def test_estimators_agree_on_single_well():
    rows = X[1:2]
    grid = GridFlowEstimator().fit(rows).predict(rows)[0]
    series = CouplingFlowEstimator(order=16).fit(rows).predict(rows)[0]
    exact = SchrodingerEstimator().fit(rows).predict(rows)[0]
    gap = OBSERVABLE_NAMES.index("m_eff")
    assert series[gap] == pytest.approx(grid[gap], rel=5e-3)
    assert grid[gap] == pytest.approx(exact[gap], rel=0.02)


def test_schrodinger_estimator_harmonic_row():
    out = SchrodingerEstimator().fit(X[:1]).predict(X[:1])[0]
    values = dict(zip(OBSERVABLE_NAMES, out))
    assert values["e0"] == pytest.approx(0.5, abs=1e-6)
    assert values["m_eff"] == pytest.approx(1.0, abs=1e-6)
    assert values["m2"] == pytest.approx(0.5, abs=1e-6)
    assert values["lambda_eff"] == pytest.approx(0.0, abs=1e-4)
