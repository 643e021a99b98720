import math

import numpy as np
import pytest

from convexreg.blse import (BlseSpec, ConvexRegressor, build_blse_qp,
                            counterexample_closed_form, counterexample_lse_d1, fit_blse)
from convexreg.funcspace import convexity_violation
from convexreg.geometry import Ball, Polytope, sample_design
from oracles import three_point_projection

TOL = 1e-6
UNIT = Polytope.interval(0.0, 1.0)


def test_two_points_two_convexity_rows():
    qp = build_blse_qp(BlseSpec([[0.0], [1.0]], [0.0, 1.0]))
    assert qp.n_constraints == 2
    assert qp.n_variables == 4


def test_counting_d2_unbounded():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    qp = build_blse_qp(BlseSpec(X, [0.0, 1.0, 2.0]))
    assert (qp.n_variables, qp.n_constraints) == (9, 6)


def test_boundary_rows_per_vertex():
    dom = Polytope.hypercube(2)
    X = sample_design(dom, 5, 0)
    qp = build_blse_qp(BlseSpec(X, np.zeros(5), 1.0, dom))
    k = len(dom.vertices)
    # convexity, box, boundary
    assert qp.n_constraints == 5 * 4 + 5 + 5 * k


def test_ball_uses_64d_boundary_points():
    dom = Ball([0.0, 0.0], 1.0)
    spec = BlseSpec(sample_design(dom, 4, 1), np.zeros(4), 1.0, dom)
    assert spec.boundary_points.shape == (128, 2)


def test_convex_data_fit_exactly():
    fit = fit_blse(BlseSpec([[0.0], [1.0]], [0.0, 1.0], 10.0, UNIT), tol=TOL)
    np.testing.assert_allclose(fit.y_hat, [0.0, 1.0], atol=10 * TOL)


@pytest.mark.parametrize("Y", [(0.0, 1.0, 0.0), (1.0, 2.0, -1.0), (3.0, 0.0, 1.0),
                               (0.2, 0.1, 0.4)])
def test_three_point_projection(Y):
    x = np.array([0.0, 0.5, 1.0])
    fit = fit_blse(BlseSpec(x[:, None], Y, 10.0, UNIT), tol=1e-9)
    np.testing.assert_allclose(fit.y_hat, three_point_projection(Y), atol=1e-7)
    assert fit.y_hat[1] <= (fit.y_hat[0] + fit.y_hat[2]) / 2 + 1e-8


def test_box_bound_binds():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(30, 1))
    Y = 5.0 * rng.standard_normal(30)
    gamma = 0.5
    fit = fit_blse(BlseSpec(X, Y, gamma, UNIT), tol=TOL)
    assert np.max(np.abs(fit.y_hat)) <= gamma + 10 * TOL
    assert fit.solver_report["sup_over_domain"] <= gamma + 10 * TOL


def test_interpolation_and_convexity_d2():
    dom = Polytope.hypercube(2)
    rng = np.random.default_rng(4)
    X = sample_design(dom, 40, rng)
    Y = np.sum(X ** 2, axis=1) + 0.3 * rng.standard_normal(40)
    fit = fit_blse(BlseSpec(X, Y, 3.0, dom), tol=TOL)
    assert np.max(np.abs(fit.estimator(X) - fit.y_hat)) <= 10 * TOL
    assert convexity_violation(fit.estimator, dom, 1000, seed=0) <= 1e-12


def test_residual_optimality_against_truth():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(50, 1))
    f0 = X[:, 0] ** 2
    Y = f0 + 0.5 * rng.standard_normal(50)
    fit = fit_blse(BlseSpec(X, Y, 2.0, UNIT), tol=TOL)
    assert np.sum((Y - fit.y_hat) ** 2) <= np.sum((Y - f0) ** 2) + 100 * TOL


def test_objective_monotone_in_gamma():
    rng = np.random.default_rng(6)
    X = rng.uniform(size=(40, 1))
    Y = 4.0 * X[:, 0] ** 2 - 1 + rng.standard_normal(40)
    objs = []
    for gamma in (0.25, 0.5, 1.0, 2.0, 4.0, math.inf):
        fit = fit_blse(BlseSpec(X, Y, gamma, UNIT), tol=TOL)
        objs.append(np.sum((Y - fit.y_hat) ** 2))
    assert all(b <= a + 100 * TOL for a, b in zip(objs, objs[1:]))


def test_duplicates_share_fitted_value():
    X = np.array([[0.0], [0.5], [0.5], [1.0]])
    Y = np.array([0.0, 1.0, -1.0, 1.0])
    fit = fit_blse(BlseSpec(X, Y, 10.0, UNIT), tol=1e-9)
    assert fit.y_hat[1] == fit.y_hat[2]
    # the merged problem is the weighted three-point one with mean response 0
    np.testing.assert_allclose(fit.y_hat, [0.0, 0.0, 0.0, 1.0], atol=1e-7)


def test_design_outside_domain_rejected():
    with pytest.raises(ValueError):
        BlseSpec([[1.5]], [0.0], 1.0, UNIT)


def test_finite_gamma_needs_domain():
    with pytest.raises(ValueError):
        BlseSpec([[0.5]], [0.0], 1.0)


def test_counterexample_closed_form_values():
    assert math.isclose(counterexample_closed_form(0.0), 5.0)
    assert math.isclose(counterexample_closed_form(0.5), 0.0, abs_tol=1e-15)


def test_counterexample_fit_on_left_block():
    closed, fit = counterexample_lse_d1()
    grid = np.linspace(0.0, 0.6, 31)[:, None]
    assert np.max(np.abs(fit.predict(grid) - closed(grid[:, 0]))) < 1e-4
    assert fit.predict([[0.0]])[0] >= 4.9
    _, bounded = counterexample_lse_d1(gamma=1.0)
    assert abs(bounded.predict([[0.0]])[0]) <= 1 + 1e-4


def test_regressor_api():
    X = np.linspace(0, 1, 20)[:, None]
    reg = ConvexRegressor(gamma=2.0).fit(X, (X[:, 0] - 0.5) ** 2)
    assert reg.get_params()["gamma"] == 2.0
    assert reg.predict(X).shape == (20,)
    with pytest.raises(ValueError):
        reg.predict(np.zeros((2, 2)))
