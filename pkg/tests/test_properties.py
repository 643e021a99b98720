import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from convexreg.blse import BlseSpec, fit_blse
from convexreg.funcspace import (MaxAffine, convexity_violation, make_bump_perturbed)
from convexreg.geometry import Polytope
from convexreg.jsonio import dumps
from convexreg.selection import (CONVEX, ModelFamily, SelectionConstants,
                                 empirical_contrast, l_adaptive_select)
from convexreg.sieve import SieveFitConfig, fit_max_affine
from convexreg.supportfn import PolytopeEstimate

FAST = settings(max_examples=25, deadline=None,
                suppress_health_check=[HealthCheck.too_slow])
floats = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
UNIT = Polytope.interval(0.0, 1.0)
SQUARE = Polytope.hypercube(2)


@st.composite
def max_affine(draw, d=2):
    k = draw(st.integers(1, 6))
    A = draw(arrays(float, (k, d), elements=floats))
    b = draw(arrays(float, (k,), elements=floats))
    return MaxAffine(A, b)


@st.composite
def dataset_1d(draw, n_min=3, n_max=15):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(n, 1)), 2 * rng.standard_normal(n)


@FAST
@given(max_affine())
def test_max_affine_convex(f):
    assert convexity_violation(f, SQUARE, 1000, seed=0) <= 1e-9


@FAST
@given(st.integers(0, 2 ** 16), st.sampled_from([0.5, 0.25]))
def test_bump_family_convex(seed, eps):
    k = int(round(1 / eps)) ** 2
    tau = np.random.default_rng(seed).integers(0, 2, k)
    f = make_bump_perturbed(SQUARE, eps, tau, 1.0)
    assert convexity_violation(f, SQUARE, 1000, seed=seed) <= 1e-12


@FAST
@given(dataset_1d(), st.floats(0.1, 5.0))
def test_blse_interpolates_and_is_bounded(data, gamma):
    X, Y = data
    tol = 1e-6
    fit = fit_blse(BlseSpec(X, Y, gamma, UNIT), tol=tol)
    assert np.max(np.abs(fit.estimator(X) - fit.y_hat)) <= 10 * tol
    assert np.max(np.abs(fit.y_hat)) <= gamma + 10 * tol
    assert convexity_violation(fit.estimator, UNIT, 1000, seed=1) <= 1e-9


@FAST
@given(dataset_1d(), st.floats(0.1, 3.0))
def test_blse_objective_monotone_in_gamma(data, gamma):
    X, Y = data
    tol = 1e-6
    objs = [np.sum((Y - fit_blse(BlseSpec(X, Y, g, UNIT), tol=tol).y_hat) ** 2)
            for g in (gamma, 2 * gamma, math.inf)]
    assert objs[1] <= objs[0] + 100 * tol
    assert objs[2] <= objs[1] + 100 * tol


@FAST
@given(st.integers(0, 2 ** 16), st.integers(1, 5))
def test_sieve_history_monotone(seed, m):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (60, 2))
    Y = np.abs(X[:, 0]) + X[:, 1] ** 2 + 0.2 * rng.standard_normal(60)
    f, info = fit_max_affine(X, Y, SieveFitConfig(m=m, seed=seed), return_info=True)
    h = info["history"]
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert f.n_pieces <= m


@FAST
@given(st.integers(0, 2 ** 16), st.floats(1e-3, 1e3), st.floats(1.0, 100.0))
def test_l_rule_monotone_in_t(seed, t, factor):
    rng = np.random.default_rng(seed)
    n = 243
    fam = ModelFamily(CONVEX, 1)
    X = rng.uniform(size=(n, 1))
    fits = {m: MaxAffine(rng.standard_normal((m, 1)), rng.standard_normal(m))
            for m in range(1, 4)}
    c1 = SelectionConstants.practical(0.1)
    c1.t_const = {"c": t, "d": t}
    c2 = SelectionConstants.practical(0.1)
    c2.t_const = {"c": t * factor, "d": t * factor}
    m1 = l_adaptive_select(fits, X, c1, fam, n).m_hat
    m2 = l_adaptive_select(fits, X, c2, fam, n).m_hat
    assert m2 <= m1 <= 3


@FAST
@given(arrays(float, (40,), elements=floats), arrays(float, (40,), elements=floats))
def test_contrast_identity(Y, g):
    lhs = empirical_contrast(g, Y) + float(np.mean(Y * Y))
    assert abs(lhs - float(np.mean((Y - g) ** 2))) <= 1e-12 * max(1.0, float(np.mean(Y * Y)
                                                                      + np.mean(g * g)))


@FAST
@given(arrays(float, (5, 3), elements=floats), st.integers(0, 2 ** 16))
def test_support_homogeneous_subadditive(V, seed):
    K = PolytopeEstimate(V)
    rng = np.random.default_rng(seed)
    u1, u2 = rng.standard_normal((2, 50, 3))
    lam = rng.uniform(0.01, 100, (50, 1))
    scale = 1.0 + np.max(np.abs(V)) * 100
    assert np.all(np.abs(K(lam * u1) - lam[:, 0] * K(u1)) <= 1e-9 * scale * lam[:, 0])
    assert np.all(K(u1 + u2) <= K(u1) + K(u2) + 1e-9 * scale)


@FAST
@given(st.dictionaries(st.text(max_size=5),
                       st.one_of(floats, st.integers(), st.just(math.inf))))
def test_dumps_deterministic(obj):
    assert dumps(obj) == dumps(dict(obj))
