import math

import numpy as np
import pytest

from convexreg.selection import (CONVEX, LINEAR, SUPPORT, AdaptiveMaxAffineRegressor,
                                 ModelFamily, SelectionConstants, benchmark_cutoff,
                                 empirical_contrast, fit_family, l_adaptive_select,
                                 p_adaptive_search, p_adaptive_select, pdim_bound, penalty)
from scenarios import THREE_PIECE

SIGMA = 0.05


def _data(seed, n=400):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 1))
    return X, THREE_PIECE(X) + SIGMA * rng.standard_normal(n)


def _consts(**kw):
    c = SelectionConstants.practical(SIGMA ** 2)
    for k, v in kw.items():
        setattr(c, k, v)
    return c


def test_pdim_examples():
    assert math.isclose(pdim_bound(ModelFamily(CONVEX, 1), 1), 6 * math.log(3))
    assert round(pdim_bound(ModelFamily(CONVEX, 1), 1), 4) == 6.5917
    assert pdim_bound(ModelFamily(LINEAR), 7) == 7
    assert round(pdim_bound(ModelFamily(SUPPORT, 2), 3), 2) == 39.55


def test_pdim_nondecreasing():
    for fam in (ModelFamily(CONVEX, 2), ModelFamily(SUPPORT, 3), ModelFamily(LINEAR)):
        D = [pdim_bound(fam, m) for m in range(1, 50)]
        assert D[0] >= 1
        assert all(b >= a for a, b in zip(D, D[1:]))


def test_cutoff_examples():
    assert benchmark_cutoff(ModelFamily(CONVEX, 1), 32) == 2
    assert benchmark_cutoff(ModelFamily(SUPPORT, 2), 3125) == 5
    assert benchmark_cutoff(ModelFamily(LINEAR), 100) == 10


@pytest.mark.parametrize("fam", [ModelFamily(CONVEX, 1), ModelFamily(CONVEX, 5),
                                 ModelFamily(SUPPORT, 2), ModelFamily(LINEAR)])
def test_cutoff_at_most_n(fam):
    for n in (2, 3, 10, 1000, 10 ** 7):
        assert 1 <= benchmark_cutoff(fam, n) <= n


def test_theory_constants():
    c = SelectionConstants.theory(1.0)
    assert c.t_const["d"] == 6356992
    assert c.t_const["c"] == 2 * (7.56e6 + 4 * 73728 * 3.35e5)
    assert (c.cp1, c.cp2) == (16.0, 9 * 2 ** 15)


def test_scale_per_norm():
    c = SelectionConstants.practical(0.25, gamma=2.0)
    assert c.scale("d") == 0.25
    assert c.scale("c") == 4.0


def test_penalty_closed_form():
    fam = ModelFamily(CONVEX, 2)
    c = SelectionConstants.practical(0.3)
    n = 500
    for m in range(1, 8):
        expect = (6 * c.cp1 * c.sigma_sq * m * 2 * math.log(3 * m) / n
                  * (c.cp2 * c.kappa * math.log(n) + 1))
        assert abs(penalty(c, fam, m, n) - expect) <= 1e-12


def test_l_rule_huge_threshold_gives_one():
    X, Y = _data(0)
    fam = ModelFamily(CONVEX, 1)
    fits = fit_family(X, Y, range(1, benchmark_cutoff(fam, 400) + 1), fam)
    res = l_adaptive_select(fits, X, _consts(t_const={"c": 1e12, "d": 1e12}), fam, 400)
    assert res.m_hat == 1


def test_l_rule_identical_fits_give_one():
    fam = ModelFamily(CONVEX, 1)
    f = THREE_PIECE
    fits = {m: f for m in range(1, 4)}
    res = l_adaptive_select(fits, np.linspace(0, 1, 50)[:, None], _consts(), fam, 400)
    assert res.m_hat == 1


def test_l_rule_missing_fit():
    fam = ModelFamily(CONVEX, 1)
    with pytest.raises(ValueError):
        l_adaptive_select({1: THREE_PIECE}, np.zeros((3, 1)), _consts(), fam, 400)


def test_l_rule_monotone_in_threshold():
    X, Y = _data(1)
    fam = ModelFamily(CONVEX, 1)
    fits = fit_family(X, Y, range(1, benchmark_cutoff(fam, 400) + 1), fam)
    picks = [l_adaptive_select(fits, X, _consts(t_const={"c": t, "d": t}), fam, 400).m_hat
             for t in (1e-3, 0.1, 1.0, 2.0, 10.0, 1e3)]
    assert all(b <= a for a, b in zip(picks, picks[1:]))


def test_p_rule_zero_penalty_takes_largest():
    X, Y = _data(2)
    fam = ModelFamily(CONVEX, 1)
    fits = fit_family(X, Y, range(1, 7), fam)
    vals = {m: f(X) for m, f in fits.items()}
    c = _consts(cp1=1e-300)
    res = p_adaptive_select(vals, Y, c, fam)
    crit = [res.audit["table"][str(m)]["contrast"] for m in range(1, 7)]
    assert all(b <= a for a, b in zip(crit, crit[1:]))
    # ties go to the smaller index
    assert res.m_hat == 1 + crit.index(min(crit))
    # strictly improving nested fits: the largest m wins
    synth = {m: Y * (1 - 1.0 / (m + 1)) for m in range(1, 7)}
    assert p_adaptive_select(synth, Y, c, fam).m_hat == 6


def test_p_rule_huge_penalty_gives_one():
    X, Y = _data(3)
    fam = ModelFamily(CONVEX, 1)
    fits = fit_family(X, Y, range(1, 5), fam)
    res = p_adaptive_select({m: (f(X), f) for m, f in fits.items()}, Y,
                            _consts(cp1=1e9), fam)
    assert res.m_hat == 1


def test_contrast_identity():
    rng = np.random.default_rng(4)
    Y = rng.standard_normal(100)
    g = rng.standard_normal(100)
    lhs = empirical_contrast(g, Y) + np.mean(Y * Y)
    assert abs(lhs - np.mean((Y - g) ** 2)) <= 1e-12


def test_permutation_invariance():
    X, Y = _data(5, n=200)
    fam = ModelFamily(CONVEX, 1)
    fits = fit_family(X, Y, range(1, benchmark_cutoff(fam, 200) + 1), fam)
    perm = np.random.default_rng(0).permutation(200)
    c = _consts()
    assert (l_adaptive_select(fits, X, c, fam, 200).m_hat
            == l_adaptive_select(fits, X[perm], c, fam, 200).m_hat)
    vals = {m: f(X) for m, f in fits.items()}
    pvals = {m: v[perm] for m, v in vals.items()}
    assert (p_adaptive_select(vals, Y, c, fam).m_hat
            == p_adaptive_select(pvals, Y[perm], c, fam).m_hat)


def test_search_records_stop_reason():
    X, Y = _data(6, n=200)
    res, fits = p_adaptive_search(X, Y, _consts(), ModelFamily(CONVEX, 1))
    assert res.audit["stop_reason"] in ("patience", "penalty_bound", "max_m")
    assert res.m_hat in fits
    assert res.m_hat <= max(fits)


def test_theory_preset_selects_one():
    X, Y = _data(7)
    fam = ModelFamily(CONVEX, 1)
    res, _ = p_adaptive_search(X, Y, SelectionConstants.theory(SIGMA ** 2), fam)
    assert res.m_hat == 1


@pytest.mark.slow
def test_l_rule_monte_carlo_fixture():
    fam = ModelFamily(CONVEX, 1)
    c = _consts()
    hits = 0
    for seed in range(50):
        X, Y = _data(seed)
        fits = fit_family(X, Y, range(1, benchmark_cutoff(fam, 400) + 1), fam, seed=seed)
        hits += 2 <= l_adaptive_select(fits, X, c, fam, 400).m_hat <= 6
    assert hits >= 40


def test_regressor():
    X, Y = _data(8, n=200)
    reg = AdaptiveMaxAffineRegressor(sigma=SIGMA).fit(X, Y)
    assert reg.m_hat_ >= 2
    assert np.mean((reg.predict(X) - THREE_PIECE(X)) ** 2) < SIGMA ** 2
    reg_l = AdaptiveMaxAffineRegressor(sigma=SIGMA, rule="L").fit(X, Y)
    assert reg_l.m_hat_ <= benchmark_cutoff(ModelFamily(CONVEX, 1), 200)
