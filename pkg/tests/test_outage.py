import numpy as np
import pytest

from oracles import (anchor_samples, empirical_ccdf, mean_yn_laplace, w3_ccdf_exact,
                     w_n_samples, y_n_samples)
from toa_outage.annulus import AnnulusModel
from toa_outage.outage import (CcdfCurve, approx_ccdf_sampled, b_weight_bounds, gdop_bound_ccdfs,
                               gdop_ccdf, mean_yn, moment_match, monotone_ccdf, speb_ccdf_approx,
                               wn_ccdf, wn_ccdf_direct)
from toa_outage.quadrature import ConvergenceError
from toa_outage.speb import speb_support_min

WIDE = AnnulusModel(1.0, 10.0, 5)


def grid_for(model, hi=5e3, n=300):
    return np.geomspace(0.5 * speb_support_min(model), hi, n)


# -- W_N ---------------------------------------------------------------------------

def test_wn_piecewise_edges():
    for n in (3, 6):
        assert wn_ccdf(n, -0.1) == 1.0 and wn_ccdf(n, 1.1) == 0.0
        assert wn_ccdf(n, 0.0) == 1.0 and wn_ccdf(n, 1.0) == 0.0
        assert wn_ccdf_direct(n, -0.1) == 1.0 and wn_ccdf_direct(n, 1.1) == 0.0
    with pytest.raises(ValueError):
        wn_ccdf(2, 0.5)


def test_w3_against_exact_oracle():
    rng = np.random.default_rng(5)
    u = np.concatenate([rng.random(60), 8 / 9 + np.geomspace(1e-6, 1e-2, 20),
                        8 / 9 - np.geomspace(1e-6, 1e-2, 20)])
    ref = np.array([w3_ccdf_exact(v) for v in u])
    assert np.max(np.abs(wn_ccdf_direct(3, u) - ref)) < 1e-7
    assert np.max(np.abs(wn_ccdf(3, u) - ref)) < 1e-6


@pytest.mark.parametrize("n", range(3, 9))
def test_table_interpolation_budget(n):
    u = np.random.default_rng(n).random(100)
    assert np.max(np.abs(wn_ccdf(n, u) - wn_ccdf_direct(n, u))) < 1e-6


def test_w3_mc_point():
    w = w_n_samples(3, 1_000_000, 8)
    assert wn_ccdf(3, 0.5) == pytest.approx(np.mean(w > 0.5), abs=3e-3)


def test_wn_monotone():
    u = np.linspace(-0.05, 1.05, 5001)
    for n in (3, 4, 7):
        assert np.all(np.diff(wn_ccdf(n, u)) <= 1e-9)


# -- moments -------------------------------------------------------------------------

def test_rho_bounds():
    lo, hi = b_weight_bounds(AnnulusModel(1, 10, 3))
    assert lo == pytest.approx(0.01 / 2.01, abs=1e-12)
    assert hi == pytest.approx(1 / 1.02, abs=1e-12)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_mean_yn_against_laplace_oracle(n):
    assert mean_yn(WIDE.with_n(n)) == pytest.approx(mean_yn_laplace(1.0, 10.0, n), abs=1e-6)


def test_mean_yn_other_annulus():
    model = AnnulusModel(2.0, 3.0, 4)
    assert mean_yn(model) == pytest.approx(mean_yn_laplace(2.0, 3.0, 4), abs=1e-6)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_mean_yn_equal_range_limit(n):
    model = AnnulusModel(1.0, 1.0 + 1e-6, n)
    assert mean_yn(model) == pytest.approx(1 - 1 / n, abs=1e-4)
    assert moment_match(model).v_opt == pytest.approx(1, abs=1e-4)


def test_mean_yn_narrow_branch_continuity():
    # Just below and above the switch to the second-order expansion.
    a = mean_yn(AnnulusModel(1.0, 1.0009, 4))
    b = mean_yn(AnnulusModel(1.0, 1.0011, 4))
    assert a > b and a - b < 1e-6
    assert b == pytest.approx(mean_yn_laplace(1.0, 1.0011, 4), abs=1e-8)


def test_mean_yn_mc():
    r, th = anchor_samples(1, 10, 5, 1_000_000, 4)
    emp = y_n_samples(r, th).mean()
    assert abs(mean_yn(WIDE) / emp - 1) < 1e-2


def test_moment_match_fields():
    mm = moment_match(WIDE)
    assert mm.m_opt == 0.2
    assert mm.v_opt == pytest.approx(mm.mean_yn * 5 / 4, rel=1e-15)
    assert 0 < mm.mean_yn < 1 - 1 / 5


# -- curves --------------------------------------------------------------------------

def test_curve_validation():
    with pytest.raises(ValueError):
        CcdfCurve(np.array([1.0, 2.0]), np.array([0.5, 0.6]), "approx")
    with pytest.raises(ValueError):
        CcdfCurve(np.array([2.0, 1.0]), np.array([0.6, 0.5]), "approx")
    with pytest.raises(ValueError):
        CcdfCurve(np.array([1.0, 2.0]), np.array([0.6, 0.5]), "exact")
    c = CcdfCurve(np.array([1.0, 2.0]), np.array([0.6, 0.5]), "mc")
    assert c(1.5) == 0.6 and c(0.5) == 1.0
    assert CcdfCurve(c.abscissae, c.values, "gdop")(1.5) == pytest.approx(0.55)


def test_monotone_ccdf_ripple_cap():
    assert np.array_equal(monotone_ccdf([1.0, 0.5, 0.5 + 1e-7, 0.2]), [1.0, 0.5, 0.5, 0.2])
    assert np.array_equal(monotone_ccdf([1.2, -0.1]), [1.0, 0.0])
    with pytest.raises(ConvergenceError):
        monotone_ccdf([1.0, 0.5, 0.51])


def test_approx_support_and_tail():
    u = grid_for(WIDE, hi=1e6)
    c = speb_ccdf_approx(WIDE, u)
    assert c.label == "approx"
    below = u < speb_support_min(WIDE)
    assert np.all(np.abs(c.values[below] - 1) < 1e-3)
    assert c.values[-1] < 1e-3
    with pytest.raises(ValueError):
        speb_ccdf_approx(WIDE, [2.0, 1.0])


def test_approx_deep_tail_monotone_in_n():
    u = 8.0 / 3.0
    vals = [speb_ccdf_approx(WIDE.with_n(n), [u]).values[0] for n in range(3, 9)]
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("n", [3, 6])
def test_approx_sampling_cross_check(n):
    model = WIDE.with_n(n)
    u = np.geomspace(0.3, 3e3, 40)
    sampled = approx_ccdf_sampled(model, u, samples=200_000, seed=n)
    assert np.max(np.abs(sampled - speb_ccdf_approx(model, u).values)) < 2e-3


def test_gdop_support_tail_and_mc():
    model = WIDE.with_n(3)
    u = grid_for(model, hi=1e6)
    g = gdop_ccdf(model, u)
    assert np.all(g.values[u < speb_support_min(model)] == 1.0)
    assert g.values[-1] < 1e-3
    rng = np.random.default_rng(17)
    r = np.sqrt(rng.uniform(1, 100, 1_000_000))
    w = 1 - np.abs(np.exp(2j * rng.uniform(0, 2 * np.pi, (1_000_000, 3))).sum(axis=1)) ** 2 / 9
    with np.errstate(divide="ignore"):
        samples = 4 * r ** 2 / (3 * w)
    assert np.max(np.abs(g.values - empirical_ccdf(samples, u))) < 5e-3


def test_bounds_order_support_and_sandwich():
    u = grid_for(WIDE)
    lower, upper = gdop_bound_ccdfs(WIDE, u)
    assert np.all(lower.values <= upper.values + 1e-12)
    below = u < speb_support_min(WIDE)
    assert np.all(lower.values[below] == 1.0) and np.all(upper.values[below] == 1.0)
    r, th = anchor_samples(1, 10, 5, 1_000_000, 12)
    a = r ** -2.0
    with np.errstate(divide="ignore"):
        speb = a.sum(axis=1) / (np.triu(np.einsum("si,sj,sij->sij", a, a,
                                                  np.sin(th[:, :, None] - th[:, None, :]) ** 2),
                                        1).sum(axis=(1, 2)))
    emp = empirical_ccdf(speb, u)
    assert np.all(emp >= lower.values - 5e-3) and np.all(emp <= upper.values + 5e-3)


def test_equal_range_collapse():
    model = AnnulusModel(1.0, 1.0 + 1e-5, 4)
    u = grid_for(model, hi=200)
    curves = [speb_ccdf_approx(model, u), gdop_ccdf(model, u), *gdop_bound_ccdfs(model, u)]
    for a in curves:
        for b in curves:
            assert np.max(np.abs(a.values - b.values)) < 1e-3
