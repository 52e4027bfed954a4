import numpy as np
import pytest

from toa_outage import montecarlo as mc
from toa_outage.annulus import CHUNK_SIZE, AnnulusModel
from toa_outage.montecarlo import (ConsistencyError, KsReport, empirical_gdop_ccdf,
                                   empirical_speb_ccdf, ks_statistic, pilot_u_grid,
                                   property_failures, validation_suite)
from toa_outage.outage import CcdfCurve, gdop_ccdf
from toa_outage.speb import speb_support_min

WIDE = AnnulusModel(1.0, 10.0, 5)


def test_single_sample_curve_is_binary():
    rep = empirical_speb_ccdf(WIDE, 1, seed=3)
    assert set(np.unique(rep.empirical_curve.values)) <= {0.0, 1.0}
    assert rep.sample_count == 1 and rep.yn_variance == 0.0
    g = empirical_gdop_ccdf(WIDE, 1, 3, np.geomspace(0.1, 1e4, 50))
    assert set(np.unique(g.values)) <= {0.0, 1.0}


def test_below_support_is_exactly_one():
    u = np.geomspace(0.1, 1e3, 100)
    rep = empirical_speb_ccdf(WIDE, 50_000, seed=1, u_grid=u)
    assert np.all(rep.empirical_curve.values[u < speb_support_min(WIDE)] == 1.0)
    g = empirical_gdop_ccdf(WIDE, 50_000, 1, u)
    assert np.all(g.values[u < speb_support_min(WIDE)] == 1.0)


def test_pilot_grid():
    u = pilot_u_grid(WIDE, seed=5)
    assert u.size == 400 and u[0] == pytest.approx(0.5 * speb_support_min(WIDE))
    assert np.all(np.diff(u) > 0)
    assert np.array_equal(u, pilot_u_grid(WIDE, seed=5))
    rep = empirical_speb_ccdf(WIDE, 100_000, seed=5)
    assert np.array_equal(rep.empirical_curve.abscissae, u)
    # The grid reaches roughly the 99.9th percentile.
    assert rep.empirical_curve.values[-1] == pytest.approx(1e-3, abs=1e-3)


def test_thread_count_does_not_change_results():
    n = 3 * CHUNK_SIZE + 1234
    a = empirical_speb_ccdf(WIDE, n, seed=11, threads=1)
    b = empirical_speb_ccdf(WIDE, n, seed=11, threads=4)
    assert np.array_equal(a.empirical_curve.values, b.empirical_curve.values)
    assert (a.yn_mean, a.yn_variance, a.infeasibility_lhs) == (b.yn_mean, b.yn_variance,
                                                               b.infeasibility_lhs)
    u = a.empirical_curve.abscissae
    assert np.array_equal(empirical_gdop_ccdf(WIDE, n, 2, u, threads=1).values,
                          empirical_gdop_ccdf(WIDE, n, 2, u, threads=3).values)


def test_streaming_moments_match_batch():
    from toa_outage.annulus import RngStream, sample_anchor_sets
    from toa_outage.speb import decompose
    n = 2 * CHUNK_SIZE + 17
    rep = empirical_speb_ccdf(WIDE, n, seed=8, u_grid=[1.0])
    y = np.concatenate([decompose(WIDE, sample_anchor_sets(WIDE, RngStream(8).child(k), size)).y_n
                        for k, size in enumerate([CHUNK_SIZE, CHUNK_SIZE, 17])])
    assert rep.yn_mean == pytest.approx(y.mean(), rel=1e-12)
    assert rep.yn_variance == pytest.approx(y.var(), rel=1e-10)


def test_two_seed_consistency():
    a = empirical_speb_ccdf(WIDE, 1_000_000, seed=100)
    b = empirical_speb_ccdf(WIDE, 1_000_000, seed=101, u_grid=a.empirical_curve.abscissae)
    assert ks_statistic(a.empirical_curve, b.empirical_curve) < 4e-3


def test_gdop_mc_matches_analytic():
    model = WIDE.with_n(4)
    u = np.geomspace(0.5, 5e3, 300)
    emp = empirical_gdop_ccdf(model, 1_000_000, 9, u)
    assert ks_statistic(emp, gdop_ccdf(model, u)) < 5e-3


def test_fim_check_detects_disagreement(monkeypatch):
    monkeypatch.setattr(mc, "speb_via_fim", lambda model, anchors: np.full(anchors.ranges.shape[0], 1e9))
    with pytest.raises(ConsistencyError):
        empirical_speb_ccdf(WIDE, 20_001, seed=1, u_grid=[1.0])


def test_infeasibility_lhs_negative_and_decreasing():
    lhs = [empirical_speb_ccdf(WIDE.with_n(n), 1_000_000, 40 + n, u_grid=[1.0]).infeasibility_lhs
           for n in range(3, 9)]
    assert all(v < 0 for v in lhs)
    assert np.all(np.diff(lhs) < 0)


def test_ks_statistic_cases():
    x = np.linspace(1, 10, 50)
    a = CcdfCurve(x, np.linspace(1, 0, 50), "approx")
    assert ks_statistic(a, a) == 0.0
    one = CcdfCurve(x, np.ones(50), "gdop")
    zero = CcdfCurve(x, np.zeros(50), "mc")
    assert ks_statistic(one, zero) == 1.0
    assert ks_statistic(zero, zero) == 0.0
    far = CcdfCurve(x + 100, np.ones(50), "gdop")
    with pytest.raises(ValueError):
        ks_statistic(a, far)
    b = CcdfCurve(x[::3] + 0.05, np.linspace(0.9, 0, x[::3].size), "mc")
    assert ks_statistic(a, b) == ks_statistic(b, a)


def test_mc_curve_is_step_interpolated():
    x = np.array([1.0, 2.0, 3.0])
    m = CcdfCurve(x, np.array([0.8, 0.4, 0.0]), "mc")
    lin = CcdfCurve(x, np.array([0.8, 0.4, 0.0]), "approx")
    fine = CcdfCurve(np.array([1.0, 1.5, 2.0, 3.0]), np.array([0.8, 0.6, 0.4, 0.0]), "approx")
    assert ks_statistic(m, fine) == pytest.approx(0.2)
    assert ks_statistic(lin, fine) == pytest.approx(0.0)


def test_validation_suite_arguments():
    with pytest.raises(ValueError):
        validation_suite([2], [10.0], 1000, 0)
    with pytest.raises(ValueError):
        validation_suite([3], [0.5], 1000, 0)


def test_property_failures_logic():
    def rep(d_max, approx, gdop=0.2):
        return KsReport(AnnulusModel(1, d_max, 5), {"mc": 0.0, "approx": approx, "gdop": gdop,
                                                    "gdop_lower": 0.5, "gdop_upper": 0.6})
    assert property_failures([rep(2, 0.01), rep(4, 0.02)]) == []
    assert len(property_failures([rep(2, 0.03), rep(4, 0.02)])) == 1
    assert len(property_failures([rep(2, 0.3)])) == 1


def test_collapsed_annulus_methods_agree():
    reports = validation_suite([3, 6], [1.0 + 1e-5], 1_000_000, 77)
    for r in reports:
        vals = [r[k] for k in ("approx", "gdop", "gdop_lower", "gdop_upper")]
        assert r["mc"] == 0.0
        assert max(vals) <= 2 * min(vals)
