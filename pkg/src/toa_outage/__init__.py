"""Outage probability of ToA localisation with anchors scattered in an annulus."""

__version__ = "0.1.0"

from .annulus import AnchorSet, AnnulusModel, RngStream, sample_anchor_set, sample_anchor_sets
from .charfun import gil_pelaez_ccdf, phi_rii, phi_t_aux, phi_xn
from .montecarlo import (KsReport, SimulationReport, empirical_gdop_ccdf, empirical_speb_ccdf,
                         ks_statistic, validation_suite)
from .outage import (CcdfCurve, MomentMatch, gdop_bound_ccdfs, gdop_ccdf, mean_yn, moment_match,
                     speb_ccdf_approx, wn_ccdf, xn_ccdf_table)
from .quadrature import ConvergenceError, QuadratureSpec
from .speb import (decompose, gdop, speb_exact, speb_support_min, speb_via_fim,
                   support_mismatch_ratio, ts_from_system, w_n)

__all__ = [
    "AnchorSet", "AnnulusModel", "CcdfCurve", "ConvergenceError", "KsReport", "MomentMatch",
    "QuadratureSpec", "RngStream", "SimulationReport", "decompose", "empirical_gdop_ccdf",
    "empirical_speb_ccdf", "gdop", "gdop_bound_ccdfs", "gdop_ccdf", "gil_pelaez_ccdf",
    "ks_statistic", "mean_yn", "moment_match", "phi_rii", "phi_t_aux", "phi_xn",
    "sample_anchor_set", "sample_anchor_sets", "speb_ccdf_approx", "speb_exact",
    "speb_support_min", "speb_via_fim", "support_mismatch_ratio", "ts_from_system",
    "validation_suite", "w_n", "wn_ccdf", "xn_ccdf_table",
]
