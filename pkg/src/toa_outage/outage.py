"""Semi-analytic SPEB ccdfs: the moment-matched approximation and GDOP-based curves.

The ingredients are

* the ccdf of the angular factor ``W_N`` (a Bessel-function integral for
  the length of a planar random walk), tabulated once per ``N``;
* the ccdf of the aggregate intensity ``X_N`` (Gil-Pelaez inversion of its
  closed-form characteristic function), tabulated once per model;
* ``E[Y_N]`` from a double integral over the weight ccdf, which fixes the
  scale ``v_opt`` of the moment-matched surrogate ``Y_N ~ v_opt * W_N``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .annulus import AnnulusModel, RngStream, ccdf_farthest, ccdf_nearest, pdf_range, sample_ranges
from .charfun import (expectation_over_ccdf, gil_pelaez_ccdf, support_grid, t_aux_charfn,
                      xn_charfn)
from .quadrature import DEFAULT_QUAD, ConvergenceError, QuadratureSpec, integrate_panels

log = logging.getLogger(__name__)

CURVE_LABELS = ("mc", "approx", "gdop", "gdop_lower", "gdop_upper")
MAX_RIPPLE = 1e-6


@dataclass(frozen=True)
class CcdfCurve:
    abscissae: np.ndarray
    values: np.ndarray
    label: str

    def __post_init__(self):
        x = np.asarray(self.abscissae, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.label not in CURVE_LABELS:
            raise ValueError(f"unknown curve label {self.label!r}")
        if x.ndim != 1 or x.shape != v.shape or x.size == 0:
            raise ValueError("abscissae and values must be equal-length 1-D arrays")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissae must be strictly ascending")
        if np.any(v < 0) or np.any(v > 1) or np.any(np.diff(v) > 0):
            raise ValueError("values must be non-increasing within [0, 1]")
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        """Evaluate between nodes: steps for ``mc``, linear otherwise."""
        x = np.asarray(x, dtype=float)
        if self.label == "mc":
            idx = np.searchsorted(self.abscissae, x, side="right") - 1
            return np.where(idx < 0, 1.0, self.values[np.clip(idx, 0, None)])
        return np.interp(x, self.abscissae, self.values, left=1.0, right=self.values[-1])


def monotone_ccdf(values, *, max_ripple=MAX_RIPPLE, label="ccdf"):
    """Clamp to [0, 1] and remove upward ripple no larger than ``max_ripple``."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    mono = np.minimum.accumulate(v)
    worst = float(np.max(v - mono, initial=0.0))
    if worst > max_ripple:
        raise ConvergenceError(f"non-monotone by {worst:.3g}; check quadrature settings",
                               label=label, error=worst)
    return mono


# -- W_N ---------------------------------------------------------------------------

def _bessel_truncation(n: int, eps: float = 1e-9) -> float:
    # The leading tail term is removed analytically; what remains decays one power faster.
    return max(100.0, (n * (2 / np.pi) ** ((n + 1) / 2) / eps) ** (2 / (n + 3)))


def _power_osc_tail(p: float, omega, y0: float):
    """``int_{y0}^inf y**-p exp(i omega y) dy`` for ``omega >= 0`` and half-integer ``p >= 1``."""
    omega = np.asarray(omega, dtype=float)
    out = np.empty(omega.shape, dtype=complex)
    zero = omega <= 0
    if p > 1:
        out[zero] = y0 ** (1 - p) / (p - 1)
    nz = ~zero
    w = np.where(nz, omega, 1.0)
    if float(p).is_integer():
        si, ci = special.sici(w * y0)
        acc = -ci + 1j * (np.pi / 2 - si)
        q = 1.0
    else:
        fs, fc = special.fresnel(np.sqrt(2 * w * y0 / np.pi))
        acc = np.sqrt(2 * np.pi / w) * ((0.5 - fc) + 1j * (0.5 - fs))
        q = 0.5
    phase = np.exp(1j * w * y0)
    while q < p:
        q += 1.0
        acc = (y0 ** (1 - q) * phase + 1j * w * acc) / (q - 1)
    out[nz] = acc[nz]
    return out


def _bessel_tail(n: int, r, y0: float):
    """Leading-order asymptotic value of ``int_{y0}^inf J1(r y) J0(y)^n dy``.

    With ``J_v(z) ~ sqrt(2 / (pi z)) cos(z - v pi / 2 - pi / 4)`` the product
    expands into cosines of frequency ``r +- (n - 2k)`` times ``y**-(n+1)/2``;
    the terms with ``r`` close to ``n - 2k`` decay slowly and dominate the
    truncation error of the finite integral.
    """
    r = np.asarray(r, dtype=float)
    p = (n + 1) / 2
    amp = (2 / np.pi) ** p / np.sqrt(r) / 2 ** (n + 1)
    total = np.zeros(r.shape)
    for k in range(n + 1):
        a = n - 2 * k
        weight = special.comb(n, k)
        for omega, phi in ((a + r, -a * np.pi / 4 - 3 * np.pi / 4),
                           (a - r, -a * np.pi / 4 + 3 * np.pi / 4)):
            omega = np.broadcast_to(omega, r.shape)
            phi = np.where(omega < 0, -phi, phi)
            integral = _power_osc_tail(p, np.abs(omega), y0)
            total += weight * (np.exp(1j * phi) * integral).real
    return amp * total


def wn_ccdf_direct(n: int, u, quad: QuadratureSpec = DEFAULT_QUAD):
    """``P(W_N > u)`` by direct evaluation of the random-walk Bessel integral.

    ``P(W_N > u) = r * int_0^inf J1(r y) J0(y)^N dy`` with ``r = N sqrt(1 - u)``
    on ``[0, 1]``; 1 below 0 and 0 above 1.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.where(u < 0, 1.0, 0.0)
    inside = (u >= 0) & (u <= 1)
    if np.any(inside):
        r = n * np.sqrt(1.0 - u[inside])
        y_max = _bessel_truncation(n)
        # Fastest oscillation is J1(r y) J0(y)^N with r <= N.
        n_panels = int(np.ceil(y_max * 2 * n / np.pi))
        batch = max(4, int(2 ** 21 // (15 * r.size)))

        def f(y):
            return special.j1(np.outer(r, y)) * (special.j0(y) ** n)[None, :]

        val, _ = integrate_panels(f, np.linspace(0.0, y_max, n_panels + 1),
                                  abs_tol=min(quad.abs_tol, 1e-9), rel_tol=1e-12,
                                  max_subdivisions=max(quad.max_subdivisions, n_panels),
                                  batch=batch, label=f"W_{n} Bessel integral")
        pos = r > 0
        tail = np.zeros_like(r)
        tail[pos] = _bessel_tail(n, r[pos], y_max)
        out[inside] = np.clip(r * (val + tail), 0.0, 1.0)
        out[inside & (u == 0)] = 1.0
    return float(out[0]) if scalar else out


class WnTable:
    """Piecewise cubic interpolant of ``P(W_N > u)`` on ``[0, 1]``.

    The ccdf is non-smooth where the walk length ``N sqrt(1 - u)`` crosses an
    integer of the same parity as ``N`` and at the ends of ``[0, 1]``. The
    interval is split at those points; each piece carries Chebyshev nodes
    plus a geometric cluster toward both ends, and its own spline.
    """

    def __init__(self, n: int, n_nodes: int = 1025, grading: int = 48,
                 quad: QuadratureSpec = DEFAULT_QUAD):
        self.n = n
        ks = np.arange(n - 2, 0, -2)
        breaks = np.unique(np.concatenate([[0.0, 1.0], 1.0 - (ks / n) ** 2]))
        self.breaks = breaks
        lengths = np.diff(breaks)
        nodes_per = np.maximum(16, np.round(n_nodes * lengths / lengths.sum()).astype(int))
        pieces = []
        for a, b, m in zip(breaks[:-1], breaks[1:], nodes_per):
            theta = np.linspace(np.pi, 0.0, m)
            cheb = 0.5 * (a + b) + 0.5 * (b - a) * np.cos(theta)
            grade = (b - a) * np.geomspace(1e-10, 0.05, grading)
            pts = np.unique(np.concatenate([cheb, a + grade, b - grade]))
            pieces.append(pts)
        all_pts = np.unique(np.concatenate(pieces))
        vals = wn_ccdf_direct(n, all_pts, quad)
        self.splines = []
        for pts in pieces:
            idx = np.searchsorted(all_pts, pts)
            self.splines.append(CubicSpline(pts, vals[idx]))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.where(u < 0, 1.0, 0.0)
        inside = (u >= 0) & (u <= 1)
        if np.any(inside):
            ui = u[inside]
            piece = np.clip(np.searchsorted(self.breaks, ui, side="right") - 1,
                            0, len(self.splines) - 1)
            vals = np.empty(ui.shape)
            for k in np.unique(piece):
                sel = piece == k
                vals[sel] = self.splines[k](ui[sel])
            out[inside] = np.clip(vals, 0.0, 1.0)
        # W_N >= 0 surely and W_N = 1 has probability zero.
        out[u == 0] = 1.0
        out[u == 1] = 0.0
        return out


@lru_cache(maxsize=64)
def wn_table(n: int, quad: QuadratureSpec = DEFAULT_QUAD) -> WnTable:
    log.debug("building W_%d ccdf table", n)
    return WnTable(n, quad=quad)


def wn_ccdf(n: int, u, quad: QuadratureSpec = DEFAULT_QUAD):
    """``P(W_N > u)`` from the cached interpolant."""
    if n < 3:
        raise ValueError("n must be at least 3")
    val = wn_table(int(n), quad)(u)
    return float(val) if np.ndim(u) == 0 else val


# -- moments ------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentMatch:
    mean_yn: float
    m_opt: float
    v_opt: float


def b_weight_bounds(model: AnnulusModel) -> tuple[float, float]:
    """Range ``[rho_min, rho_max]`` of a single normalised weight ``A_k / X_N``."""
    n = model.n_anchors
    lo, hi = model.rii_support
    return lo / (lo + (n - 1) * hi), hi / (hi + (n - 1) * lo)


NARROW_ANNULUS = 1e-3


def _mean_yn_narrow(model: AnnulusModel) -> float:
    # With A_k = a (1 + e_k): N^2 E[B^2] = 1 + (1 - 1/N) Var(e) + O(e^3).
    n = model.n_anchors
    m1 = model.rii_moment(1)
    rel_var = max(model.rii_moment(2) / m1 ** 2 - 1.0, 0.0)
    return float(1.0 - (1.0 + (1.0 - 1.0 / n) * rel_var) / n)


MEAN_YN_QUAD = QuadratureSpec(abs_tol=1e-7, rel_tol=1e-7, t_truncation_floor=1e-8)


@lru_cache(maxsize=256)
def mean_yn(model: AnnulusModel, quad: QuadratureSpec = MEAN_YN_QUAD, outer_tol: float = 1e-6) -> float:
    """E[Y_N] = 1 - N E[B^2] with ``E[B^2] = 2 int_0^rho_max u P(B > u) du``.

    ``P(B > u) = 1`` below ``rho_min``; inside the weight range it is
    ``P(T(u) > 0)`` obtained by Gil-Pelaez inversion, integrated over ``u``
    by adaptive quadrature.
    """
    n = model.n_anchors
    if model.d_max / model.d_min - 1.0 <= NARROW_ANNULUS:
        return _mean_yn_narrow(model)
    rho_min, rho_max = b_weight_bounds(model)

    def integrand(us):
        ccdf = np.array([gil_pelaez_ccdf(t_aux_charfn(model, u, quad), 0.0, quad,
                                         label="weight ccdf") for u in us])
        return us * ccdf

    inner, _ = integrate_panels(integrand, np.linspace(rho_min, rho_max, 5),
                                abs_tol=outer_tol, rel_tol=outer_tol, max_subdivisions=2000,
                                label="E[Y_N] outer integral")
    return float(1.0 - n * (rho_min ** 2 + 2.0 * inner))


def moment_match(model: AnnulusModel, quad: QuadratureSpec = MEAN_YN_QUAD) -> MomentMatch:
    """Constrained moment match ``m = 1/N``, ``v = E[Y_N] / (1 - 1/N)``."""
    n = model.n_anchors
    mean = mean_yn(model, quad)
    m_opt = 1.0 / n
    return MomentMatch(mean_yn=mean, m_opt=m_opt, v_opt=mean / (1.0 - m_opt ** 2 * n))


# -- curves -------------------------------------------------------------------------

@dataclass(frozen=True)
class TabulatedCcdf:
    abscissae: np.ndarray
    values: np.ndarray


@lru_cache(maxsize=64)
def xn_ccdf_table(model: AnnulusModel, n_points: int = 2049,
                  quad: QuadratureSpec = DEFAULT_QUAD) -> TabulatedCcdf:
    """Gil-Pelaez tabulation of ``P(X_N > x)`` on the compact support of ``X_N``."""
    lo, hi = model.xn_support
    x = support_grid(lo, hi, n_points)
    vals = gil_pelaez_ccdf(xn_charfn(model, quad), x[1:-1], quad, label="X_N ccdf")
    vals = monotone_ccdf(np.concatenate([[1.0], vals, [0.0]]), label="X_N ccdf")
    return TabulatedCcdf(x, vals)


def _check_grid(u_grid):
    u = np.asarray(u_grid, dtype=float)
    if u.ndim != 1 or u.size == 0 or np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise ValueError("u_grid must be positive and strictly ascending")
    return u


def speb_ccdf_approx(model: AnnulusModel, u_grid, quad: QuadratureSpec = DEFAULT_QUAD, *,
                     n_points: int = 2049, max_points: int = 16385,
                     refine_tol: float = 1e-4) -> CcdfCurve:
    """Moment-matched approximation ``1 - E_X[P(W_N > 4 / (t_s u X v_opt))]``.

    The expectation over ``X_N`` is a Stieltjes sum against the tabulated
    ccdf; the table is doubled until halving it moves the curve by less
    than ``refine_tol``.
    """
    u = _check_grid(u_grid)
    v_opt = moment_match(model).v_opt
    table = wn_table(model.n_anchors, quad)
    scale = 4.0 / (model.t_s * v_opt * u)

    def h(x):
        return table(scale[:, None] / x[None, :])

    while True:
        tab = xn_ccdf_table(model, n_points, quad)
        try:
            expect = expectation_over_ccdf(h, tab, abs_tol=refine_tol / 3.0)
            break
        except ConvergenceError:
            if 2 * n_points - 1 > max_points:
                raise
            n_points = 2 * n_points - 1
            log.info("refining X_N table to %d points", n_points)
    return CcdfCurve(u, monotone_ccdf(1.0 - expect, label="approx ccdf"), "approx")


def approx_ccdf_sampled(model: AnnulusModel, u_grid, samples: int = 1_000_000, seed: int = 0,
                        quad: QuadratureSpec = DEFAULT_QUAD, block: int = 8192) -> np.ndarray:
    """Same quantity as :func:`speb_ccdf_approx` with the ``X_N`` average done by sampling.

    Used as a self-check of the tabulated Gil-Pelaez path.
    """
    u = _check_grid(u_grid)
    v_opt = moment_match(model).v_opt
    table = wn_table(model.n_anchors, quad)
    gen = RngStream(seed, stream_id=2).generator()
    x = (sample_ranges(model, gen.random((samples, model.n_anchors))) ** -2.0).sum(axis=1)
    scale = 4.0 / (model.t_s * v_opt * u)
    acc = np.zeros(u.shape)
    for s in range(0, samples, block):
        acc += table(scale[:, None] / x[None, s:s + block]).sum(axis=1)
    return 1.0 - acc / samples


def gdop_ccdf(model: AnnulusModel, u_grid, quad: QuadratureSpec = DEFAULT_QUAD) -> CcdfCurve:
    """Equal-range ccdf ``1 - E_R[P(W_N > 4 R^2 / (t_s N u))]`` with ``R`` one annulus range."""
    u = _check_grid(u_grid)
    n = model.n_anchors
    table = wn_table(n, quad)
    coef = 4.0 / (model.t_s * n * u)

    def f(r):
        return pdf_range(model, r)[None, :] * table(coef[:, None] * r[None, :] ** 2)

    val, _ = integrate_panels(f, np.linspace(model.d_min, model.d_max, 33),
                              abs_tol=1e-7, rel_tol=1e-9, max_subdivisions=20000,
                              label="GDOP ccdf")
    return CcdfCurve(u, monotone_ccdf(1.0 - val, label="gdop ccdf"), "gdop")


def _order_stat_table(model: AnnulusModel, ccdf, n_points: int) -> TabulatedCcdf:
    r = np.sqrt(np.linspace(model.d_min ** 2, model.d_max ** 2, n_points))
    vals = np.asarray(ccdf(model, r), dtype=float)
    vals[0], vals[-1] = 1.0, 0.0
    return TabulatedCcdf(r, vals)


def gdop_bound_ccdfs(model: AnnulusModel, u_grid, quad: QuadratureSpec = DEFAULT_QUAD,
                     n_points: int = 8193) -> tuple[CcdfCurve, CcdfCurve]:
    """Ccdfs of the equal-range metric at the nearest (lower) and farthest (upper) range."""
    u = _check_grid(u_grid)
    n = model.n_anchors
    table = wn_table(n, quad)
    coef = 4.0 / (model.t_s * n * u)

    def h(r):
        return table(coef[:, None] * r[None, :] ** 2)

    curves = []
    for ccdf, label in ((ccdf_nearest, "gdop_lower"), (ccdf_farthest, "gdop_upper")):
        tab = _order_stat_table(model, ccdf, n_points)
        expect = expectation_over_ccdf(h, tab, abs_tol=1e-4 / 3.0)
        curves.append(CcdfCurve(u, monotone_ccdf(1.0 - expect, label=label), label))
    return curves[0], curves[1]
