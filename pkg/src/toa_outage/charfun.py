"""Characteristic functions of ranging-intensity sums and their inversion.

A single anchor contributes ``A = R**-2`` whose characteristic function has
a closed form in terms of the sine and cosine integrals. Every quantity the
analytic ccdfs need (the aggregate ``X_N`` and the auxiliary variables used
for the mean of ``Y_N``) is a linear combination of iid copies of ``A``;
:class:`CharFn` represents such a combination together with the side
information the inversion integral needs: cumulants for the series branch
at small ``t``, the support for panel alignment, and an analytic decay
envelope for tail truncation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .annulus import AnnulusModel
from .quadrature import DEFAULT_QUAD, ConvergenceError, QuadratureSpec, integrate_panels
from .specfun import h_function


def _phi_rii_nonneg(model: AnnulusModel, t, cutoff):
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape, dtype=complex)
    small = t < cutoff
    if np.any(small):
        ts = t[small]
        # Taylor series in it with the raw moments of A.
        acc = np.ones(ts.shape, dtype=complex)
        for k in range(1, 6):
            acc = acc + (1j * ts) ** k * model.rii_moment(k) / factorial(k)
        out[small] = acc
    big = ~small
    if np.any(big) and model.d_max / model.d_min - 1.0 <= NARROW_RATIO:
        out[big] = _phi_rii_gauss(model, t[big])
    elif np.any(big):
        tb = t[big]
        dmax2, dmin2 = model.d_max ** 2, model.d_min ** 2
        val = (dmax2 * np.exp(1j * tb / dmax2) - dmin2 * np.exp(1j * tb / dmin2)
               + tb * (h_function(tb / dmax2) - h_function(tb / dmin2)))
        out[big] = val / model.area_width
    return out


# Below this relative annulus width the closed form loses digits to cancellation
# (terms of size t / (d_max**2 - d_min**2) nearly cancel).
NARROW_RATIO = 1e-2


@lru_cache(maxsize=32)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _phi_rii_gauss(model: AnnulusModel, t):
    """``phi(t) = mean of exp(i t / s)`` for ``s = R**2`` uniform on ``[d_min**2, d_max**2]``.

    Gauss-Legendre in ``s``; the rule grows with the phase range ``t (hi - lo)``.
    """
    lo, hi = model.rii_support
    s0, s1 = model.d_min ** 2, model.d_max ** 2
    n_nodes = 32 + 16 * np.ceil(t * (hi - lo) / 32).astype(int)
    out = np.empty(t.shape, dtype=complex)
    for n in np.unique(n_nodes):
        sel = n_nodes == n
        x, w = _legendre(int(n))
        s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x
        out[sel] = 0.5 * np.exp(1j * np.outer(t[sel], 1.0 / s)) @ w
    return out


def _cutoff(model: AnnulusModel, quad: QuadratureSpec) -> float:
    lo, hi = model.rii_support
    return quad.small_t_cutoff / (hi - lo)


def phi_rii(model: AnnulusModel, t, quad: QuadratureSpec = DEFAULT_QUAD):
    """Characteristic function of one ranging intensity ``A = R**-2``.

    Negative arguments use ``phi(-t) = conj(phi(t))``.
    """
    t = np.asarray(t, dtype=float)
    val = _phi_rii_nonneg(model, np.abs(t), _cutoff(model, quad))
    val = np.where(t < 0, np.conj(val), val)
    return val[()] if val.ndim == 0 else val


def rii_envelope(model: AnnulusModel, t):
    """Upper bound on ``|phi_rii(t)|`` for ``t > 0``.

    Integrating by parts once gives ``2 f(lo) / t``; twice gives
    ``(f(lo) + f(hi)) / t + 2 |f'(lo)| / t**2`` (``f`` is decreasing and convex).
    """
    t = np.asarray(t, dtype=float)
    lo, hi = model.rii_support
    f_lo, f_hi = lo ** -2 / model.area_width, hi ** -2 / model.area_width
    df_lo = 2.0 * lo ** -3 / model.area_width
    first = 2.0 * f_lo / t
    second = (f_lo + f_hi) / t + 2.0 * df_lo / t ** 2
    return np.minimum(1.0, np.minimum(first, second))


@dataclass(frozen=True)
class CharFn:
    """Characteristic function of ``sum_j coeffs[j] * A_j`` with ``A_j`` iid."""

    model: AnnulusModel
    coeffs: tuple
    quad: QuadratureSpec = DEFAULT_QUAD

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones(t.shape, dtype=complex)
        # Group equal coefficients so each distinct factor is evaluated once.
        coeffs, counts = np.unique(np.asarray(self.coeffs, dtype=float), return_counts=True)
        for c, k in zip(coeffs, counts):
            if c == 0:
                continue
            out = out * phi_rii(self.model, c * t, self.quad) ** int(k)
        return out

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.model.rii_support
        c = np.asarray(self.coeffs, dtype=float)
        return float(np.sum(np.minimum(c * lo, c * hi))), float(np.sum(np.maximum(c * lo, c * hi)))

    def cumulants(self) -> tuple[float, float, float]:
        m1, m2, m3 = (self.model.rii_moment(k) for k in (1, 2, 3))
        k1, k2, k3 = m1, m2 - m1 ** 2, m3 - 3 * m2 * m1 + 2 * m1 ** 3
        c = np.asarray(self.coeffs, dtype=float)
        return float(k1 * c.sum()), float(k2 * (c ** 2).sum()), float(k3 * (c ** 3).sum())

    def envelope(self, t):
        """Upper bound on ``|phi(t)|`` for ``t > 0``."""
        t = np.asarray(t, dtype=float)
        out = np.ones(t.shape)
        for c in self.coeffs:
            if c != 0:
                out = out * rii_envelope(self.model, abs(c) * t)
        return out

    def truncation_point(self, floor: float) -> float:
        """Smallest ``T`` on a geometric scan with ``envelope(T) / T < floor``."""
        t = 1.0
        while self.envelope(t) / t >= floor:
            t *= 1.05
            if t > 1e12:
                raise ConvergenceError("no truncation point below 1e12", label="gil-pelaez tail")
        return t


def phi_xn(model: AnnulusModel, t, quad: QuadratureSpec = DEFAULT_QUAD):
    """Characteristic function of ``X_N = sum_k R_k**-2``."""
    return xn_charfn(model, quad)(t)


def xn_charfn(model: AnnulusModel, quad: QuadratureSpec = DEFAULT_QUAD) -> CharFn:
    return CharFn(model, (1.0,) * model.n_anchors, quad)


def t_aux_charfn(model: AnnulusModel, u: float, quad: QuadratureSpec = DEFAULT_QUAD) -> CharFn:
    """``T(u) = (1 - u) A_1 - u (A_2 + ... + A_N)``; ``P(T(u) > 0) = P(B_1 > u)``."""
    return CharFn(model, (1.0 - u,) + (-u,) * (model.n_anchors - 1), quad)


def phi_t_aux(model: AnnulusModel, u: float, t, quad: QuadratureSpec = DEFAULT_QUAD):
    return t_aux_charfn(model, u, quad)(t)


def _uniform_runs(x, min_run=8):
    """Split ``x`` into ``(start, stop, uniform)`` index runs of equal spacing."""
    runs = []
    n = x.size
    i = 0
    while i < n:
        j = i + 1
        if j < n:
            step = x[j] - x[i]
            scale = max(abs(x[i]), abs(x[j]), abs(step))
            while j + 1 < n and abs((x[j + 1] - x[j]) - step) <= 1e-9 * scale:
                j += 1
        if j + 1 - i >= min_run:
            runs.append((i, j + 1, True))
        else:
            runs.append((i, j + 1, False))
        i = j + 1
    return runs


def _phases(x, t, runs):
    """``exp(-i t x)`` as an ``(len(x), len(t))`` array.

    Uniformly spaced runs use a cumulative product of the per-step phase,
    which is an order of magnitude cheaper than evaluating cos/sin on the
    full outer product; accumulated rounding stays near ``run_length * eps``.
    """
    out = np.empty((x.size, t.size), dtype=complex)
    for start, stop, uniform in runs:
        if not uniform:
            out[start:stop] = np.exp(-1j * np.outer(x[start:stop], t))
            continue
        n = stop - start
        step = (x[stop - 1] - x[start]) / (n - 1)
        block = np.empty((n, t.size), dtype=complex)
        block[0] = np.exp(-1j * x[start] * t)
        block[1:] = np.exp(-1j * step * t)[None, :]
        np.cumprod(block, axis=0, out=block)
        out[start:stop] = block
    return out


def _gil_pelaez_integrand(phi: CharFn, x: np.ndarray, cutoff: float):
    k1, k2, k3 = phi.cumulants()
    d = k1 - x
    third = k3 + 3 * k2 * d + d ** 3
    runs = _uniform_runs(x)

    def f(t):
        val = phi(t)
        tt = np.where(t > 0, t, 1.0)
        im = (_phases(x, t, runs) * (val / tt)[None, :]).imag
        small = t < cutoff
        if np.any(small):
            ts = t[small]
            # E[sin(t (X - x))] / t to third order.
            im[:, small] = d[:, None] - ts[None, :] ** 2 * third[:, None] / 6.0
        return im

    return f


def gil_pelaez_ccdf(phi: CharFn, x, quad: QuadratureSpec = DEFAULT_QUAD, *, label="gil-pelaez"):
    """``P(X > x) = 1/2 + (1/pi) int_0^inf Im(exp(-itx) phi(t)) / t dt``, clamped to [0, 1].

    ``x`` may be a scalar or a 1-D array; all points share one adaptive
    panel tree aligned to half-periods of the fastest oscillation.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = phi.support
    width = hi - lo
    cutoff = quad.small_t_cutoff / max(width, 1e-300)
    freq = max(float(np.max(np.abs(hi - x))), float(np.max(np.abs(x - lo))), width)
    t_max = phi.truncation_point(quad.t_truncation_floor)
    n_panels = int(np.ceil(t_max * freq / np.pi))
    edges = np.linspace(0.0, t_max, n_panels + 1)
    budget = max(quad.max_subdivisions, 2 * n_panels)
    batch = max(4, int(2 ** 21 // (15 * x.size)))
    value, _ = integrate_panels(_gil_pelaez_integrand(phi, x, cutoff), edges,
                                abs_tol=quad.abs_tol * np.pi, rel_tol=quad.rel_tol,
                                max_subdivisions=budget, batch=batch, label=label)
    ccdf = np.clip(0.5 + value / np.pi, 0.0, 1.0)
    return float(ccdf[0]) if scalar else ccdf


def _stieltjes(h, abscissae, values):
    mids = 0.5 * (abscissae[1:] + abscissae[:-1])
    mass = values[:-1] - values[1:]
    return np.sum(h(mids) * mass, axis=-1)


def support_grid(lo: float, hi: float, n_points: int = 2049, n_segments: int = 16):
    """Piecewise-uniform grid on ``[lo, hi]`` with geometrically growing segments.

    Segment boundaries are log-spaced so resolution concentrates near the
    lower edge where intensity sums carry most of their mass; within each
    segment points are equally spaced (which keeps ccdf inversion cheap).
    ``n_points - 1`` must be divisible by ``2 * n_segments`` so that
    dropping every other point yields the same construction at half size.
    """
    per = (n_points - 1) // n_segments
    if per * n_segments != n_points - 1 or per % 2:
        raise ValueError("n_points - 1 must be an even multiple of n_segments")
    bounds = np.geomspace(lo, hi, n_segments + 1) if lo > 0 else np.linspace(lo, hi, n_segments + 1)
    pieces = [np.linspace(bounds[i], bounds[i + 1], per + 1)[:-1] for i in range(n_segments)]
    grid = np.concatenate(pieces + [[hi]])
    grid[0] = lo
    return grid


def expectation_over_ccdf(h, ccdf, *, abs_tol: float = 1e-5, edge_tol: float = 1e-4):
    """E[h(X)] as a midpoint Stieltjes sum against a tabulated ccdf.

    ``h`` must accept an array of abscissae and may return extra leading
    axes (one per expectation being computed). The grid is checked against
    its every-other-point coarsening; a discrepancy above ``abs_tol``
    (after Richardson scaling for the second-order rule) raises
    :class:`ConvergenceError`.
    """
    x = np.asarray(ccdf.abscissae, dtype=float)
    v = np.asarray(ccdf.values, dtype=float)
    if abs(v[0] - 1.0) > edge_tol or abs(v[-1]) > edge_tol:
        raise ValueError("ccdf must be tabulated over the full support")
    fine = _stieltjes(h, x, v)
    if x.size >= 5:
        coarse = _stieltjes(h, x[::2], v[::2]) if x.size % 2 == 1 else \
            _stieltjes(h, np.append(x[:-1:2], x[-1]), np.append(v[:-1:2], v[-1]))
        err = float(np.max(np.abs(fine - coarse))) / 3.0
        if err > abs_tol:
            raise ConvergenceError(f"grid refinement changed the expectation by {err:.3g}",
                                   label="ccdf expectation", error=err)
    return fine
