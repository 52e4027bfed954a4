"""Vectorised adaptive Gauss-Kronrod quadrature over fixed panel decompositions.

Every integral in the package goes through :func:`integrate_panels`. The
integrand receives a 1-D array of abscissae and may return values of shape
``(..., m)``; all trailing components share one panel tree, so a whole
family of integrals (one per ``x`` in a ccdf tabulation, say) is resolved
in a single adaptive pass. Panel refinement is breadth-first and the
summation order is fixed, which makes results independent of any outer
parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from each end).
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
GAUSS_WEIGHTS[7] = _WG[3]


class ConvergenceError(RuntimeError):
    """Raised when an integral cannot meet its tolerance within the subdivision budget."""

    def __init__(self, message, *, label="integral", error=float("nan")):
        super().__init__(f"{label}: {message}")
        self.label = label
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and limits shared by the oscillatory integrals.

    ``t_truncation_floor`` is the integrand magnitude below which a
    semi-infinite oscillatory tail is dropped; ``small_t_cutoff`` (relative
    to the inverse support width) selects the series branch near ``t = 0``.
    """

    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    t_truncation_floor: float = 1e-10
    max_subdivisions: int = 4096
    small_t_cutoff: float = 1e-4

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.t_truncation_floor <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 64:
            raise ValueError("max_subdivisions must be at least 64")
        if self.small_t_cutoff <= 0:
            raise ValueError("small_t_cutoff must be positive")


DEFAULT_QUAD = QuadratureSpec()


def _rule(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
    vals = np.asarray(f(t))
    vals = vals.reshape(vals.shape[:-1] + (lo.size, NODES.size))
    kronrod = vals @ KRONROD_WEIGHTS * half
    gauss = vals @ GAUSS_WEIGHTS * half
    return kronrod, gauss


def integrate_panels(f, edges, *, abs_tol=1e-8, rel_tol=1e-8, max_subdivisions=4096,
                     batch=2048, label="integral"):
    """Integrate ``f`` over ``[edges[0], edges[-1]]`` starting from the given panels.

    Returns ``(value, error_estimate)``; both have the trailing-component
    shape of ``f``'s output. Iteration stops once the summed ``|K15 - G7|``
    estimate meets ``max(abs_tol, rel_tol * |I|)``; until then, every panel
    above its length-proportional share of that target is bisected. More
    than ``max_subdivisions`` bisections raises :class:`ConvergenceError`.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be a strictly ascending 1-D array")
    total_len = edges[-1] - edges[0]
    lo, hi = edges[:-1], edges[1:]

    def evaluate(lo, hi):
        ks, gs = [], []
        for s in range(0, lo.size, batch):
            k, g = _rule(f, lo[s:s + batch], hi[s:s + batch])
            ks.append(k)
            gs.append(g)
        return np.concatenate(ks, axis=-1), np.concatenate(gs, axis=-1)

    kron, gauss = evaluate(lo, hi)
    accepted = np.zeros(kron.shape[:-1], dtype=kron.dtype)
    accepted_err = np.zeros(kron.shape[:-1])
    subdivisions = 0
    while True:
        err = np.abs(kron - gauss)
        panel_err = err.reshape(-1, lo.size).max(axis=0)
        estimate = accepted + kron.sum(axis=-1)
        scale = np.max(np.abs(estimate)) if estimate.size else 0.0
        target = max(abs_tol, rel_tol * scale)
        total_err = accepted_err + err.sum(axis=-1)
        if np.max(total_err) <= target:
            return estimate, total_err
        ok = panel_err <= target * (hi - lo) / total_len
        accepted = accepted + kron[..., ok].sum(axis=-1)
        accepted_err = accepted_err + err[..., ok].sum(axis=-1)
        if ok.all():
            return accepted, accepted_err
        lo, hi = lo[~ok], hi[~ok]
        subdivisions += lo.size
        if subdivisions > max_subdivisions:
            remaining = err[..., ~ok].sum(axis=-1)
            raise ConvergenceError(
                f"subdivision limit {max_subdivisions} reached "
                f"(estimated error {float(np.max(accepted_err + remaining)):.3g})",
                label=label, error=float(np.max(accepted_err + remaining)))
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
        kron, gauss = evaluate(lo, hi)


def integrate(f, a, b, *, panels=1, **kwargs):
    """Adaptive integral over ``[a, b]`` split into ``panels`` equal starting panels."""
    value, _ = integrate_panels(f, np.linspace(a, b, panels + 1), **kwargs)
    return value
