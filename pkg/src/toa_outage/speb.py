"""Per-realisation error-bound metrics for ToA localisation.

All functions accept an :class:`AnchorSet` whose arrays may carry leading
batch axes; reductions run over the trailing anchor axis. Degenerate
geometries (all bearings collinear) map to ``+inf`` rather than raising, so
they can be counted in outage tails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annulus import AnchorSet, AnnulusModel

SPEED_OF_LIGHT = 299_792_458.0
FIM_SINGULAR_RTOL = 1e-14


@dataclass(frozen=True)
class SpebDecomposition:
    """The product form ``speb = 4 / (t_s * x_n * y_n)`` of one (or a batch of) realisation(s)."""

    x_n: np.ndarray
    y_n: np.ndarray
    b_weights: np.ndarray
    speb: np.ndarray


def _safe_inverse(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    out = np.full(num.shape, np.inf)
    np.divide(num, den, out=out, where=den > 0)
    return out[()] if out.ndim == 0 else out


def speb_exact(model: AnnulusModel, anchors: AnchorSet):
    """SPEB from the pairwise form ``sum(A) / (t_s * sum_{j<k} A_j A_k sin^2(theta_j - theta_k))``."""
    a = anchors.ranges ** -2.0
    th = anchors.angles
    n = anchors.n_anchors
    j, k = np.triu_indices(n, 1)
    pair = a[..., j] * a[..., k] * np.sin(th[..., j] - th[..., k]) ** 2
    total = a.sum(axis=-1)
    den = pair.sum(axis=-1)
    # Same relative singularity test as the FIM form: det = t_s^2 * den, trace = t_s * total.
    den = np.where(den <= FIM_SINGULAR_RTOL * total ** 2 / 4, 0.0, model.t_s * den)
    return _safe_inverse(total, den)


def speb_via_fim(model: AnnulusModel, anchors: AnchorSet):
    """Trace of the inverse 2x2 Fisher information ``sum(t_s/R^2 * u u^T)``."""
    mu = model.t_s * anchors.ranges ** -2.0
    c, s = np.cos(anchors.angles), np.sin(anchors.angles)
    jxx = (mu * c * c).sum(axis=-1)
    jyy = (mu * s * s).sum(axis=-1)
    jxy = (mu * c * s).sum(axis=-1)
    trace = jxx + jyy
    det = jxx * jyy - jxy ** 2
    singular = det <= FIM_SINGULAR_RTOL * (trace / 2) ** 2
    out = _safe_inverse(trace, np.where(singular, 0.0, det))
    return out


def decompose(model: AnnulusModel, anchors: AnchorSet) -> SpebDecomposition:
    a = anchors.ranges ** -2.0
    x_n = a.sum(axis=-1)
    b = a / x_n[..., None]
    c2 = (b * np.cos(2 * anchors.angles)).sum(axis=-1)
    s2 = (b * np.sin(2 * anchors.angles)).sum(axis=-1)
    # 1 - |sum b e^{2i theta}|^2 can round slightly below zero for collinear sets.
    y_n = np.clip(1.0 - c2 * c2 - s2 * s2, 0.0, 1.0)
    # det(FIM) / (trace / 2)^2 equals y_n, so this matches the FIM singularity test.
    speb = _safe_inverse(4.0, np.where(y_n <= FIM_SINGULAR_RTOL, 0.0, model.t_s * x_n * y_n))
    return SpebDecomposition(x_n=x_n, y_n=y_n, b_weights=b, speb=speb)


def w_n(angles):
    """Angular geometry factor ``1 - |mean(exp(2i theta))|^2`` in [0, 1]."""
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[-1]
    c2 = np.cos(2 * angles).sum(axis=-1)
    s2 = np.sin(2 * angles).sum(axis=-1)
    return np.clip(1.0 - (c2 * c2 + s2 * s2) / n ** 2, 0.0, 1.0)


def gdop(model: AnnulusModel, radius, angles):
    """Equal-range SPEB ``4 R^2 / (t_s N W_N)``."""
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[-1]
    return _safe_inverse(4.0 * np.asarray(radius, float) ** 2, model.t_s * n * w_n(angles))


def speb_support_min(model: AnnulusModel) -> float:
    """Smallest attainable SPEB: a regular N-gon at radius ``d_min``."""
    return 4.0 * model.d_min ** 2 / (model.n_anchors * model.t_s)


def ts_from_system(beta: float, d_min: float, noise_psd: float, signal_energy: float) -> float:
    """System constant ``8 pi^2 beta^2 d_min^2 E_s / (N_0 c^2)``."""
    for name, value in (("beta", beta), ("d_min", d_min), ("noise_psd", noise_psd),
                        ("signal_energy", signal_energy)):
        if not value > 0:
            raise ValueError(f"{name} must be positive")
    return 8 * np.pi ** 2 * beta ** 2 * d_min ** 2 * signal_energy / (noise_psd * SPEED_OF_LIGHT ** 2)


def support_mismatch_ratio(model: AnnulusModel) -> float:
    """Ratio of the minimum of the average-SNR GDOP surrogate to the minimum SPEB.

    Equals ``1 / (d_min^2 E[R^-2])``; tends to 1 as the annulus collapses.
    """
    q = model.d_max / model.d_min
    log_q = np.log(q)
    if log_q < 1e-6:
        # series of (q^2 - 1) / (2 log q) about q = 1
        return float(1.0 + log_q + 2.0 * log_q ** 2 / 3.0)
    return float((q * q - 1.0) / (2.0 * log_q))
