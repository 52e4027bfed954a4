"""Independent reference implementations used by the tests.

Nothing here imports the package under test: every oracle is either a
brute-force quadrature, a series, or a direct simulation with its own RNG.
"""

from __future__ import annotations

import mpmath
import numpy as np
from scipy import integrate, special


def si_quad(x: float) -> float:
    """Adaptive quadrature of sin(t)/t in extended precision, one panel per half-period."""
    with mpmath.workdps(30):
        edges = [0] + [k * mpmath.pi for k in range(1, int(x / np.pi) + 1)] + [mpmath.mpf(x)]
        return float(mpmath.quad(lambda t: mpmath.sinc(t), edges))


def ci_series(x: float) -> float:
    """gamma + ln x + sum_k (-x^2)^k / (2k (2k)!) in extended precision."""
    with mpmath.workdps(40):
        xx = mpmath.mpf(x)
        total, term, k = mpmath.mpf(0), mpmath.mpf(1), 0
        while True:
            k += 1
            term *= -xx * xx / ((2 * k - 1) * (2 * k))
            add = term / (2 * k)
            total += add
            if abs(add) < mpmath.mpf(10) ** -35 * (1 + abs(total)):
                break
        return float(mpmath.euler + mpmath.log(xx) + total)


def bessel_series(order: int, x: float) -> float:
    with mpmath.workdps(40):
        return float(mpmath.besselj(order, x))


def annulus_rii_samples(d_min, d_max, n, samples, seed):
    """``A = R**-2`` for ranges with density proportional to ``r`` on the annulus."""
    rng = np.random.default_rng(seed)
    r2 = rng.uniform(d_min ** 2, d_max ** 2, size=(samples, n))
    return 1.0 / r2


def anchor_samples(d_min, d_max, n, samples, seed):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(d_min ** 2, d_max ** 2, size=(samples, n)))
    th = rng.uniform(0.0, 2 * np.pi, size=(samples, n))
    return r, th


def speb_brute(r, th, t_s=1.0):
    """Trace of the inverse FIM, built and inverted with numpy.linalg."""
    u = np.stack([np.cos(th), np.sin(th)], axis=-1)
    fim = np.einsum("...k,...ki,...kj->...ij", t_s / r ** 2, u, u)
    return np.trace(np.linalg.inv(fim), axis1=-2, axis2=-1)


def y_n_samples(r, th):
    a = r ** -2.0
    b = a / a.sum(axis=-1, keepdims=True)
    z = (b * np.exp(2j * th)).sum(axis=-1)
    return 1.0 - np.abs(z) ** 2


def w_n_samples(n, samples, seed):
    th = np.random.default_rng(seed).uniform(0.0, 2 * np.pi, size=(samples, n))
    return 1.0 - np.abs(np.exp(2j * th).sum(axis=1)) ** 2 / n ** 2


def phi_rii_quad(d_min, d_max, t):
    """Characteristic function of ``A`` by oscillatory-weight quadrature of its density."""
    lo, hi = d_max ** -2, d_min ** -2
    width = d_max ** 2 - d_min ** 2
    dens = lambda a: a ** -2 / width
    if t == 0:
        return 1.0 + 0j
    kw = dict(epsabs=1e-13, epsrel=1e-13, limit=2000)
    re = integrate.quad(dens, lo, hi, weight="cos", wvar=t, **kw)[0]
    im = integrate.quad(dens, lo, hi, weight="sin", wvar=t, **kw)[0]
    return complex(re, im)


def mean_yn_laplace(d_min, d_max, n):
    """E[Y_N] = 1 - N E[B^2] with ``E[A_1^2 / X^2] = int_0^inf s E[A^2 e^{-sA}] E[e^{-sA}]^{N-1} ds``."""
    lo, hi = d_max ** -2, d_min ** -2
    width = d_max ** 2 - d_min ** 2

    def laplace(s):
        return (np.exp(-s * lo) / lo - np.exp(-s * hi) / hi
                - s * (special.exp1(s * lo) - special.exp1(s * hi))) / width

    def second(s):
        return (np.exp(-s * lo) - np.exp(-s * hi)) / (s * width)

    val = integrate.quad(lambda s: s * second(s) * laplace(s) ** (n - 1), 0, np.inf,
                         limit=500, epsabs=1e-14, epsrel=1e-12)[0]
    return 1.0 - n * val


def w3_ccdf_exact(u: float) -> float:
    """P(W_3 > u): condition on the first two unit steps, whose resultant has length 2|cos(psi/2)|."""
    if u < 0:
        return 1.0
    if u > 1:
        return 0.0
    r = 3.0 * np.sqrt(1.0 - u)

    def given(psi):
        rho = 2.0 * abs(np.cos(psi / 2.0))
        if rho < 1e-300:
            return 1.0 if r > 1 else 0.0
        c = np.clip((r * r - rho * rho - 1.0) / (2.0 * rho), -1.0, 1.0)
        return 1.0 - np.arccos(c) / np.pi

    pts = [2.0 * np.arccos(v / 2.0) for v in (abs(r - 1.0), r + 1.0) if v < 2.0]
    val = integrate.quad(given, 0.0, np.pi, points=pts or None, epsabs=1e-13, epsrel=1e-13,
                         limit=1000)[0]
    return val / np.pi


def empirical_ccdf(samples, x):
    s = np.sort(np.asarray(samples).ravel())
    return (s.size - np.searchsorted(s, x, side="right")) / s.size


def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * n)))
