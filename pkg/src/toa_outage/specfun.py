"""Special functions used by the closed-form characteristic functions.

Thin, vectorised wrappers over :mod:`scipy.special` with the domain rules
the rest of the package relies on: ``Ci`` and ``H`` are only defined for
strictly positive arguments (negative-``t`` characteristic-function values
are obtained by conjugate symmetry instead).
"""

from __future__ import annotations

import numpy as np
from scipy import special


def sine_integral(x):
    """Si(x) = integral of sin(t)/t over [0, x]. Odd in ``x``."""
    si, _ = special.sici(np.asarray(x, dtype=float))
    return si[()] if np.ndim(si) == 0 else si


def cosine_integral(x):
    """Ci(x) = -integral of cos(t)/t over [x, inf), for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("cosine_integral is defined for x > 0 only")
    _, ci = special.sici(x)
    return ci[()] if np.ndim(ci) == 0 else ci


def h_function(x):
    """H(x) = Si(x) - i Ci(x) for ``x > 0``, as a complex array."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("h_function is defined for x > 0 only")
    si, ci = special.sici(x)
    out = si - 1j * ci
    return out[()] if np.ndim(out) == 0 else out


def bessel_j0(x):
    return special.j0(x)


def bessel_j1(x):
    return special.j1(x)
