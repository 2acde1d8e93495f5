"""Soft-thresholding nonlinearity shared by every solver.

The cavity objective ``0.5*a*x**2 - b*x + |x|`` is minimised by

    f(b; a) = (b - sign(b)) * step(|b| - 1) / a

with ``step(u) = 1`` for ``u > 0`` and ``0`` otherwise, so ``|b| == 1`` sits
in the dead zone.  Both functions broadcast over numpy arrays.
"""

import numpy as np


def _check(b, a):
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
        raise ValueError("soft threshold arguments must be finite")
    if np.any(a <= 0):
        raise ValueError("curvature a must be positive")
    return b, a


def soft_threshold(b, a):
    """Return f(b; a); scalars in, scalar out."""
    b, a = _check(b, a)
    out = np.where(np.abs(b) > 1.0, (b - np.sign(b)) / a, 0.0)
    return out[()] if out.ndim == 0 else out


def soft_threshold_deriv(b, a):
    """Almost-everywhere derivative of `soft_threshold` in ``b``: step(|b|-1)/a."""
    b, a = _check(b, a)
    out = np.where(np.abs(b) > 1.0, 1.0 / a, 0.0)
    out = np.broadcast_to(out, np.broadcast(b, a).shape).astype(float)
    return out[()] if out.ndim == 0 else out


# Unchecked variants for the solver inner loops; callers guarantee a > 0.

def _st(b, a):
    return np.where(np.abs(b) > 1.0, (b - np.sign(b)) / a, 0.0)


def _st_deriv(b, a):
    return np.where(np.abs(b) > 1.0, 1.0 / a, 0.0)
