"""Small numerical helpers shared across modules."""

import numpy as np

try:
    trapz = np.trapezoid
except AttributeError:  # numpy < 2
    trapz = np.trapz


def cumtrapz0(y, x):
    """Cumulative trapezoid integral of y over x, starting at 0."""
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out
