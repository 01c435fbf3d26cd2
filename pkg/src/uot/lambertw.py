"""Principal-branch Lambert W on the nonnegative axis.

``lambert_w`` inverts ``w * exp(w) = z`` for ``z >= 0`` with Halley's
cubically converging iteration.  ``lambert_w_log`` solves the equivalent
equation ``w + log(w) = log(z)`` directly from the logarithm of the
argument, which is the form needed when ``z`` itself would overflow
(dampening maps evaluate ``W((rho/eps) * exp(huge))`` for small ``eps``).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

_MAX_ITER = 50


def lambert_w(z):
    """Solve ``w * exp(w) = z`` for ``w >= 0``.

    Accepts a scalar or an ndarray with all entries ``>= 0``; the residual
    ``|w exp(w) - z|`` is driven below ``1e-13 * (1 + z)``.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise DomainError("lambert_w requires z >= 0")
    w = np.where(z_arr < np.e, z_arr / (1.0 + z_arr),
                 np.log(np.maximum(z_arr, 1.0)))
    big = z_arr >= np.e
    if np.any(big):
        lz = np.log(np.maximum(z_arr, np.e))
        w = np.where(big, lz - np.log(lz), w)
    tol = 1e-14 * (1.0 + z_arr)
    for _ in range(_MAX_ITER):
        ew = np.exp(w)
        f = w * ew - z_arr
        if np.all(np.abs(f) <= tol):
            break
        wp1 = w + 1.0
        # Halley step for f(w) = w e^w - z
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w = w - f / denom
        w = np.maximum(w, 0.0)
    return w if w.ndim else float(w)


def lambert_w_log(log_z):
    """Solve ``w + log(w) = log_z`` for ``w > 0``.

    Overflow-safe variant of ``lambert_w``: agrees with
    ``lambert_w(exp(log_z))`` whenever ``exp(log_z)`` is representable, but
    remains accurate for arguments far beyond the double range.
    """
    l_arr = np.asarray(log_z, dtype=float)
    w = np.where(l_arr > 1.0,
                 l_arr - np.log(np.maximum(l_arr, 1e-300)),
                 np.exp(np.minimum(l_arr, 1.0)))
    # below -35 the exponential guess is already the root to full precision
    # (and may underflow to a subnormal or to 0, both exact limits)
    active = l_arr > -35.0
    tol = 1e-13 * (1.0 + np.abs(l_arr))
    for _ in range(_MAX_ITER):
        if not np.any(active):
            break
        w_safe = np.where(active, w, 1.0)
        g = w_safe + np.log(w_safe) - np.where(active, l_arr, 1.0)
        wp1 = w_safe + 1.0
        # Halley step for g(w) = w + log(w) - L, rearranged to avoid
        # overflow at tiny w; Newton fallback when the denominator flips
        denom = 2.0 * wp1 * wp1 + g
        step = np.where(denom > 0, 2.0 * g * wp1 * w_safe / np.where(denom > 0, denom, 1.0),
                        g * w_safe / wp1)
        w_new = w_safe - step
        w = np.where(active, np.where(w_new > 0, w_new, w_safe / 2.0), w)
        # the step above is applied once more after passing tolerance, so
        # the returned residual is cubically below it
        active = active & (np.abs(g) > tol)
    out = np.where(l_arr == -np.inf, 0.0, w)
    return out if out.ndim else float(out)
