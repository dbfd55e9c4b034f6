"""Monotone scalar root finding shared by the Legendre inversions."""

import numpy as np


def bisect(f, lo, hi, xtol=1e-14, maxiter=200):
    """Plain bisection for a sign change of ``f`` on ``[lo, hi]``."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError("no sign change on [%r, %r]" % (lo, hi))
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0 or hi - lo < xtol:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def increasing_root(func, target, scale=1.0, x0=None, xtol=1e-12, maxiter=200):
    """Solve ``func(x) = target`` elementwise for an increasing ``func``.

    ``func`` maps an array ``x`` to ``(value, derivative)``. The bracket
    ``[x0 - B, x0 + B]`` starts at ``B = scale`` (``x0 = 0`` by default) and
    doubles until it encloses the target, then safeguarded Newton steps
    shrink it; any Newton iterate leaving the bracket is replaced by the
    midpoint.

    Every target must lie strictly inside the range of ``func``.
    """
    target = np.asarray(target, dtype=float)
    shape = target.shape
    target = target.ravel()
    center = np.zeros(target.shape)
    if x0 is not None:
        center = np.broadcast_to(np.asarray(x0, dtype=float), shape).ravel()
        center = np.where(np.isfinite(center), center, 0.0)
    width = np.full(target.shape, float(scale))
    lo, hi = center - width, center + width

    for _ in range(64):
        flo, _ = func(lo)
        fhi, _ = func(hi)
        bad_lo = flo > target
        bad_hi = fhi < target
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = np.where(bad_lo | bad_hi, 2.0 * width, width)
        lo = np.where(bad_lo, center - width, lo)
        hi = np.where(bad_hi, center + width, hi)
    else:
        raise ValueError("could not bracket the root")

    x = center if x0 is not None else 0.5 * (lo + hi)
    for _ in range(maxiter):
        fx, dfx = func(x)
        resid = fx - target
        lo = np.where(resid < 0, x, lo)
        hi = np.where(resid > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - resid / dfx
        inside = np.isfinite(newton) & (newton >= lo) & (newton <= hi)
        x_new = np.where(inside, newton, 0.5 * (lo + hi))
        x_new = np.where(resid == 0, x, x_new)
        done = np.abs(x_new - x) <= xtol * np.maximum(1.0, np.abs(x))
        x = x_new
        if done.all():
            break
    return x.reshape(shape)
