"""Independent brute-force minimizers used to cross-check closed forms.

These deliberately avoid the formulas under test: scalar problems go
through golden-section search (optionally seeded by a coarse grid), and
multivariate separable problems decompose coordinatewise.
"""

from __future__ import annotations

import math

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(f, lo: float, hi: float, tol: float = 1e-12, iters: int = 300) -> float:
    """Golden-section minimizer of a unimodal scalar function on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def grid_then_golden(f, lo: float, hi: float, grid: int = 2001, tol: float = 1e-12) -> float:
    """Coarse grid scan followed by golden refinement around the best cell.

    Handles non-smooth convex objectives (kinks) where plain golden search
    could stall on the wrong unimodal bracket.
    """
    xs = np.linspace(lo, hi, grid)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    a = xs[max(0, i - 1)]
    b = xs[min(grid - 1, i + 1)]
    return golden_minimize(f, a, b, tol=tol)


def separable_argmin(f_coord, lo: np.ndarray, hi: np.ndarray, grid: int = 2001) -> np.ndarray:
    """Coordinatewise minimizer of sum_i f_coord(i, x_i) over a box."""
    out = np.empty(lo.shape[0])
    for i in range(lo.shape[0]):
        out[i] = grid_then_golden(lambda x, _i=i: f_coord(_i, x), lo[i], hi[i], grid=grid)
    return out


def convex_scalar_argmin(dfun, lo: float, hi: float, iters: int = 200) -> float:
    """Minimizer over [lo, hi] of a convex scalar function given a
    nondecreasing (sub)derivative selection ``dfun``.

    Value-comparison search can only localize a quadratic minimum to about
    sqrt(machine eps); bisecting the derivative's sign change reaches full
    precision and stays independent of any closed-form solution.
    """
    a, b = float(lo), float(hi)
    if dfun(a) >= 0:
        return a
    if dfun(b) <= 0:
        return b
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if dfun(mid) < 0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-16 * max(1.0, abs(a)):
            break
    return 0.5 * (a + b)


def halfspace_box_project(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Projection onto {u in [lo,hi] : <a,u> <= b} via dual bisection."""
    clip = lambda z: np.minimum(np.maximum(z, lo), hi)
    u0 = clip(x)
    if a @ u0 <= b:
        return u0
    lam_lo, lam_hi = 0.0, 1.0
    while a @ clip(x - lam_hi * a) > b:
        lam_hi *= 2.0
        if lam_hi > 1e12:
            break
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        if a @ clip(x - lam * a) > b:
            lam_lo = lam
        else:
            lam_hi = lam
    return clip(x - lam_hi * a)


def projected_subgradient_l1(
    center: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    a: np.ndarray,
    b: float,
    iters: int = 200000,
    step0: float = 1.0,
) -> tuple[np.ndarray, float]:
    """Projected subgradient descent for min ||u - center||_1 over a box cut
    by one halfspace; returns the best iterate and its objective."""
    u = halfspace_box_project(np.zeros_like(center), lo, hi, a, b)
    best_u = u.copy()
    best_val = float(np.abs(u - center).sum())
    for k in range(1, iters + 1):
        g = np.sign(u - center)
        u = halfspace_box_project(u - (step0 / math.sqrt(k)) * g, lo, hi, a, b)
        val = float(np.abs(u - center).sum())
        if val < best_val:
            best_val = val
            best_u = u.copy()
    return best_u, best_val
