"""Small convex solvers shared by the tilt optimizations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ScalarMin:
    x: float
    fx: float
    iterations: int
    converged: bool


def bracket_sign_change(deriv: Callable[[float], float], start: float = 1.0,
                        max_doublings: int = 1100) -> tuple[float, float]:
    """Double ``hi`` from ``start`` until ``deriv(hi) >= 0``; return ``(lo, hi)``.

    ``deriv`` must be nondecreasing with ``deriv(0) < 0``.
    """
    lo, hi = 0.0, start
    for _ in range(max_doublings):
        if deriv(hi) >= 0:
            return lo, hi
        lo, hi = hi, 2.0 * hi
    raise ArithmeticError("derivative never changes sign; objective unbounded below")


def golden_section(f: Callable[[float], float], deriv: Callable[[float], float],
                   lo: float, hi: float, rel_tol: float = 1e-10,
                   max_iter: int = 500) -> ScalarMin:
    """Minimize a convex ``f`` on ``[lo, hi]`` to ``|dx| <= rel_tol * (1 + x)``.

    Golden-section on function values until they tie at rounding level, then
    bisection on the sign of ``deriv`` for the remaining digits.
    """
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while it < max_iter and (b - a) > rel_tol * (1.0 + a):
        it += 1
        if abs(fc - fd) <= 4 * np.finfo(float).eps * max(1.0, abs(fc), abs(fd)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    while it < max_iter and (b - a) > rel_tol * (1.0 + a):
        it += 1
        mid = 0.5 * (a + b)
        if deriv(mid) < 0:
            a = mid
        else:
            b = mid
    x = 0.5 * (a + b)
    return ScalarMin(x, f(x), it, (b - a) <= rel_tol * (1.0 + a))


@dataclass
class BoxMin:
    x: np.ndarray
    fx: float
    kkt: float
    iterations: int
    converged: bool


def kkt_residual(x: np.ndarray, g: np.ndarray) -> float:
    """Projected-gradient residual ``|x - P(x - g)|_inf`` for the box ``x >= 0``."""
    return float(np.max(np.abs(x - np.maximum(x - g, 0.0)))) if x.size else 0.0


def projected_newton(fun: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
                     x0: np.ndarray, tol: float = 1e-8, max_iter: int = 500,
                     blowup: float = 1e12) -> BoxMin:
    """Minimize a smooth convex function over the nonnegative orthant.

    ``fun(x)`` returns value, gradient and Hessian.  Steps are Newton
    directions on the free coordinates (pseudo-inverse for singular
    Hessians) or the negative gradient, projected onto the orthant, with
    Armijo backtracking along the projection arc.
    """
    x = np.maximum(np.asarray(x0, dtype=float), 0.0)
    f, g, H = fun(x)
    it = 0
    while True:
        res = kkt_residual(x, g)
        if res <= tol:
            return BoxMin(x, f, res, it, True)
        if it >= max_iter:
            return BoxMin(x, f, res, it, False)
        if np.max(x) > blowup:
            raise ArithmeticError("tilt diverges; objective unbounded below")
        it += 1
        bind = (x <= 0.0) & (g > 0.0)
        free = ~bind
        d = np.zeros_like(x)
        if free.any():
            Hf = H[np.ix_(free, free)]
            d[free] = -np.linalg.lstsq(Hf, g[free], rcond=1e-12)[0]
        if not np.all(np.isfinite(d)) or g @ d >= 0:
            d = np.where(free, -g, 0.0)
        moved = False
        for direction in (d, np.where(free, -g, 0.0)):
            t = 1.0
            for _ in range(80):
                xt = np.maximum(x + t * direction, 0.0)
                step = xt - x
                if not np.any(step):
                    break
                ft, gt, Ht = fun(xt)
                if ft <= f + 1e-4 * (g @ step) or (ft <= f and abs(ft - f) <= 1e-15 * max(1.0, abs(f))):
                    moved = True
                    break
                t *= 0.5
            if moved:
                break
        if not moved:
            return BoxMin(x, f, res, it, res <= tol)
        x, f, g, H = xt, ft, gt, Ht
