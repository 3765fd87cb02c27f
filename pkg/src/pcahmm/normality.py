"""Shapiro-Wilk W test with Royston's (1995, AS R94) approximation.

Coefficients use Royston's polynomial corrections to the normal-score
weights; the p-value comes from his normalizing transformation of W,
with separate fits for 4 <= n <= 11 and n >= 12 and the exact
distribution for n = 3. Valid for 3 <= n <= 5000.
"""
from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

_NORM = NormalDist()

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)
_SMALL = 1e-19


class NormalityError(ValueError):
    pass


def _poly(coef, x):
    """Evaluate coef[0] + coef[1]*x + ... by Horner's rule."""
    acc = 0.0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


def swilk_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights a_1..a_n for the ordered sample (a_1 < 0)."""
    if n < 3:
        raise NormalityError(f"Shapiro-Wilk needs n >= 3, got {n}")
    half = n // 2
    a = np.zeros(n)
    if n == 3:
        a[0] = -math.sqrt(0.5)
        a[2] = math.sqrt(0.5)
        return a
    m = np.array([_NORM.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    summ2 = float(m @ m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    upper = np.zeros(half)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
        upper[1] = a2
        first_plain = 2
    else:
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
        first_plain = 1
    upper[0] = a1
    upper[first_plain:] = -m[first_plain:half] / fac
    # upper[i] weights x_(n-i) - x_(i+1)
    a[:half] = -upper
    a[n - half:] = upper[::-1]
    return a


def shapiro_wilk(x) -> tuple[float, float]:
    """Return the W statistic and its p-value for the sample ``x``."""
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    n = x.size
    if n < 3:
        raise NormalityError(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n > 5000:
        raise NormalityError(f"Royston's approximation is valid up to n = 5000, got {n}")
    if not np.all(np.isfinite(x)):
        raise NormalityError("Shapiro-Wilk needs finite values")
    rng = x[-1] - x[0]
    if rng < _SMALL * max(1.0, abs(x[0])):
        raise NormalityError("Shapiro-Wilk is undefined for a constant sample")
    a = swilk_coefficients(n)
    xs = (x - x.mean()) / rng
    ssq = float(xs @ xs)
    w = float((a @ xs) ** 2 / ssq)
    w = min(w, 1.0)

    if n == 3:
        pw = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return w, float(min(max(pw, 0.0), 1.0))

    w1 = math.log1p(-w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return w, 1e-99
        y = -math.log(gamma - w1)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        y = w1
        xx = math.log(n)
        mu = _poly(_C5, xx)
        sigma = math.exp(_poly(_C6, xx))
    if not math.isfinite(y):
        return w, 1.0
    pw = _NORM.cdf(-(y - mu) / sigma)
    return w, float(min(max(pw, 0.0), 1.0))
