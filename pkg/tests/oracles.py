"""Independent reference computations used by the test-suite.

Nothing here imports the package under test.
"""
from __future__ import annotations

import calendar
import math
from collections import Counter
from fractions import Fraction

import mpmath
import numpy as np

mpmath.mp.dps = 40


def phi_series(x: float) -> float:
    """Standard normal CDF from the Maclaurin series of erf (40 digits)."""
    x = mpmath.mpf(x)
    t = x / mpmath.sqrt(2)
    term = t
    total = t
    n = 0
    while True:
        n += 1
        term *= -t * t / n
        add = term / (2 * n + 1)
        total += add
        if abs(add) < mpmath.mpf(10) ** -35:
            break
    return float(mpmath.mpf("0.5") + total / mpmath.sqrt(mpmath.pi))


def quantile_bisect(p: float) -> float:
    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi_series(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def epoch_from_calendar(y, mo, d, hh, mm, ss) -> int:
    """Seconds since 1970-01-01 by counting days, no time library."""
    days = 0
    for year in range(1970, y):
        days += 366 if calendar.isleap(year) else 365
    month_days = [31, 29 if calendar.isleap(y) else 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]
    days += sum(month_days[: mo - 1]) + (d - 1)
    return ((days * 24 + hh) * 60 + mm) * 60 + ss


def eig_sym_2x2(a: np.ndarray):
    p, q, r = a[0, 0], a[0, 1], a[1, 1]
    m = 0.5 * (p + r)
    s = math.sqrt(0.25 * (p - r) ** 2 + q * q)
    vals = [m + s, m - s]
    vecs = []
    for lam in vals:
        v = np.array([q, lam - p]) if abs(q) > 1e-300 or abs(lam - p) > abs(lam - r) else np.array([lam - r, q])
        if np.linalg.norm(v) < 1e-14:
            v = np.array([lam - r, q])
        if np.linalg.norm(v) < 1e-14:
            v = np.array([1.0, 0.0]) if lam == p else np.array([0.0, 1.0])
        vecs.append(v / np.linalg.norm(v))
    return np.array(vals), np.array(vecs)


def eig_sym_3x3(a: np.ndarray):
    """Eigenpairs of a symmetric 3x3 matrix from its characteristic cubic
    (trigonometric root formula) and cross products for the vectors."""
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = np.trace(a) / 3.0
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2.0
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    l1 = q + 2 * p * math.cos(phi)
    l3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    l2 = 3 * q - l1 - l3
    vals = [l1, l2, l3]
    vecs = []
    for lam in vals:
        m = a - lam * np.eye(3)
        crosses = [np.cross(m[0], m[1]), np.cross(m[0], m[2]), np.cross(m[1], m[2])]
        v = max(crosses, key=np.linalg.norm)
        vecs.append(v / np.linalg.norm(v))
    return np.array(vals), np.array(vecs)


def cholesky_by_hand_2x2(a):
    l11 = math.sqrt(a[0][0])
    l21 = a[1][0] / l11
    l22 = math.sqrt(a[1][1] - l21 * l21)
    return [[l11, 0.0], [l21, l22]]


def ks_statistic_bruteforce(a, b) -> Fraction:
    """sup |ECDF_a - ECDF_b| by checking every observed point (O(n*m))."""
    n, m = len(a), len(b)
    best = Fraction(0)
    for x in list(a) + list(b):
        fa = sum(1 for v in a if v <= x)
        fb = sum(1 for v in b if v <= x)
        d = abs(Fraction(fa, n) - Fraction(fb, m))
        if d > best:
            best = d
    return best


def tvd_complement(a, b) -> float:
    ca, cb = Counter(a), Counter(b)
    na, nb = len(a), len(b)
    total = sum(abs(Fraction(ca[k], na) - Fraction(cb[k], nb)) for k in set(ca) | set(cb))
    return float(1 - total / 2)


def joint_tvd_complement(a1, a2, b1, b2) -> float:
    return tvd_complement(list(zip(a1, a2)), list(zip(b1, b2)))


def f1_from_counts(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
