"""Normality test, paired signed-rank test, p-value correction, effect size."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import DegenerateSampleError, InvalidArgumentError

EXACT_MAX_N = 25

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class TestResult:
    statistic: float
    z: float
    p: float
    n_effective: int
    method_tag: str
    p_exact: float | None = None

    __test__ = False  # not a pytest class


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


# Royston (1995), algorithm AS R94
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Coefficients for the ascending order statistics; they sum to 0 and have unit norm."""
    if n < 3:
        raise InvalidArgumentError("Shapiro-Wilk needs at least 3 observations")
    half = n // 2
    a = np.zeros(half)
    if n == 3:
        a[0] = math.sqrt(0.5)
    else:
        # positive expected normal order statistics for the upper half
        m = np.array([-_STD_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
        summ2 = 2.0 * float(np.sum(m**2))
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) + m[0] / ssumm2
        if n > 5:
            a2 = m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt(
                (summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1**2 - 2.0 * a2**2)
            )
            a[2:] = m[2:] / fac
            a[1] = a2
        else:
            fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1**2))
            a[1:] = m[1:] / fac
        a[0] = a1
    # a holds the weights of the largest values, largest first
    full = np.zeros(n)
    full[:half] = -a
    full[n - half :] = a[::-1]
    return full


def shapiro_wilk(sample: Sequence[float]) -> TestResult:
    """Shapiro-Wilk W with Royston's normalizing transformation for the p-value."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n < 3 or n > 5000:
        raise InvalidArgumentError(f"Shapiro-Wilk requires 3 <= n <= 5000, got {n}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("sample contains non-finite values")
    rng = x[-1] - x[0]
    if rng <= 0:
        raise DegenerateSampleError("sample has zero variance")
    a = shapiro_wilk_coefficients(n)
    xs = (x - x.mean()) / rng
    w = float(np.dot(a, xs) ** 2 / (np.dot(a, a) * np.dot(xs, xs)))
    w = min(w, 1.0)
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
        return TestResult(w, float("nan"), p, n, "shapiro-wilk")
    w1 = 1.0 - w
    if w1 <= 0:
        return TestResult(w, -math.inf, 1.0, n, "shapiro-wilk")
    y = math.log(w1)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return TestResult(w, math.inf, 1e-99, n, "shapiro-wilk")
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    z = (y - mu) / sigma
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return TestResult(w, z, float(p), n, "shapiro-wilk")


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def signed_rank_null_counts(doubled_ranks: Sequence[int]) -> list[int]:
    """Number of sign assignments giving each doubled positive-rank sum.

    ``counts[s]`` is how many of the 2**n assignments of +/- to the ranks make
    the doubled sum of positively signed ranks equal ``s``. Working with
    doubled ranks keeps midranks integral.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    return counts


def exact_signed_rank_p(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided exact p-value of the positive-rank sum under the sign-flip null."""
    doubled = [int(round(2 * r)) for r in ranks]
    counts = signed_rank_null_counts(doubled)
    total = sum(doubled)
    obs = int(round(2 * w_plus))
    low = min(obs, total - obs)
    tail = sum(counts[: low + 1])
    p = Fraction(2 * tail, 2 ** len(doubled))
    return float(min(p, Fraction(1)))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Paired two-sided Wilcoxon signed-rank test on d = x - y.

    Zero differences are dropped. ``statistic`` is min(W+, W-); ``z`` comes
    from W+ so that swapping x and y flips its sign. The normal approximation
    uses the tie-corrected variance and a continuity correction; for up to 25
    nonzero differences the exact sign-flip p-value is filled in as well.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgumentError("x and y must be 1-D and of equal length")
    if x.size == 0:
        raise InvalidArgumentError("paired sample is empty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("paired sample contains non-finite values")
    d = x - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegenerateSampleError("all paired differences are zero")
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes**3 - tie_sizes)) / 48.0
    diff = w_plus - mean
    if var <= 0:
        z = 0.0
    else:
        corrected = diff - math.copysign(0.5, diff) if abs(diff) > 0.5 else 0.0
        z = corrected / math.sqrt(var)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    p_exact = exact_signed_rank_p(ranks, w_plus) if n <= EXACT_MAX_N else None
    return TestResult(min(w_plus, w_minus), z, p, n, "wilcoxon-signed-rank", p_exact)


def effect_size_r(z: float, n: int) -> float:
    if n <= 0:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    return z / math.sqrt(n)


def bonferroni(pvals: Sequence[float]) -> list[float]:
    m = len(pvals)
    for p in pvals:
        if not 0.0 <= p <= 1.0:
            raise InvalidArgumentError(f"p-value {p} outside [0, 1]")
    return [min(1.0, p * m) for p in pvals]


def significance_flags(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"
