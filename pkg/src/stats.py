"""
Goodness-of-fit machinery for block generation times: exponential fitting,
histograms with expected frequencies, and Anderson-Darling tests.

The two-sample test follows the k-sample rank formulas of Scholz and Stephens for
k = 2, standardized by the exact null mean and variance and read against their
table of critical values.
"""

import math
from typing import Callable, Iterable, List, Sequence, Tuple, Union

import numpy as np

from src.errors import DegenerateRangeError, DomainError, ParameterError
from src.schemas import AdResult, Histogram, SampleSet

SamplesLike = Union[SampleSet, Sequence[float], np.ndarray]

HISTOGRAM_BINS = 10

# Critical values of the standardized statistic for k = 2 samples.
SIGNIFICANCE_LEVELS = (0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001)
CRITICAL_VALUES = (0.326, 1.225, 1.960, 2.719, 3.752, 4.592, 6.546)


def as_array(samples: SamplesLike) -> np.ndarray:
    values = samples.values if isinstance(samples, SampleSet) else samples
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ParameterError("sample set is empty")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("sample set holds non-finite values")
    return arr


def fit_exponential_mean(samples: SamplesLike) -> float:
    """Rate of the exponential whose mean matches the sample mean."""
    values = as_array(samples)
    if np.any(values <= 0):
        raise ParameterError("exponential fit needs strictly positive values")
    return 1.0 / float(values.mean())


def histogram10(samples: SamplesLike, bins: int = HISTOGRAM_BINS) -> Histogram:
    """
    Equal-width bins over [min, max]; every bin is half-open except the last.
    """
    values = as_array(samples)
    low, high = float(values.min()), float(values.max())
    if low == high:
        raise DegenerateRangeError(f"all {values.size} values equal {low}")
    if bins < 1:
        raise ParameterError(f"bin count must be positive, got {bins}")
    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    return Histogram(edges=edges.tolist(), counts=counts.tolist())


def expected_frequencies(rate: float, edges: Sequence[float], total: int) -> List[float]:
    """total * (exp(-rate*a) - exp(-rate*b)) for every bin [a, b)."""
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("bin edges must be at least two strictly ascending values")
    survival = np.exp(-rate * edges)
    return (total * (survival[:-1] - survival[1:])).tolist()


def ad_one_sample(samples: SamplesLike, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """
    A^2 = -M - (1/M) * sum (2i-1) [ln F(x_(i)) + ln(1 - F(x_(M+1-i)))].
    """
    x = np.sort(as_array(samples))
    u = np.asarray(cdf(x), dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise DomainError("distribution function is 0 or 1 at a sample point")
    m = x.size
    i = np.arange(1, m + 1)
    return float(-m - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / m)


def _pooled(f: np.ndarray, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pooled = np.sort(np.concatenate([f, g]))
    return pooled, np.unique(pooled)


def _a2_midrank(samples: Iterable[np.ndarray], pooled: np.ndarray, distinct: np.ndarray) -> float:
    total = pooled.size
    left = pooled.searchsorted(distinct, "left")
    ties = pooled.searchsorted(distinct, "right") - left
    b = left + ties / 2.0
    a2 = 0.0
    for sample in samples:
        s = np.sort(sample)
        below = s.searchsorted(distinct, "left")
        mij = below + (s.searchsorted(distinct, "right") - below) / 2.0
        inner = ties / total * (total * mij - b * s.size) ** 2 / (b * (total - b) - total * ties / 4.0)
        a2 += inner.sum() / s.size
    return a2 * (total - 1.0) / total


def _a2_right(samples: Iterable[np.ndarray], pooled: np.ndarray, distinct: np.ndarray) -> float:
    total = pooled.size
    cut = distinct[:-1]
    ties = pooled.searchsorted(cut, "right") - pooled.searchsorted(cut, "left")
    b = ties.cumsum()
    a2 = 0.0
    for sample in samples:
        s = np.sort(sample)
        mij = s.searchsorted(cut, "right")
        inner = ties / total * (total * mij - b * s.size) ** 2 / (b * (total - b))
        a2 += inner.sum() / s.size
    return a2


def ad_two_sample_statistic(f: SamplesLike, g: SamplesLike, midrank: bool = True) -> float:
    """
    Raw two-sample A^2.

    midrank=False evaluates the right-continuous form, identical to the integral
    (MN/K) * int (F_M - G_N)^2 / (H_K (1 - H_K)) dH_K over the pooled step function.
    midrank=True uses mid-ranks for tied observations.
    """
    a, b = as_array(f), as_array(g)
    pooled, distinct = _pooled(a, b)
    if distinct.size < 2:
        return 0.0
    if midrank:
        return float(_a2_midrank((a, b), pooled, distinct))
    return float(_a2_right((a, b), pooled, distinct))


def null_moments(m: int, n: int) -> Tuple[float, float]:
    """Mean and variance of the two-sample statistic under H0."""
    if m < 1 or n < 1:
        raise ParameterError(f"sample sizes must be positive, got M={m}, N={n}")
    total = m + n
    if total < 4:
        raise ParameterError(f"standardization needs M + N >= 4, got {total}")
    k = 2
    big_h = 1.0 / m + 1.0 / n
    partial = np.cumsum(1.0 / np.arange(total - 1, 1, -1))
    h = float(partial[-1]) + 1.0
    g = float((partial / np.arange(2, total)).sum())
    a = (4 * g - 6) * (k - 1) + (10 - 6 * g) * big_h
    b = (2 * g - 4) * k**2 + 8 * h * k + (2 * g - 14 * h - 4) * big_h - 8 * h + 4 * g - 6
    c = (6 * h + 2 * g - 2) * k**2 + (4 * h - 4 * g + 6) * k + (2 * h - 6) * big_h + 4 * h
    d = (2 * h + 6) * k**2 - 4 * h * k
    variance = (a * total**3 + b * total**2 + c * total + d) / ((total - 1.0) * (total - 2.0) * (total - 3.0))
    return float(k - 1), variance


def p_bound(standardized: float) -> Tuple[float, str]:
    """
    p-value by piecewise-linear interpolation of -ln(p) between critical values.

    Values below the 0.25 critical value are capped at p >= 0.25, values above the
    0.001 critical value at p <= 0.001.
    """
    if standardized < CRITICAL_VALUES[0]:
        return SIGNIFICANCE_LEVELS[0], ">="
    if standardized > CRITICAL_VALUES[-1]:
        return SIGNIFICANCE_LEVELS[-1], "<="
    log_p = np.interp(standardized, CRITICAL_VALUES, -np.log(SIGNIFICANCE_LEVELS))
    return float(np.exp(-log_p)), "="


def standardize_and_p(a2: float, m: int, n: int) -> Tuple[float, float, str]:
    """(standardized statistic, p-value, relation of the p-value to the truth)."""
    mean, variance = null_moments(m, n)
    standardized = (a2 - mean) / math.sqrt(variance)
    p, relation = p_bound(standardized)
    return standardized, p, relation


def ad_two_sample(f: SamplesLike, g: SamplesLike, midrank: bool = True) -> AdResult:
    a, b = as_array(f), as_array(g)
    a2 = ad_two_sample_statistic(a, b, midrank=midrank)
    standardized, p, relation = standardize_and_p(a2, a.size, b.size)
    return AdResult(a2=a2, standardized=standardized, p_value=p, relation=relation, m=a.size, n=b.size)


def critical_value(level: float) -> float:
    try:
        return CRITICAL_VALUES[SIGNIFICANCE_LEVELS.index(level)]
    except ValueError:
        raise ParameterError(f"no tabulated critical value at level {level}") from None


def rejects(result: AdResult, level: float) -> bool:
    return result.standardized > critical_value(level)
