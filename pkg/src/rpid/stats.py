"""Two-sample and one-sample tests used by the evaluation battery.

Everything here is implemented directly on numpy and the math module so the
p-values do not depend on a particular scipy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class StatsError(ValueError):
    pass


class TooFewObservations(StatsError):
    pass


class ZeroVariance(StatsError):
    pass


class LengthMismatch(StatsError):
    pass


class ConstantInput(StatsError):
    pass


class InvalidArgs(StatsError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    df: Optional[float] = None

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "df": self.df, "method": self.method}


# --------------------------------------------------------------------------
# special functions


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 1000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise InvalidArgs(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    p = betainc(df / 2.0, 0.5, df / (df + t * t))
    return min(1.0, max(0.0, p))


def student_t_cdf(t: float, df: float) -> float:
    half = 0.5 * student_t_sf2(t, df)
    return 1.0 - half if t > 0 else half


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the limiting Kolmogorov distribution, P(K > lam)."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # theta-function form converges fast for small arguments
        c = math.sqrt(2.0 * math.pi) / lam
        w = math.pi * math.pi / (8.0 * lam * lam)
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * w)
            total += term
            if term < 1e-12:
                break
            k += 1
        p = 1.0 - c * total
    else:
        total = 0.0
        k = 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += term if k % 2 else -term
            if term < 1e-12:
                break
            k += 1
        p = 2.0 * total
    return min(1.0, max(0.0, p))


# --------------------------------------------------------------------------
# tests


def _as_vector(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise InvalidArgs("inputs must be finite")
    return arr


def ks_two_sample(a, b) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.sort(_as_vector(a))
    b = np.sort(_as_vector(b))
    n, m = a.size, b.size
    if n < 2 or m < 2:
        raise TooFewObservations("each sample needs at least two observations")
    points = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, points, side="right") / n
    cdf_b = np.searchsorted(b, points, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = n * m / (n + m)
    return TestResult(statistic=d, p_value=kolmogorov_sf(math.sqrt(en) * d), method="ks_two_sample")


def _binom_logpmf(x: int, n: int, p: float) -> float:
    if p == 0.0:
        return 0.0 if x == 0 else -math.inf
    if p == 1.0:
        return 0.0 if x == n else -math.inf
    log_choose = math.lgamma(n + 1) - (math.lgamma(x + 1) + math.lgamma(n - x + 1))
    return log_choose + x * math.log(p) + (n - x) * math.log1p(-p)


def binom_test(k: int, n: int, p0: float) -> TestResult:
    """Exact two-sided binomial test (minimum-likelihood method).

    Sums the probabilities of all outcomes no more likely than the observed
    one; outcomes within a relative 1e-12 of the observed probability count
    as ties.
    """
    if n < 0 or k < 0 or k > n or not 0.0 <= p0 <= 1.0:
        raise InvalidArgs(f"need 0 <= k <= n and p0 in [0, 1], got k={k}, n={n}, p0={p0}")
    log_obs = _binom_logpmf(k, n, p0)
    if log_obs == -math.inf:
        return TestResult(statistic=float(k), p_value=0.0, method="binom_test")
    threshold = log_obs + math.log1p(1e-12)
    logs = np.array([_binom_logpmf(x, n, p0) for x in range(n + 1)])
    p = float(np.sum(np.exp(logs[logs <= threshold])))
    return TestResult(statistic=float(k), p_value=min(1.0, p), method="binom_test")


def _var(x: np.ndarray) -> float:
    # exact zero for constant samples, where rounding in the mean would leave ~1e-32
    return 0.0 if np.ptp(x) == 0 else float(np.var(x, ddof=1))


def t_test_welch(a, b) -> TestResult:
    """Welch's unequal-variance t-test, two-sided."""
    a = _as_vector(a)
    b = _as_vector(b)
    if a.size < 2 or b.size < 2:
        raise TooFewObservations("each sample needs at least two observations")
    va = _var(a) / a.size
    vb = _var(b) / b.size
    se2 = va + vb
    if se2 == 0.0:
        raise ZeroVariance("both samples are constant")
    t = float((np.mean(a) - np.mean(b)) / math.sqrt(se2))
    df = float(se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1)))
    return TestResult(statistic=t, p_value=student_t_sf2(t, df), df=df, method="t_test_welch")


def t_test_one_sample(x, mu: float = 0.0) -> TestResult:
    x = _as_vector(x)
    if x.size < 2:
        raise TooFewObservations("need at least two observations")
    sd = math.sqrt(_var(x))
    if sd == 0.0:
        raise ZeroVariance("sample is constant")
    t = float((np.mean(x) - mu) / (sd / math.sqrt(x.size)))
    df = float(x.size - 1)
    return TestResult(statistic=t, p_value=student_t_sf2(t, df), df=df, method="t_test_one_sample")


def t_test_paired(a, b) -> TestResult:
    a = _as_vector(a)
    b = _as_vector(b)
    if a.size != b.size:
        raise LengthMismatch(f"paired samples differ in length: {a.size} vs {b.size}")
    res = t_test_one_sample(a - b)
    return TestResult(statistic=res.statistic, p_value=res.p_value, df=res.df, method="t_test_paired")


def midranks(x) -> np.ndarray:
    """1-based ranks with ties replaced by their average rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size, dtype=float)
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_x[1:] != sorted_x[:-1]])
    ends = np.r_[starts[1:], x.size]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    return ranks


def spearman(a, b) -> float:
    a = _as_vector(a)
    b = _as_vector(b)
    if a.size != b.size:
        raise LengthMismatch(f"samples differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise TooFewObservations("need at least two pairs")
    ra = midranks(a)
    rb = midranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(np.dot(ra, ra)) * float(np.dot(rb, rb)))
    if denom == 0.0:
        raise ConstantInput("spearman correlation is undefined for constant input")
    return max(-1.0, min(1.0, float(np.dot(ra, rb)) / denom))
