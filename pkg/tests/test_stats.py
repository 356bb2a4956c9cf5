import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as sps

from rpid import stats

# frozen values computed once with scipy 1.15 and by hand
WELCH_P = 0.2878641347266908
PAIRED_P = 0.07417990022744853
SPEARMAN_TIED = 4.5 / math.sqrt(22.5)


def brute_binom_p(k, n, p0: Fraction) -> Fraction:
    probs = [math.comb(n, x) * p0**x * (1 - p0) ** (n - x) for x in range(n + 1)]
    return sum(q for q in probs if q <= probs[k])


def brute_ks_d(a, b):
    d = 0.0
    for t in list(a) + list(b):
        fa = sum(1 for v in a if v <= t) / len(a)
        fb = sum(1 for v in b if v <= t) / len(b)
        d = max(d, abs(fa - fb))
    return d


# -- special functions -------------------------------------------------------


@pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 3.0, 0.7), (10.0, 0.5, 0.99), (50.0, 40.0, 0.55), (1.0, 1.0, 0.0)])
def test_betainc_matches_scipy(a, b, x):
    from scipy.special import betainc as ref

    assert stats.betainc(a, b, x) == pytest.approx(ref(a, b, x), abs=1e-10)


@pytest.mark.parametrize("t,df", [(0.0, 3), (1.2, 4), (-2.5, 7.3), (4.0, 100), (30.0, 2)])
def test_student_t_matches_scipy(t, df):
    assert stats.student_t_cdf(t, df) == pytest.approx(sps.t.cdf(t, df), abs=1e-10)
    assert stats.student_t_sf2(t, df) == pytest.approx(2 * sps.t.sf(abs(t), df), abs=1e-10)


@pytest.mark.parametrize("lam", [0.2, 0.5, 1.0, 1.17, 1.19, 1.5, 3.0])
def test_kolmogorov_sf_matches_scipy(lam):
    assert stats.kolmogorov_sf(lam) == pytest.approx(sps.kstwobign.sf(lam), abs=1e-10)


def test_normal_cdf():
    assert stats.normal_cdf(1.96) == pytest.approx(sps.norm.cdf(1.96), abs=1e-12)


# -- KS ----------------------------------------------------------------------


def test_ks_identical():
    r = stats.ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert r.statistic == 0.0 and r.p_value == 1.0


def test_ks_disjoint():
    assert stats.ks_two_sample([0, 1], [2, 3]).statistic == 1.0


def test_ks_shifted_fixture():
    assert stats.ks_two_sample([1, 2, 3, 4], [1.5, 2.5, 3.5, 4.5]).statistic == pytest.approx(0.25)


def test_ks_matches_brute_force_sweep():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n, m = rng.integers(2, 201, size=2)
        a = np.round(rng.normal(size=n), 1)  # rounding forces ties
        b = np.round(rng.normal(0.3, 1.2, size=m), 1)
        assert stats.ks_two_sample(a, b).statistic == pytest.approx(brute_ks_d(a, b), abs=1e-15)


def test_ks_p_value_matches_scipy_asymptotic():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=300), rng.normal(0.15, 1, size=500)
    ref = sps.ks_2samp(a, b, method="asymp")
    r = stats.ks_two_sample(a, b)
    assert r.statistic == pytest.approx(ref.statistic)
    # scipy's asymptotic branch uses a slightly different effective n; compare via the limit law
    en = 300 * 500 / 800
    assert r.p_value == pytest.approx(sps.kstwobign.sf(math.sqrt(en) * r.statistic), abs=1e-10)


def test_ks_symmetric():
    rng = np.random.default_rng(4)
    a, b = rng.normal(size=30), rng.normal(size=40)
    assert stats.ks_two_sample(a, b) == stats.ks_two_sample(b, a)


def test_ks_too_few():
    with pytest.raises(stats.TooFewObservations):
        stats.ks_two_sample([1.0], [1.0, 2.0])


# -- binomial ----------------------------------------------------------------


def test_binom_fixtures():
    assert stats.binom_test(5, 10, 0.5).p_value == pytest.approx(1.0)
    assert stats.binom_test(0, 10, 0.5).p_value == pytest.approx(2 / 1024, rel=1e-12)
    assert stats.binom_test(10, 10, 1.0).p_value == 1.0
    assert stats.binom_test(3, 10, 1.0).p_value == 0.0


@pytest.mark.parametrize("n,p0", [(1, Fraction(1, 2)), (7, Fraction(1, 3)), (20, Fraction(1, 2)), (60, Fraction(31, 100)), (250, Fraction(7, 10)), (1000, Fraction(1, 2)), (1000, Fraction(3, 10))])
def test_binom_matches_enumeration(n, p0):
    ks = sorted({0, n, n // 2, int(n * p0), max(0, int(n * p0) - 3 * int(math.sqrt(n) + 1)), min(n, int(n * p0) + 2)})
    for k in ks:
        expected = float(brute_binom_p(k, n, p0))
        got = stats.binom_test(k, n, float(p0)).p_value
        assert got == pytest.approx(min(1.0, expected), rel=1e-9, abs=1e-300)


def test_binom_matches_scipy():
    for k, n, p in [(3, 17, 0.4), (60, 100, 0.5), (2, 400, 0.02), (155, 480, 0.31)]:
        assert stats.binom_test(k, n, p).p_value == pytest.approx(sps.binomtest(k, n, p).pvalue, rel=1e-9)


@pytest.mark.parametrize("args", [(-1, 5, 0.5), (6, 5, 0.5), (1, 5, 1.5)])
def test_binom_invalid(args):
    with pytest.raises(stats.InvalidArgs):
        stats.binom_test(*args)


# -- t tests -----------------------------------------------------------------


def test_welch_fixture():
    r = stats.t_test_welch([1, 2, 3], [2, 3, 4])
    assert r.statistic == pytest.approx(-math.sqrt(1.5), abs=1e-12)
    assert r.df == pytest.approx(4.0, abs=1e-12)
    assert r.p_value == pytest.approx(WELCH_P, abs=1e-9)


def test_welch_identical_and_degenerate():
    r = stats.t_test_welch([1, 5, 2], [1, 5, 2])
    assert r.statistic == 0.0 and r.p_value == pytest.approx(1.0)
    with pytest.raises(stats.ZeroVariance):
        stats.t_test_welch([1, 1, 1], [1, 1, 1])


def test_welch_matches_scipy_and_symmetry():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=25), rng.normal(0.4, 2.0, size=60)
    ref = sps.ttest_ind(a, b, equal_var=False)
    r = stats.t_test_welch(a, b)
    assert r.statistic == pytest.approx(ref.statistic, abs=1e-10)
    assert r.p_value == pytest.approx(ref.pvalue, abs=1e-10)
    rr = stats.t_test_welch(b, a)
    assert rr.statistic == pytest.approx(-r.statistic) and rr.p_value == pytest.approx(r.p_value)


def test_paired_fixtures():
    r = stats.t_test_paired([1, 2, 3], [0, 2, 4])
    assert r.statistic == 0.0 and r.p_value == pytest.approx(1.0)
    r = stats.t_test_paired([2, 3, 4], [1, 1, 1])
    assert r.statistic == pytest.approx(2 * math.sqrt(3), abs=1e-12)
    assert r.df == 2
    assert r.p_value == pytest.approx(PAIRED_P, abs=1e-9)


def test_paired_errors():
    with pytest.raises(stats.ZeroVariance):
        stats.t_test_paired([1, 2, 3], [1, 2, 3])
    with pytest.raises(stats.LengthMismatch):
        stats.t_test_paired([1, 2, 3], [1, 2])


# -- spearman ----------------------------------------------------------------


def test_spearman_fixtures():
    a = [3.0, 1.0, 4.0, 1.5, 9.0]
    assert stats.spearman(a, a) == pytest.approx(1.0)
    assert stats.spearman(a, [-v for v in a]) == pytest.approx(-1.0)
    assert stats.spearman([1, 2, 2, 4], [10, 20, 30, 40]) == pytest.approx(SPEARMAN_TIED, abs=1e-12)


def test_spearman_matches_scipy_with_ties():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a = rng.integers(0, 6, size=40)
        b = a + rng.integers(0, 4, size=40)
        assert stats.spearman(a, b) == pytest.approx(sps.spearmanr(a, b)[0], abs=1e-12)


def test_spearman_monotone_invariance():
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=50), rng.normal(size=50)
    base = stats.spearman(a, b)
    assert stats.spearman(np.exp(a), b**3) == pytest.approx(base, abs=1e-12)


def test_spearman_errors():
    with pytest.raises(stats.ConstantInput):
        stats.spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(stats.LengthMismatch):
        stats.spearman([1, 2], [1, 2, 3])


def test_midranks():
    np.testing.assert_array_equal(stats.midranks([10, 30, 20, 20]), [1, 4, 2.5, 2.5])


# -- behaviour under the null --------------------------------------------------


def null_rejection_rates(reps=2000, seed=2024):
    rng = np.random.default_rng(seed)
    ks = welch = 0
    for _ in range(reps):
        a, b = rng.normal(size=200), rng.normal(size=200)
        ks += stats.ks_two_sample(a, b).p_value < 0.05
        x, y = rng.normal(size=30), rng.normal(0.0, 2.0, size=45)
        welch += stats.t_test_welch(x, y).p_value < 0.05
    return ks / reps, welch / reps


def test_null_rejection_rates():
    ks, welch = null_rejection_rates()
    assert 0.03 <= ks <= 0.07
    assert 0.03 <= welch <= 0.07
