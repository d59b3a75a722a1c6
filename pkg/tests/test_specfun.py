import math

import mpmath as mp
import numpy as np
import pytest

from bingham_closure.extreal import ExtReal, ext_dot, ext_sum, two_prod, two_sum
from bingham_closure.specfun import (
    SUPPORTED_HYP1F1,
    bessel_i_scaled,
    bessel_i_scaled_all,
    bessel_i_scaled_array,
    hyp1f1,
    hyp1f1_scaled,
    kummer_scaled_array,
    kummer_scaled_array_multi,
)

mp.mp.dps = 40


def rel(a, b):
    return abs(float(a) - float(b)) / abs(float(b))


# -- double-double helpers ---------------------------------------------------------

def test_two_sum_and_two_prod_are_exact():
    a, b = 1.0, 1e-17
    s, e = two_sum(a, b)
    assert mp.mpf(s) + mp.mpf(e) == mp.mpf(a) + mp.mpf(b)
    x, y = 1.0 + 2**-30, 1.0 - 2**-29
    p, e = two_prod(x, y)
    assert mp.mpf(p) + mp.mpf(e) == mp.mpf(x) * mp.mpf(y)


def test_ext_sum_recovers_cancelled_digits():
    vals = [1e16, 1.0, -1e16, 1e-3]
    assert float(ext_sum(vals)) == 1.001
    assert ext_dot([1e16, 1.0, -1e16], [1.0, 1.0, 1.0]) == 1.0


def test_extreal_division_and_sqrt():
    third = ExtReal(1.0) / 3.0
    assert abs(mp.mpf(third.hi) + mp.mpf(third.lo) - mp.mpf(1) / 3) < mp.mpf(1e-31)
    r = ExtReal(2.0).sqrt()
    assert abs(mp.mpf(r.hi) + mp.mpf(r.lo) - mp.sqrt(2)) < mp.mpf(1e-31)


# -- Bessel --------------------------------------------------------------------------

def test_bessel_trivial_values():
    assert bessel_i_scaled(0, 0.0) == 1.0
    assert bessel_i_scaled(1, 0.0) == 0.0
    assert bessel_i_scaled(2, 0.0) == 0.0


def test_bessel_ratio_at_one():
    assert abs(bessel_i_scaled(1, 1.0) / bessel_i_scaled(0, 1.0) - 0.4463899659) < 1e-10


@pytest.mark.parametrize("lam", [1e-8, 0.3, 1.0, 7.5, 24.9, 25.1, 60.0, 300.0, 1e4, 1e6])
@pytest.mark.parametrize("p", [0, 1, 2])
def test_bessel_against_mpmath(p, lam):
    ref = mp.besseli(p, lam) * mp.exp(-lam)
    assert rel(bessel_i_scaled(p, lam), ref) <= 4 * np.finfo(float).eps


def test_bessel_array_matches_scalar():
    lam = np.concatenate([[0.0], np.geomspace(1e-3, 1e5, 200)])
    for p in (0, 1, 2):
        ref = np.array([bessel_i_scaled(p, x) for x in lam])
        np.testing.assert_allclose(bessel_i_scaled_array(p, lam), ref, rtol=1e-14, atol=0)


def test_bessel_ordering_and_monotonicity():
    lam = np.linspace(0.01, 200, 500)
    i0, i1, i2 = (bessel_i_scaled_array(p, lam) for p in (0, 1, 2))
    assert np.all(i0 > i1) and np.all(i1 > i2) and np.all(i2 > 0)
    assert np.all(np.diff(i0) < 0)


@pytest.mark.parametrize("lam", [0.5, 3.0, 30.0, 900.0])
def test_bessel_recurrence(lam):
    i0, i1, i2 = (float(v) for v in bessel_i_scaled_all(lam))
    assert abs((i0 - i2) - 2.0 / lam * i1) <= 1e-13 * i0


@pytest.mark.parametrize("p,lam", [(3, 1.0), (0, -1.0), (1, math.inf)])
def test_bessel_rejects_bad_input(p, lam):
    with pytest.raises(ValueError):
        bessel_i_scaled(p, lam)


# -- confluent hypergeometric ---------------------------------------------------------

def test_hyp1f1_at_zero_is_one():
    assert hyp1f1(0.5, 1.5, 0.0) == 1.0


def test_hyp1f1_erf_identity():
    ref = math.sqrt(math.pi) * math.erf(1.0) / 2.0
    assert rel(hyp1f1(0.5, 1.5, -1.0), ref) < 1e-15


def test_hyp1f1_matches_integral_representation():
    # 1F1(a;b;z) = Gamma(b)/(Gamma(a)Gamma(b-a)) int_0^1 e^{zt} t^{a-1} (1-t)^{b-a-1} dt
    a, b, z = 3.0, 3.5, -50.0
    c = mp.gamma(b) / (mp.gamma(a) * mp.gamma(b - a))
    ref = c * mp.quad(lambda t: mp.exp(z * t) * t ** (a - 1) * (1 - t) ** (b - a - 1), [0, 0.5, 1])
    val = hyp1f1(a, b, z)
    assert val > 0
    assert rel(val, ref) < 1e-13


@pytest.mark.parametrize("ab", SUPPORTED_HYP1F1)
@pytest.mark.parametrize("z", [-1e5, -2000.0, -61.0, -59.0, -10.0, -0.1, 0.2, 5.0, 59.0, 61.0, 400.0])
def test_hyp1f1_against_mpmath(ab, z):
    a, b = ab
    ref = mp.hyp1f1(a, b, z)
    if z > 0:
        assert rel(hyp1f1_scaled(a, b, z), ref * mp.exp(-z)) < 1e-14
    if z < 700:
        assert rel(hyp1f1(a, b, z), ref) < 1e-14


def test_hyp1f1_positive_and_increasing():
    z = np.linspace(-300, 50, 200)
    for a, b in SUPPORTED_HYP1F1:
        v = np.array([hyp1f1(a, b, t) for t in z])
        assert np.all(v > 0) and np.all(np.diff(v) > 0)


def test_hyp1f1_overflow_and_bad_params():
    with pytest.raises(OverflowError):
        hyp1f1(1.0, 1.5, 1000.0)
    with pytest.raises(ValueError):
        hyp1f1(2.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        hyp1f1(0.5, 1.5, math.nan)


def test_kummer_arrays_match_mpmath():
    x = np.concatenate([[0.0], np.geomspace(1e-3, 2e5, 120)])
    for a, bs in ((1.0, (1.5, 2.5, 3.5)), (0.5, (1.5,))):
        multi = kummer_scaled_array_multi(a, bs, x)
        for b, got in zip(bs, multi):
            ref = np.array([float(mp.hyp1f1(a, b, t) * mp.exp(-t)) for t in x])
            np.testing.assert_allclose(got, ref, rtol=1e-13, atol=0)
            np.testing.assert_allclose(kummer_scaled_array(a, b, x), ref, rtol=1e-13, atol=0)
