import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from multexp.constructions import (
    ContinuedFraction,
    auto_depth,
    build_prescribed,
    ceil_power,
    cf_expand,
    cf_of_real,
    measured_sigma,
)
from multexp.numerics import PrecisionError, golden_ratio
from multexp.witnesses import estimate_sigma


def euclid(x: Fraction):
    out = []
    num, den = x.numerator, x.denominator
    while den:
        out.append(num // den)
        num, den = den, num % den
    return out


@pytest.mark.parametrize("x, want", [(Fraction(415, 93), (4, 2, 6, 7)),
                                     (Fraction(1, 2), (0, 2)), (Fraction(5), (5,))])
def test_cf_expand_examples(x, want):
    assert cf_expand(x).quotients == want


@given(st.fractions(min_value=0, max_value=1000, max_denominator=10**6))
def test_cf_expand_roundtrip(x):
    cf = cf_expand(x)
    assert cf.value() == x
    raw = euclid(x)
    # canonical form differs from the raw Euclidean list only in a trailing 1
    if len(raw) > 1 and raw[-1] == 1:
        raw = raw[:-2] + [raw[-2] + 1]
    assert list(cf.quotients) == raw


@given(st.lists(st.integers(1, 50), min_size=1, max_size=12), st.integers(0, 20))
def test_convergent_recurrence(tail, a0):
    cf = ContinuedFraction((a0,) + tuple(tail))
    conv = cf.convergents
    for k in range(2, len(conv)):
        a = cf.quotients[k]
        assert conv[k][0] == a * conv[k - 1][0] + conv[k - 2][0]
        assert conv[k][1] == a * conv[k - 1][1] + conv[k - 2][1]
    dens = cf.denominators()
    assert all(b > a for a, b in zip(dens[1:], dens[2:]))


@given(st.integers(1, 10**6), st.fractions(min_value=0, max_value=5, max_denominator=7))
def test_ceil_power_matches_real_power(q, e):
    c = ceil_power(q, e)
    # exact check: (c-1)^den < q^num <= c^den
    num, den = e.numerator, e.denominator
    assert c ** den >= q ** num
    assert c == 1 or (c - 1) ** den < q ** num


def test_tau_one_is_golden_pattern():
    num = build_prescribed(1, 8)
    assert set(num.cf.quotients) == {1}
    assert [Fraction(p, q) for p, q in num.cf.convergents[:5]] == \
        [1, 2, Fraction(3, 2), Fraction(5, 3), Fraction(8, 5)]


def test_tau_two_errors_within_factor_ten():
    num = build_prescribed(2, 10)
    errs = num.convergent_errors()
    for k, ((_, q), e) in enumerate(zip(num.cf.convergents, errs)):
        if k < 4:
            continue
        ratio = float(e.log_magnitude) + 2 * math.log(q)
        assert abs(ratio) < math.log(10)


def test_error_below_next_denominator_inverse():
    for tau in (1, 2, 3, Fraction(5, 2)):
        num = build_prescribed(tau, 8)
        errs = num.convergent_errors()
        dens = num.cf.denominators()
        bits = num.value.mantissa_bits
        with mpmath.workprec(bits):
            for k in range(len(dens) - 1):
                assert errs[k].to_mpf(bits) * dens[k + 1] < 1


def test_tau_three_sigma_search_matches():
    num = build_prescribed(3, 8)
    q8 = num.cf.denominators()[8]
    est = estimate_sigma([num.value], q8)
    assert 2.6 <= est.window_estimate <= 3.4


@pytest.mark.parametrize("tau, depth", [(1, 40), (2, 8), (3, 8), (2, 10), (3, 9)])
def test_measured_sigma_tracks_tau(tau, depth):
    assert abs(measured_sigma(build_prescribed(tau, depth)) - tau) <= 0.4


def test_measured_sigma_examples():
    assert 0.9 <= measured_sigma(build_prescribed(1, 40)) <= 1.1
    assert 2.6 <= measured_sigma(build_prescribed(3, 8)) <= 3.4
    assert measured_sigma(cf_expand(Fraction(415, 93))) == math.inf


def test_precision_shortfall_and_bad_input():
    with pytest.raises(PrecisionError):
        build_prescribed(3, 9, max_bits=512)
    with pytest.raises(ValueError):
        build_prescribed(3, 4)
    with pytest.raises(ValueError):
        build_prescribed(Fraction(1, 2), 8)
    with pytest.raises(ValueError):
        build_prescribed(3, 12)  # q_depth beyond 2^4096


def test_value_resolves_last_error():
    num = build_prescribed(3, 8)
    p, q = num.cf.convergents[-1]
    bits = num.value.mantissa_bits
    with mpmath.workprec(bits):
        err = abs(q * num.value.value - p)
    # the exact continued-fraction tail bounds the true error
    q_next = build_prescribed(3, 9, max_bits=1 << 20).cf.denominators()[-1]
    with mpmath.workprec(bits):
        assert 0.5 < err * q_next < 1


def test_cf_of_real_golden_ratio_is_all_ones():
    cf = cf_of_real(golden_ratio(256))
    assert set(cf.quotients) == {1}
    assert len(cf.quotients) > 100
    assert cf_of_real(golden_ratio(256), q_bound=100).denominators()[-1] <= 100


def test_auto_depth_reaches_target():
    assert auto_depth(3) == 8
    assert auto_depth(2) == 9
