import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from multexp.constructions import build_prescribed, measured_sigma
from multexp.hyperplane import (
    Prediction,
    draw_parameters,
    embed_point,
    make_spec,
    parse_coefficient,
    parse_spec,
    predict,
    special_case_predict,
    verify_by_sampling,
)
from multexp.numerics import golden_ratio
from multexp.witnesses import estimate_sigma


def test_predict_examples():
    p = predict(parse_spec("0,tau:3"))
    assert (p.omega_times_L, p.omega_L, p.s) == (6, 3, 1)
    p = predict(parse_spec("1,0"))
    assert p.omega_times_L == math.inf and p.omega_L == math.inf
    assert parse_spec("1,0,2,5").s == 3


def test_special_case_examples():
    assert special_case_predict(2, parse_coefficient("phi").sigma) == 2
    assert special_case_predict(3, 3) == 9
    assert special_case_predict(3, parse_coefficient("2/7").sigma) == math.inf


def test_embed_point_examples():
    spec = parse_spec("0,2/3")
    assert embed_point(spec, (Fraction(7, 10),)) == (Fraction(2, 3), Fraction(7, 10))
    assert embed_point(parse_spec("1,0"), (Fraction(3, 10),)) == (Fraction(3, 10), Fraction(3, 10))
    assert embed_point(parse_spec("1,2,5"), (0, 0)) == (5, 0, 0)


coeff = st.one_of(st.just(Fraction(0)), st.fractions(min_value=-9, max_value=9, max_denominator=9))


@given(st.lists(coeff, min_size=1, max_size=5), st.one_of(st.integers(1, 12).map(Fraction),
                                                          st.just(math.inf)))
def test_formula_order(head, sigma):
    spec = make_spec(list(head) + [golden_ratio()], sigma=sigma)
    p = predict(spec)
    assert p.omega_times_L >= p.omega_L >= spec.n


@given(st.lists(coeff, min_size=1, max_size=5), coeff, coeff)
def test_s_ignores_last_coefficient(head, last1, last2):
    s1 = make_spec(list(head) + [last1], sigma=2).s
    s2 = make_spec(list(head) + [last2], sigma=2).s
    assert s1 == s2 and 1 <= s1 <= len(head) + 1


@given(st.integers(2, 6), st.fractions(min_value=1, max_value=20, max_denominator=20))
def test_full_support_forms_agree(n, sigma):
    spec = make_spec([1] * (n - 1) + [0], sigma=sigma)
    assert spec.s == n
    p = predict(spec)
    assert p.omega_times_L == p.omega_L == max(n, sigma)


def test_open_question_flag():
    p = predict(make_spec([0, golden_ratio()], sigma=1))
    assert p.open_question and p.omega_times_L == p.omega_L == 2
    assert not predict(parse_spec("0,tau:3")).open_question


def test_sigma_source_rules():
    spec = parse_spec("0,tau:3")
    assert spec.sigma == 3 and spec.sigma_source == "constructed"
    assert parse_spec("1,phi").sigma == 1
    assert parse_spec("1,2").sigma == math.inf
    spec = make_spec(["sqrt:2", "sqrt:3"], sigma=None, sigma_q_max=2000)
    assert spec.sigma_source.startswith("estimated")


def test_scalar_sigma_agrees_with_search():
    num = build_prescribed(3, 8)
    est = estimate_sigma((0, num.value), num.cf.denominators()[8])
    assert abs(est.window_estimate - 3) < 0.4


def test_draw_avoids_small_rationals():
    for (x,) in draw_parameters(200, 1, 3):
        v = float(x)
        assert 0 <= v <= 1
        assert all(abs(q * v - round(q * v)) >= 1e-6 * q for q in range(1, 101))
    assert draw_parameters(5, 2, 8) == draw_parameters(5, 2, 8)


def test_sampling_prescribed_hyperplane():
    spec = parse_spec("0,tau:3")
    rep = verify_by_sampling(spec, 10, 10**5, seed=3, band=(5.5, 6.5))
    assert rep.all_within and rep.flagged == []
    sig = measured_sigma(spec.a[1].prescribed)
    assert all(s.omega_times_estimate >= 2 * sig - 0.3 for s in rep.samples)


def test_sampling_rational_hyperplane_hits_exactly():
    rep = verify_by_sampling(parse_spec("1,0"), 10, 50, seed=1)
    assert rep.all_within and all(s.exact_hit for s in rep.samples)


def test_sampling_csv_and_determinism():
    spec = parse_spec("0,tau:3")
    a = verify_by_sampling(spec, 3, 2000, seed=5)
    b = verify_by_sampling(spec, 3, 2000, seed=5)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == \
        "sample_index,point,omega_times_estimate,prediction,within_tolerance"


def test_bad_specs():
    with pytest.raises(ValueError):
        parse_spec("")
    with pytest.raises(ValueError):
        parse_spec("1")
    with pytest.raises(ValueError):
        parse_coefficient("tau:x")
