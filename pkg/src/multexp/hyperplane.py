"""Exponents of affine hyperplanes L = {(a_1 x_1 + ... + a_{n-1} x_{n-1} + a_n, x_1, ..., x_{n-1})}.

The closed forms are

    omega_times(L) = max(n, (n / s) sigma(a)),    omega(L) = max(n, sigma(a)),

with s = 1 + #{i < n : a_i != 0}.  Sampling checks draw points on L (or on
a polynomial submanifold of L) and run the witness search on each.
"""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .constructions import PrescribedNumber, auto_depth, build_prescribed
from .numerics import DEFAULT_BITS, PrecisionReal, format_real, golden_ratio, parse_real, to_mpf
from .polynomials import PolynomialMap, evaluate_precise
from .witnesses import estimate_omega_times, estimate_sigma

INF = math.inf
SAMPLE_BITS = 256
RATIONAL_GUARD_Q = 100
RATIONAL_GUARD_EPS = 1e-6


@dataclass(frozen=True)
class Coefficient:
    """One entry of a together with what is known about its approximability."""

    value: object               # Fraction or PrecisionReal
    spec: str
    sigma: object = None        # known sigma of this scalar, or None
    prescribed: PrescribedNumber | None = None

    @property
    def rational(self) -> bool:
        return isinstance(self.value, (int, Fraction))


def parse_coefficient(text: str, bits: int = DEFAULT_BITS) -> Coefficient:
    """Mini-grammar: decimal, ``p/q``, ``phi``, ``sqrt:k`` or ``tau:R``."""
    s = text.strip()
    low = s.lower()
    if low.startswith("tau:"):
        try:
            tau = Fraction(low[4:])
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad tau in {text!r}") from exc
        num = build_prescribed(tau, auto_depth(tau))
        return Coefficient(num.value, s, tau, num)
    value = parse_real(s, bits)
    if isinstance(value, Fraction):
        return Coefficient(value, s, INF)
    if low == "phi":
        return Coefficient(value, s, Fraction(1))
    if low.startswith("sqrt:"):
        k = Fraction(low[5:])
        # quadratic irrationals are badly approximable
        return Coefficient(value, s, Fraction(1))
    return Coefficient(value, s, None)


@dataclass(frozen=True)
class HyperplaneSpec:
    n: int
    a: tuple[Coefficient, ...]
    sigma: object
    sigma_source: str

    @property
    def s(self) -> int:
        return 1 + sum(1 for c in self.a[:-1] if c.value != 0)

    @property
    def values(self) -> tuple:
        return tuple(c.value for c in self.a)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "a": [c.spec for c in self.a],
            "s": self.s,
            "sigma": _num(self.sigma),
            "sigma_source": self.sigma_source,
        }


def _num(v):
    if v is None:
        return None
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def vector_sigma(coeffs: Sequence[Coefficient], q_max: int = 10 ** 5):
    """sigma(a) with its provenance.

    Rational entries cost nothing, so when at most one entry is irrational
    sigma(a) is that entry's scalar sigma; all-rational vectors give
    infinity.  Anything else is estimated by the simultaneous search.
    """
    irr = [c for c in coeffs if not c.rational]
    if not irr:
        return INF, "rational"
    if len(irr) == 1 and irr[0].sigma is not None:
        return irr[0].sigma, "constructed" if irr[0].prescribed is not None else "known"
    est = estimate_sigma([c.value for c in coeffs], q_max)
    return est.window_estimate, f"estimated(q_max={q_max})"


def make_spec(a: Sequence, sigma=None, sigma_q_max: int = 10 ** 5) -> HyperplaneSpec:
    coeffs = tuple(c if isinstance(c, Coefficient) else _wrap(c) for c in a)
    n = len(coeffs)
    if n < 2:
        raise ValueError("a hyperplane in R^n needs n >= 2")
    if sigma is None:
        sigma, source = vector_sigma(coeffs, sigma_q_max)
    else:
        source = "given"
    return HyperplaneSpec(n, coeffs, sigma, source)


def _wrap(c) -> Coefficient:
    if isinstance(c, str):
        return parse_coefficient(c)
    if isinstance(c, PrescribedNumber):
        return Coefficient(c.value, f"tau:{c.target_tau}", c.target_tau, c)
    if isinstance(c, (int, Fraction)):
        return Coefficient(Fraction(c), str(c), INF)
    if isinstance(c, float):
        return Coefficient(Fraction(c), repr(c), INF)
    return Coefficient(c, format_real(c)["decimal"], None)


def parse_spec(text: str, sigma_q_max: int = 10 ** 5) -> HyperplaneSpec:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty coefficient list")
    return make_spec([parse_coefficient(p) for p in parts], sigma_q_max=sigma_q_max)


# ---------------------------------------------------------------------------
# predictions


@dataclass(frozen=True)
class Prediction:
    omega_times_L: object
    omega_L: object
    s: int
    sigma: object
    open_question: bool = False   # s < n but the two maxima coincide

    def to_json(self) -> dict:
        return {"omega_times_L": _num(self.omega_times_L), "omega_L": _num(self.omega_L),
                "s": self.s, "sigma": _num(self.sigma), "open_question_flag": self.open_question}


def _max(a, b):
    if a == INF or b == INF:
        return INF
    return a if a >= b else b


def predict(spec: HyperplaneSpec) -> Prediction:
    n, s, sigma = spec.n, spec.s, spec.sigma
    if sigma is None:
        raise ValueError("sigma(a) is not available")
    if sigma == INF:
        return Prediction(INF, INF, s, sigma)
    sig = Fraction(sigma) if isinstance(sigma, (int, Fraction)) else sigma
    ot = _max(Fraction(n), Fraction(n, s) * sig if isinstance(sig, Fraction) else n / s * sig)
    om = _max(Fraction(n), sig)
    return Prediction(ot, om, s, sigma, open_question=(s < n and ot == om))


def special_case_predict(n: int, sigma):
    """omega_times of {(x_1, ..., x_{n-1}, a)} is n sigma(a)."""
    if sigma == INF:
        return INF
    if isinstance(sigma, (int, Fraction)):
        return n * Fraction(sigma)
    return n * sigma


def embed_point(spec: HyperplaneSpec | Sequence, x: Sequence, bits: int = SAMPLE_BITS) -> tuple:
    """(a_1 x_1 + ... + a_{n-1} x_{n-1} + a_n, x_1, ..., x_{n-1})."""
    a = spec.values if isinstance(spec, HyperplaneSpec) else tuple(spec)
    if len(x) != len(a) - 1:
        raise ValueError(f"expected {len(a) - 1} coordinates, got {len(x)}")
    vals = list(a[:-1])
    if all(isinstance(v, (int, Fraction)) for v in list(a) + list(x)):
        head = sum((Fraction(ai) * Fraction(xi) for ai, xi in zip(vals, x)), Fraction(a[-1]))
        return (head,) + tuple(Fraction(v) for v in x)
    with mpmath.workprec(bits):
        head = mpmath.fsum([to_mpf(ai, bits) * to_mpf(xi, bits) for ai, xi in zip(vals, x)]
                           + [to_mpf(a[-1], bits)])
        return (PrecisionReal(head, bits),) + tuple(
            v if isinstance(v, (Fraction, PrecisionReal)) else PrecisionReal(to_mpf(v, bits), bits)
            for v in x)


# ---------------------------------------------------------------------------
# sampling


def _near_rational(v: float) -> bool:
    for q in range(1, RATIONAL_GUARD_Q + 1):
        if abs(q * v - round(q * v)) < RATIONAL_GUARD_EPS * q:
            return True
    return False


def draw_parameters(count: int, dim: int, seed: int, bits: int = SAMPLE_BITS) -> list[tuple]:
    """Uniform points of [0,1]^dim at ``bits`` of mantissa, resampling
    coordinates that sit within 1e-6 of a rational with denominator <= 100."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        pt = []
        for _ in range(dim):
            while True:
                m = rng.getrandbits(bits)
                v = m / (1 << bits)
                if not _near_rational(v):
                    break
            with mpmath.workprec(bits):
                pt.append(PrecisionReal(mpmath.ldexp(mpmath.mpf(m), -bits), bits))
        out.append(tuple(pt))
    return out


@dataclass(frozen=True)
class SampleResult:
    index: int
    point: tuple
    omega_times_estimate: object
    raw_max: object
    exact_hit: bool
    prediction: object
    within_tolerance: bool
    exhaustive: bool

    def row(self) -> dict:
        return {
            "sample_index": self.index,
            "point": ";".join(_point_str(v) for v in self.point),
            "omega_times_estimate": _num(self.omega_times_estimate),
            "prediction": _num(self.prediction),
            "within_tolerance": self.within_tolerance,
        }


def _point_str(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return v.to_decimal(20) if isinstance(v, PrecisionReal) else repr(v)


@dataclass(frozen=True)
class VerificationReport:
    spec: HyperplaneSpec
    prediction: object
    band: tuple
    q_max: int
    height_cap: int | None
    submanifold: str | None
    seed: int
    samples: tuple[SampleResult, ...] = field(default=())

    @property
    def all_within(self) -> bool:
        return all(s.within_tolerance for s in self.samples)

    @property
    def flagged(self) -> list[int]:
        """Samples above the prediction band."""
        hi = self.band[1]
        return [s.index for s in self.samples
                if s.omega_times_estimate is not None and s.omega_times_estimate > hi]

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "prediction": _num(self.prediction),
            "band": [_num(self.band[0]), _num(self.band[1])],
            "q_max": self.q_max,
            "height_cap": self.height_cap,
            "submanifold": self.submanifold,
            "seed": self.seed,
            "all_within": self.all_within,
            "flagged_above": self.flagged,
            "samples": [dict(s.row(), raw_max=_num(s.raw_max), exact_hit=s.exact_hit,
                             exhaustive=s.exhaustive) for s in self.samples],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["sample_index", "point", "omega_times_estimate", "prediction",
                                 "within_tolerance"], lineterminator="\n")
        w.writeheader()
        for s in self.samples:
            w.writerow(s.row())
        return buf.getvalue()


def verify_by_sampling(spec: HyperplaneSpec, samples: int, q_max: int,
                       submanifold: PolynomialMap | None = None, seed: int = 0,
                       prediction=None, tolerance: float = 0.5, band: tuple | None = None,
                       height_cap: int | None = None) -> VerificationReport:
    """Sample points of L (or of the image of ``submanifold`` inside L) and
    estimate omega_times at each.

    ``height_cap`` defaults to ``q_max``.  ``prediction`` defaults to the
    hyperplane formula; ``band`` to prediction +- tolerance.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if prediction is None:
        prediction = predict(spec).omega_times_L
    cap = q_max if height_cap is None else height_cap
    if band is None:
        band = (INF, INF) if prediction == INF else (float(prediction) - tolerance,
                                                      float(prediction) + tolerance)
    if submanifold is not None and submanifold.dim != spec.n - 1:
        raise ValueError(f"submanifold must map into R^{spec.n - 1}")
    pdim = submanifold.nvars if submanifold is not None else spec.n - 1
    params = draw_parameters(samples, pdim, seed)
    results = []
    for i, u in enumerate(params):
        x = u if submanifold is None else tuple(
            evaluate_precise(p, u, SAMPLE_BITS) for p in submanifold.components)
        y = embed_point(spec, x)
        est = estimate_omega_times(y, q_max, height_cap=cap)
        val = est.window_estimate
        if prediction == INF:
            ok = bool(est.exact_hit)
        else:
            ok = val is not None and band[0] <= val <= band[1]
        results.append(SampleResult(i, y, val, est.raw_max, bool(est.exact_hit), prediction, ok,
                                    bool(est.exhaustive)))
    return VerificationReport(spec, prediction, band, q_max, cap,
                              submanifold.text() if submanifold is not None else None, seed,
                              tuple(results))
