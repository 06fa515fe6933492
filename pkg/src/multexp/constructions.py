"""Continued fractions and numbers with a prescribed simultaneous exponent.

A number built by :func:`build_prescribed` has partial quotients chosen so
that its convergent denominators satisfy ``q_{k+1} ~ q_k ** tau``; the
convergents are then certified approximations with quality close to
``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .numerics import (
    DEFAULT_BITS,
    LogValue,
    PrecisionError,
    PrecisionReal,
    Real,
    format_real,
    mpf_to_fraction,
)

MAX_Q_BITS = 4096
DEFAULT_MAX_BITS = 1 << 16


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        if not self.quotients:
            raise ValueError("a continued fraction needs at least one quotient")
        if any(a < 1 for a in self.quotients[1:]) or self.quotients[0] < 0:
            raise ValueError("quotients after the first must be positive")
        object.__setattr__(self, "quotients", tuple(int(a) for a in self.quotients))
        object.__setattr__(self, "convergents", tuple(_convergents(self.quotients)))

    @property
    def depth(self) -> int:
        return len(self.quotients) - 1

    def value(self) -> Fraction:
        p, q = self.convergents[-1]
        return Fraction(p, q)

    def denominators(self) -> list[int]:
        return [q for _, q in self.convergents]


def _convergents(quotients):
    p_prev, p = 1, quotients[0]
    q_prev, q = 0, 1
    yield p, q
    for a in quotients[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        yield p, q


def cf_expand(x) -> ContinuedFraction:
    """Euclidean expansion of a nonnegative rational."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("cf_expand expects x >= 0")
    num, den = x.numerator, x.denominator
    quotients = []
    while den:
        a, r = divmod(num, den)
        quotients.append(a)
        num, den = den, r
    # canonical form: last quotient >= 2 unless the expansion is a single term
    if len(quotients) > 1 and quotients[-1] == 1:
        quotients.pop()
        quotients[-1] += 1
    return ContinuedFraction(tuple(quotients))


def cf_of_real(x: Real, q_bound: int | None = None) -> ContinuedFraction:
    """Continued fraction of |x| truncated where it stops being trustworthy.

    For a ``PrecisionReal`` only convergents whose quotient is determined by
    the carried mantissa are kept; for rationals the expansion is exact.  In
    both cases expansion stops once a denominator exceeds ``q_bound``.
    """
    if isinstance(x, PrecisionReal):
        bits = x.mantissa_bits
        exact = abs(mpf_to_fraction(x.value))
        full = cf_expand(exact)
        limit = (1 << (bits - 16)) // (int(exact) + 1)
        keep = 1
        dens = full.denominators()
        for k in range(1, len(dens) - 1):
            if dens[k] * dens[k + 1] >= limit:
                break
            keep = k + 1
        quotients = full.quotients[:keep]
    else:
        quotients = cf_expand(abs(Fraction(x))).quotients
    if q_bound is not None:
        cf = ContinuedFraction(quotients)
        dens = cf.denominators()
        cut = len(dens)
        for k, q in enumerate(dens):
            if q > q_bound:
                cut = k
                break
        quotients = quotients[: max(cut, 1)]
    return ContinuedFraction(tuple(quotients))


# ---------------------------------------------------------------------------
# prescribed exponents


def _iroot_floor(n: int, k: int) -> int:
    if n < 0:
        raise ValueError("negative radicand")
    if n < 2 or k == 1:
        return n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x ** k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def ceil_power(q: int, exponent: Fraction) -> int:
    """ceil(q ** exponent) for a positive integer q and rational exponent >= 0."""
    exponent = Fraction(exponent)
    if exponent < 0:
        raise ValueError("exponent must be nonnegative")
    if q == 1 or exponent == 0:
        return 1
    n = q ** exponent.numerator
    r = _iroot_floor(n, exponent.denominator)
    return r if r ** exponent.denominator == n else r + 1


def _as_fraction(tau) -> Fraction:
    if isinstance(tau, Fraction):
        return tau
    if isinstance(tau, float):
        return Fraction(repr(tau))
    return Fraction(tau)


@dataclass(frozen=True)
class PrescribedNumber:
    target_tau: Fraction
    cf: ContinuedFraction
    value: PrecisionReal
    depth: int

    def convergent_errors(self) -> list[LogValue]:
        """log|q_k * value - p_k| for every stored convergent."""
        bits = self.value.mantissa_bits
        out = []
        with mpmath.workprec(bits):
            for p, q in self.cf.convergents:
                out.append(LogValue.of(PrecisionReal(q * self.value.value - p, bits), bits))
        return out

    def to_json(self) -> dict:
        errs = self.convergent_errors()
        return {
            "tau": str(self.target_tau),
            "depth": self.depth,
            "quotients": [str(a) for a in self.cf.quotients],
            "convergents": [
                {"p": str(p), "q": str(q), "error_log": e.to_json()}
                for (p, q), e in zip(self.cf.convergents, errs)
            ],
            "value_decimal": self.value.to_decimal(60),
            "mantissa_bits": self.value.mantissa_bits,
        }


def _quotient_rule(tau: Fraction, count: int) -> list[int]:
    quotients = [1]
    q_prev, q = 0, 1
    for _ in range(count):
        a = max(1, ceil_power(q, tau - 1))
        quotients.append(a)
        q_prev, q = q, a * q + q_prev
    return quotients


def build_prescribed(tau, depth: int, max_bits: int = DEFAULT_MAX_BITS) -> PrescribedNumber:
    """Number whose partial quotients follow a_{k+1} = max(1, ceil(q_k^(tau-1))).

    The value carries enough mantissa to resolve |q_depth * value - p_depth|
    to better than three significant digits.
    """
    tau = _as_fraction(tau)
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if depth < 5:
        raise ValueError("depth must be >= 5")
    quotients = _quotient_rule(tau, depth)
    cf = ContinuedFraction(tuple(quotients))
    q_depth = cf.convergents[-1][1]
    if q_depth.bit_length() > MAX_Q_BITS:
        raise ValueError(f"q_depth exceeds 2^{MAX_Q_BITS}; lower the depth")

    # extend the tail until truncating it moves the last error by < 2^-20
    tail = list(quotients)
    q_next = ContinuedFraction(tuple(_quotient_rule(tau, depth + 1))).convergents[-1][1]
    target = q_depth * q_next << 20
    while True:
        tail = _quotient_rule(tau, len(tail))
        last_q = ContinuedFraction(tuple(tail)).convergents[-1][1]
        if last_q * last_q >= target:
            break
    tail_cf = ContinuedFraction(tuple(tail))
    exact = tail_cf.value()

    bits = max(DEFAULT_BITS, q_depth.bit_length() + q_next.bit_length() + 64)
    if bits > max_bits:
        raise PrecisionError(
            f"depth {depth} at tau={tau} needs {bits} mantissa bits (max {max_bits})"
        )
    value = PrecisionReal(exact, bits)
    return PrescribedNumber(tau, cf, value, depth)


def auto_depth(tau, min_q_bits: int = 128) -> int:
    """Smallest depth >= 8 whose last denominator reaches 2**min_q_bits."""
    tau = _as_fraction(tau)
    depth = 8
    while True:
        quotients = _quotient_rule(tau, depth)
        q = ContinuedFraction(tuple(quotients)).convergents[-1][1]
        if q.bit_length() > min_q_bits:
            return depth
        depth += 1


def convergent_quality(q: int, error: LogValue) -> float:
    if error.is_zero:
        return math.inf
    return float(-error.log_magnitude / mpmath.log(q))


def measured_sigma(num) -> float:
    """Best convergent quality -log|q_k x - p_k| / log q_k over the tail.

    Only convergents with k >= 3 and q_k >= sqrt(q_depth) count, which is the
    upper half of the stored height range on a log scale.  Accepts a
    :class:`PrescribedNumber` or a bare :class:`ContinuedFraction` (whose
    value is then the rational it represents).
    """
    if isinstance(num, ContinuedFraction):
        cf = num
        x = cf.value()
        errors = [LogValue.of(q * x - p) for p, q in cf.convergents]
    else:
        cf = num.cf
        errors = num.convergent_errors()
    if cf.depth < 3:
        raise ValueError("measured_sigma needs depth >= 3")
    q_last = cf.convergents[-1][1]
    best = -math.inf
    for k, ((_, q), err) in enumerate(zip(cf.convergents, errors)):
        if k < 3 or q < 2 or q * q < q_last:
            continue
        best = max(best, convergent_quality(q, err))
    return best


def cf_to_json(cf: ContinuedFraction) -> dict:
    x = cf.value()
    return {
        "quotients": list(cf.quotients),
        "convergents": [
            {"p": p, "q": q, "error_log": LogValue.of(q * x - p).to_json()}
            for p, q in cf.convergents
        ],
        "value": format_real(x),
    }
