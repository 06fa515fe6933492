"""Arithmetic substrate: exact rationals, configurable-precision reals and
log-domain magnitudes.

Real inputs are either ``fractions.Fraction`` (exact) or ``PrecisionReal``
(an mpmath float tagged with its mantissa width).  Everything downstream
accepts both.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence, Union

import mpmath
from mpmath import mpf

DEFAULT_BITS = 256
MIN_BITS = 64


class PrecisionError(ValueError):
    """Raised when a computation needs more mantissa than allowed."""


def _check_bits(bits: int) -> int:
    bits = int(bits)
    if bits < MIN_BITS:
        raise ValueError(f"mantissa_bits must be >= {MIN_BITS}, got {bits}")
    return bits


@dataclass(frozen=True, eq=False)
class PrecisionReal:
    """A binary floating value together with the mantissa width it carries.

    Binary operations run at the wider of the two operands' widths, so
    precision is never silently narrowed.
    """

    value: mpf
    mantissa_bits: int = DEFAULT_BITS

    def __post_init__(self):
        bits = _check_bits(self.mantissa_bits)
        object.__setattr__(self, "mantissa_bits", bits)
        with mpmath.workprec(bits):
            object.__setattr__(self, "value", mpmath.mpf(_as_mpf_input(self.value)))

    # construction helpers
    @classmethod
    def from_value(cls, x, bits: int = DEFAULT_BITS) -> "PrecisionReal":
        if isinstance(x, PrecisionReal):
            return cls(x.value, max(bits, x.mantissa_bits))
        return cls(to_mpf(x, bits), bits)

    def _coerce(self, other):
        if isinstance(other, PrecisionReal):
            bits = max(self.mantissa_bits, other.mantissa_bits)
            return other.value, bits
        if isinstance(other, (int, Fraction, float, mpf)):
            return to_mpf(other, self.mantissa_bits), self.mantissa_bits
        return NotImplemented, None

    def _binop(self, other, fn):
        ov, bits = self._coerce(other)
        if ov is NotImplemented:
            return NotImplemented
        with mpmath.workprec(bits):
            return PrecisionReal(fn(self.value, ov), bits)

    def __add__(self, other):
        return self._binop(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._binop(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binop(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binop(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binop(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._binop(other, lambda a, b: b * a)

    def __truediv__(self, other):
        return self._binop(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binop(other, lambda a, b: b / a)

    def __neg__(self):
        with mpmath.workprec(self.mantissa_bits):
            return PrecisionReal(-self.value, self.mantissa_bits)

    def __abs__(self):
        with mpmath.workprec(self.mantissa_bits):
            return PrecisionReal(abs(self.value), self.mantissa_bits)

    def _cmp_value(self, other):
        ov, _ = self._coerce(other)
        if ov is NotImplemented:
            raise TypeError(f"cannot compare PrecisionReal with {type(other).__name__}")
        return ov

    def __eq__(self, other):
        try:
            return self.value == self._cmp_value(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.value, self.mantissa_bits))

    def __lt__(self, other):
        return self.value < self._cmp_value(other)

    def __le__(self, other):
        return self.value <= self._cmp_value(other)

    def __gt__(self, other):
        return self.value > self._cmp_value(other)

    def __ge__(self, other):
        return self.value >= self._cmp_value(other)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"PrecisionReal({self.to_decimal(20)}, bits={self.mantissa_bits})"

    def to_decimal(self, digits: int | None = None) -> str:
        """Decimal string with ``digits`` significant digits (default: all
        digits the mantissa supports)."""
        if digits is None:
            digits = max(1, int(self.mantissa_bits * math.log10(2)))
        with mpmath.workprec(self.mantissa_bits):
            return mpmath.nstr(self.value, digits, strip_zeros=False)


Real = Union[Fraction, PrecisionReal]


def _as_mpf_input(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return x


def to_mpf(x, bits: int = DEFAULT_BITS) -> mpf:
    """Convert an int, Fraction, float, mpf or PrecisionReal to an mpf
    rounded to ``bits`` of mantissa."""
    with mpmath.workprec(bits):
        if isinstance(x, PrecisionReal):
            return +x.value
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        if isinstance(x, str):
            return to_mpf(parse_real(x, bits), bits)
        return mpmath.mpf(x)


def signed_man_exp(v: mpf) -> tuple[int, int]:
    """(m, e) with v == m * 2**e exactly; m carries the sign."""
    sign, man, exp, _ = v._mpf_
    if not man:
        return 0, 0
    return (-int(man) if sign else int(man)), int(exp)


def mpf_to_fraction(v: mpf) -> Fraction:
    m, e = signed_man_exp(v)
    return Fraction(m << e) if e >= 0 else Fraction(m, 1 << -e)


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


def bits_of(x) -> int:
    return x.mantissa_bits if isinstance(x, PrecisionReal) else DEFAULT_BITS


def max_bits(values: Iterable, floor: int = DEFAULT_BITS) -> int:
    return max([floor] + [v.mantissa_bits for v in values if isinstance(v, PrecisionReal)])


# ---------------------------------------------------------------------------
# log-domain values


@dataclass(frozen=True)
class LogValue:
    """|x| stored as its natural log, plus a sign; ``sign == 0`` means x == 0."""

    log_magnitude: mpf | None
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or 1")
        if (self.sign == 0) != (self.log_magnitude is None):
            raise ValueError("zero flag must coincide with a missing magnitude")

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(None, 0)

    @classmethod
    def of(cls, x, bits: int = DEFAULT_BITS) -> "LogValue":
        if isinstance(x, int):
            x = Fraction(x)
        if isinstance(x, Fraction):
            if x == 0:
                return cls.zero()
            return cls(log_fraction(abs(x), bits), 1 if x > 0 else -1)
        v = to_mpf(x, bits)
        if v == 0:
            return cls.zero()
        with mpmath.workprec(bits):
            return cls(mpmath.log(abs(v)), 1 if v > 0 else -1)

    @classmethod
    def from_log(cls, log_magnitude, sign: int = 1, bits: int = DEFAULT_BITS) -> "LogValue":
        if isinstance(log_magnitude, mpf):
            return cls(log_magnitude, sign)
        return cls(to_mpf(log_magnitude, bits), sign)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def log_float(self) -> float:
        return -math.inf if self.is_zero else float(self.log_magnitude)

    def magnitude_lt(self, other: "LogValue") -> bool:
        if self.is_zero:
            return not other.is_zero
        if other.is_zero:
            return False
        return self.log_magnitude < other.log_magnitude

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.is_zero or other.is_zero:
            return LogValue.zero()
        # exact addition: mpf values carry no precision of their own
        s = mpmath.fadd(self.log_magnitude, other.log_magnitude, exact=True)
        return LogValue(s, self.sign * other.sign)

    def scaled(self, log_factor) -> "LogValue":
        """Multiply the magnitude by exp(log_factor)."""
        if self.is_zero:
            return self
        if not isinstance(log_factor, mpf):
            log_factor = to_mpf(log_factor, DEFAULT_BITS * 4)
        return LogValue(mpmath.fadd(self.log_magnitude, log_factor, exact=True), self.sign)

    def to_mpf(self, bits: int = DEFAULT_BITS) -> mpf:
        if self.is_zero:
            return mpmath.mpf(0)
        with mpmath.workprec(bits):
            return self.sign * mpmath.exp(self.log_magnitude)

    def to_json(self) -> str | None:
        return None if self.is_zero else mpmath.nstr(self.log_magnitude, 17)


def log_fraction(x: Fraction, bits: int = DEFAULT_BITS) -> mpf:
    """Natural log of a positive rational, accurate even for huge terms."""
    with mpmath.workprec(bits + 16):
        return mpmath.log(mpmath.mpf(x.numerator)) - mpmath.log(mpmath.mpf(x.denominator))


def log_abs(x, bits: int = DEFAULT_BITS) -> mpf:
    """log|x| as an mpf; ``-inf`` for zero."""
    lv = LogValue.of(x, bits)
    return mpmath.ninf if lv.is_zero else lv.log_magnitude


# ---------------------------------------------------------------------------
# heights and norms


def plus_abs(x):
    """max(1, |x|), keeping exact types exact."""
    ax = abs(x)
    if ax > 1:
        return ax
    if isinstance(ax, PrecisionReal):
        return PrecisionReal(1, ax.mantissa_bits)
    return type(ax)(1)


def pi_plus(v: Sequence):
    """Multiplicative height: the product of max(1, |v_i|)."""
    out = 1
    for x in v:
        out = out * plus_abs(x)
    return out


def log_pi_plus(v: Sequence[int], bits: int = DEFAULT_BITS) -> mpf:
    return log_abs(Fraction(pi_plus(v)), bits)


class Norms(NamedTuple):
    sup_norm: object
    euclid_norm: object


def sup_norm(v: Sequence):
    return max((abs(x) for x in v), default=0)


def euclid_norm(v: Sequence, bits: int = DEFAULT_BITS):
    sq = sum((x * x for x in v), 0)
    if isinstance(sq, int) or isinstance(sq, Fraction):
        sq = Fraction(sq)
        if sq == 0:
            return 0
        num, den = sq.numerator, sq.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            return Fraction(rn, rd)
        with mpmath.workprec(bits):
            return PrecisionReal(mpmath.sqrt(to_mpf(sq, bits)), bits)
    if isinstance(sq, PrecisionReal):
        with mpmath.workprec(sq.mantissa_bits):
            return PrecisionReal(mpmath.sqrt(sq.value), sq.mantissa_bits)
    return math.sqrt(sq)


def norms(v: Sequence, bits: int = DEFAULT_BITS) -> Norms:
    return Norms(sup_norm(v), euclid_norm(v, bits))


# ---------------------------------------------------------------------------
# parsing and emission

_DECIMAL_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_RATIONAL_RE = re.compile(r"^[+-]?\d+\s*/\s*[+-]?\d+$")


def golden_ratio(bits: int = DEFAULT_BITS) -> PrecisionReal:
    with mpmath.workprec(bits):
        return PrecisionReal((1 + mpmath.sqrt(5)) / 2, bits)


def parse_real(text: str, bits: int = DEFAULT_BITS) -> Real:
    """Parse ``"0.718"``, ``"-3/7"``, ``"phi"`` or ``"sqrt:k"``.

    Decimal and rational strings are exact and come back as Fractions.
    """
    s = text.strip()
    if _RATIONAL_RE.match(s):
        num, den = (int(part) for part in s.split("/"))
        if den == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return Fraction(num, den)
    if _DECIMAL_RE.match(s):
        return Fraction(s)
    low = s.lower()
    if low == "phi":
        return golden_ratio(bits)
    if low.startswith("sqrt:"):
        k = Fraction(low[5:])
        if k < 0:
            raise ValueError(f"negative radicand in {text!r}")
        with mpmath.workprec(bits):
            return PrecisionReal(mpmath.sqrt(to_mpf(k, bits)), bits)
    raise ValueError(f"cannot parse real value {text!r}")


def format_real(x, digits: int | None = None) -> dict:
    """Decimal emission with an explicit precision annotation."""
    if isinstance(x, int):
        x = Fraction(x)
    if isinstance(x, Fraction):
        with mpmath.workprec(DEFAULT_BITS):
            dec = mpmath.nstr(to_mpf(x), digits or 30)
        return {"exact": f"{x.numerator}/{x.denominator}", "decimal": dec, "mantissa_bits": None}
    if isinstance(x, PrecisionReal):
        return {"decimal": x.to_decimal(digits), "mantissa_bits": x.mantissa_bits}
    return {"decimal": repr(float(x)), "mantissa_bits": 53}
