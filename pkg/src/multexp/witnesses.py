"""Witness enumeration and finite-bound exponent estimates.

Three exponents are estimated by brute force over integer vectors q:

* ``omega``        quality -log|<q,y>+p| / log sup|q|
* ``omega_times``  quality n * -log|<q,y>+p| / log Pi_+(q)
* ``sigma``        quality -log ||q a + p||_sup / log q   (scalar q)

Candidates are screened in float64 chunks with numpy and every candidate
that could be the best of its height block is recomputed exactly (rational
inputs) or at the inputs' mantissa width.  Reported errors and qualities
therefore never depend on float rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import mpmath
import numpy as np

from .constructions import cf_of_real
from .numerics import (
    DEFAULT_BITS,
    LogValue,
    PrecisionReal,
    Real,
    max_bits,
    pi_plus,
    signed_man_exp,
)

MODES = ("omega", "omega_times", "sigma")
CHUNK = 1 << 20
DEFAULT_BUDGET = 120_000_000
SIGMA_BUDGET = 4_000_000
_INT_LIMIT = 1 << 62


class BudgetExceeded(RuntimeError):
    """Raised when a search would exceed its candidate budget."""


@dataclass(frozen=True)
class Witness:
    q: tuple[int, ...]
    p: int | tuple[int, ...]
    error: LogValue
    height: int
    quality: float | None

    def to_json(self) -> dict:
        return {
            "q": list(self.q),
            "p": list(self.p) if isinstance(self.p, tuple) else self.p,
            "height": self.height,
            "error_log": self.error.to_json(),
            "quality": _json_float(self.quality),
        }


@dataclass(frozen=True)
class ExponentEstimate:
    mode: str
    q_max: int
    raw_max: float
    window_estimate: float
    witnesses: tuple[Witness, ...]
    exact_hit: bool
    window: tuple[float, float]
    height_cap: int | None = None
    exhaustive: bool = True
    enumerated: int = 0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "q_max": self.q_max,
            "height_cap": self.height_cap,
            "raw_max": _json_float(self.raw_max),
            "window_estimate": _json_float(self.window_estimate),
            "window": [_json_float(w) for w in self.window],
            "exact_hit": self.exact_hit,
            "exhaustive": self.exhaustive,
            "enumerated": self.enumerated,
            "witnesses": [w.to_json() for w in self.witnesses],
        }


def _json_float(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


# ---------------------------------------------------------------------------
# scalar helpers


def _coerce(x) -> Real:
    if isinstance(x, (Fraction, PrecisionReal)):
        return x
    if isinstance(x, (int, float)):
        return Fraction(x)
    if isinstance(x, str):
        from .numerics import parse_real

        return parse_real(x)
    return PrecisionReal(x)


def coerce_vector(y: Sequence) -> tuple[Real, ...]:
    y = tuple(_coerce(v) for v in y)
    if not y:
        raise ValueError("dimension 0 input rejected")
    return y


def _round_half_even(x):
    """Nearest integer, ties to even; exact for Fractions and mpfs."""
    if isinstance(x, Fraction):
        return round(x)
    man, exp = signed_man_exp(x)
    if exp >= 0:
        return man << exp
    shift = -exp
    fl = man >> shift
    rem2 = (man - (fl << shift)) << 1
    half = 1 << shift
    if rem2 > half or (rem2 == half and fl % 2):
        return fl + 1
    return fl


def _dot(q, y, bits):
    if all(isinstance(v, Fraction) for v in y):
        return sum((qi * yi for qi, yi in zip(q, y)), Fraction(0))
    guard = sum(abs(qi) for qi in q).bit_length() + 8
    with mpmath.workprec(bits + guard):
        s = mpmath.fsum(qi * (yi.value if isinstance(yi, PrecisionReal) else
                              mpmath.mpf(yi.numerator) / yi.denominator)
                        for qi, yi in zip(q, y))
    return s


def _companion(s, bits):
    """(p, |s + p|) with p the nearest integer to -s, ties to even."""
    p = -_round_half_even(s)
    if isinstance(s, Fraction):
        return p, abs(s + p)
    with mpmath.workprec(bits + 64):
        return p, PrecisionReal(abs(s + p), bits)


def best_companion(q: Sequence[int], y: Sequence) -> tuple[int, Real]:
    """Nearest integer p to -<q,y> and the error |<q,y> + p|."""
    q = tuple(int(v) for v in q)
    y = coerce_vector(y)
    if len(q) != len(y):
        raise ValueError("q and y differ in dimension")
    if not any(q):
        raise ValueError("q must be nonzero")
    bits = max_bits(y)
    return _companion(_dot(q, y, bits), bits)


def sigma_companion(q: int, a: Sequence) -> tuple[tuple[int, ...], Real]:
    """Componentwise nearest integers p to -q a and the sup error."""
    a = coerce_vector(a)
    bits = max_bits(a)
    ps, errs = [], []
    for ai in a:
        p, e = _companion(_dot((q,), (ai,), bits), bits)
        ps.append(p)
        errs.append(e)
    return tuple(ps), max(errs)


def _log_error(err, bits) -> LogValue:
    return LogValue.of(err, bits)


def _quality(err: LogValue, height: int, factor: int) -> float | None:
    if height <= 1:
        return None
    if err.is_zero:
        return math.inf
    with mpmath.workprec(DEFAULT_BITS):
        return float(-factor * err.log_magnitude / mpmath.log(height))


# ---------------------------------------------------------------------------
# candidate regions


def _rows(n: int, q_max: int, cap: int) -> Iterator[tuple[tuple[int, ...], int, int]]:
    """Lexicographically positive q with sup <= q_max and Pi_+ <= cap,
    grouped as (prefix, lo, hi) ranges of the last coordinate."""

    def rec(prefix, positive, pp):
        limit = min(q_max, cap // pp)
        if len(prefix) == n - 1:
            yield prefix, (-limit if positive else 1), limit
            return
        for v in range(-limit if positive else 0, limit + 1):
            yield from rec(prefix + (v,), positive or v > 0, pp * max(1, abs(v)))

    yield from rec((), False, 1)


def region_size(n: int, q_max: int, cap: int | None = None, stop: int | None = None) -> int:
    if cap is None or cap >= q_max ** n:
        return ((2 * q_max + 1) ** n - 1) // 2
    total = 0
    for _, lo, hi in _rows(n, q_max, cap):
        total += hi - lo + 1
        if stop is not None and total > stop:
            break
    return total


def _chunks(n, q_max, cap, chunk=CHUNK) -> Iterator[list[np.ndarray]]:
    """Yield the region as lists of n int64 coordinate columns."""
    prefixes, los, lens = [], [], []
    pending = 0

    def flush():
        L = np.array(lens, dtype=np.int64)
        total = int(L.sum())
        starts = np.repeat(np.cumsum(L) - L, L)
        lows = np.repeat(np.array(los, dtype=np.int64), L)
        cols = []
        if n > 1:
            P = np.array(prefixes, dtype=np.int64).reshape(len(prefixes), n - 1)
            cols = [np.repeat(P[:, j], L) for j in range(n - 1)]
        cols.append(np.arange(total, dtype=np.int64) - starts + lows)
        return cols

    for prefix, lo, hi in _rows(n, q_max, cap):
        while hi >= lo:
            take = min(hi - lo + 1, chunk - pending)
            prefixes.append(prefix)
            los.append(lo)
            lens.append(take)
            pending += take
            lo += take
            if pending >= chunk:
                yield flush()
                prefixes, los, lens, pending = [], [], [], 0
    if pending:
        yield flush()


def _sigma_chunks(q_max, chunk=CHUNK):
    for s in range(1, q_max + 1, chunk):
        yield [np.arange(s, min(s + chunk, q_max + 1), dtype=np.int64)]


# ---------------------------------------------------------------------------
# screening


class _Screen:
    """Float64 (or exact int64) evaluation of errors and heights per chunk."""

    def __init__(self, y, mode):
        self.mode = mode
        self.n = len(y)
        self.factor = self.n if mode == "omega_times" else 1
        self.exact = all(isinstance(v, Fraction) for v in y)
        if self.exact:
            self.den = math.lcm(*(v.denominator for v in y))
            self.num = [(v.numerator * (self.den // v.denominator)) % self.den for v in y]
        red = []
        for v in y:
            if isinstance(v, Fraction):
                red.append(float(v - round(v)))
            else:
                with mpmath.workprec(v.mantissa_bits):
                    red.append(float(v.value - mpmath.nint(v.value)))
        self.yf = red
        self.ya = [abs(v) for v in red]

    def int_path(self, q_max):
        return self.exact and self.n * q_max * self.den < _INT_LIMIT

    def errors(self, cols, int_path):
        """Screened error and an absolute bound on its float error."""
        if self.mode == "sigma":
            qs = cols[0]
            if int_path:
                e = None
                for num in self.num:
                    r = (qs * num) % self.den
                    r = np.minimum(r, self.den - r)
                    e = r if e is None else np.maximum(e, r)
                return e / self.den, None
            qf = qs.astype(np.float64)
            e = None
            for yi in self.yf:
                v = qf * yi
                d = np.abs(v - np.rint(v))
                e = d if e is None else np.maximum(e, d)
            return e, qf * (max(self.ya) * 2.0 ** -50) + 2.0 ** -52
        if int_path:
            r = np.zeros(len(cols[0]), dtype=np.int64)
            for c, num in zip(cols, self.num):
                r = (r + c * num) % self.den
            return np.minimum(r, self.den - r) / self.den, None
        v = None
        mag = 1.0
        for c, yi, ya in zip(cols, self.yf, self.ya):
            term = c * yi
            v = term if v is None else v + term
            mag += max(abs(int(c[0])), abs(int(c[-1])), abs(int(c.max())), abs(int(c.min()))) * ya
        v -= np.rint(v)
        e = np.abs(v, out=v)
        # one absolute bound for the whole chunk
        return e, np.full(len(e), mag * 2.0 ** -50)

    def heights(self, cols):
        if self.mode == "sigma":
            return cols[0]
        h = None
        for c in cols:
            a = np.abs(c)
            if self.mode == "omega":
                h = a if h is None else np.maximum(h, a)
            else:
                a = np.maximum(a, 1)
                h = a if h is None else h * a
        return h


_NKEYS = 2 * 64


def _search(y, mode, q_max, cap, window_ok, budget):
    """Screen the exhaustive region; return the candidate q that may be
    block-best after exact recomputation."""
    n = len(y)
    screen = _Screen(y, mode)
    if mode == "sigma":
        q_exh = min(q_max, budget)
    else:
        q_exh = q_max
        size = region_size(n, q_exh, cap, stop=budget)
        while size > budget and q_exh > 1:
            q_exh //= 2
            size = region_size(n, q_exh, min(cap, q_exh ** n), stop=budget)
    exhaustive = q_exh == q_max
    cap_exh = cap if exhaustive else min(cap, q_exh ** n)
    int_path = screen.int_path(q_exh)
    chunks = _sigma_chunks(q_exh) if mode == "sigma" else _chunks(n, q_exh, cap_exh)

    factor = float(screen.factor)
    lower = np.full(_NKEYS, -np.inf)
    blocks = (np.arange(_NKEYS) // 2).astype(np.float64)
    key_table = None
    h_top = q_exh if mode != "omega_times" else cap_exh
    if h_top <= 1 << 25:
        hs = np.arange(h_top + 1, dtype=np.int64)
        hs[0] = 1
        key_table = (2 * (np.frexp(hs.astype(np.float64))[1] - 1) + window_ok(hs)).astype(np.int16)
    pool: list[tuple[int, tuple[int, ...], float]] = []
    count = 0
    for cols in chunks:
        m = len(cols[0])
        count += m
        e, tol = screen.errors(cols, int_path)
        h = screen.heights(cols)
        if key_table is not None:
            keys = key_table[h]
        else:
            keys = 2 * (np.frexp(h.astype(np.float64))[1] - 1) + window_ok(h)
        # cheap rejection: quality >= L forces error <= 2^(-b L / factor)
        with np.errstate(over="ignore", invalid="ignore"):
            thr = np.where((blocks > 0) & np.isfinite(lower) & (lower > 0),
                           np.exp2(-blocks * lower / factor), np.inf)
        e_lo = e if tol is None else e - tol
        sub = np.nonzero(e_lo <= thr[keys])[0]
        if len(sub) < m:
            e, h, keys = e[sub], h[sub], keys[sub]
            tol = None if tol is None else tol[sub]
            cols = [c[sub] for c in cols]
            m = len(sub)
        with np.errstate(divide="ignore", invalid="ignore"):
            lh = np.log(h.astype(np.float64))
            qual = np.log(e)
            qual *= -factor
            qual /= lh
            if tol is None:
                slack = np.zeros(m)
            else:
                slack = tol / (e - tol)
                slack *= 2.0 * factor
                slack /= lh
        # unscored (height one) and unresolved (error within float noise)
        odd = np.nonzero((h == 1) | ((e <= tol) if tol is not None else (e == 0)))[0]
        if len(odd):
            ho = h[odd] == 1
            eo = e[odd]
            if tol is None:
                qual[odd] = np.where(ho, -eo, np.inf)
                slack[odd] = 0.0
            else:
                qual[odd] = np.where(ho, -eo, np.inf)
                slack[odd] = np.where(ho, tol[odd], np.inf)
        with np.errstate(invalid="ignore"):
            qual_lo = qual - slack
        if len(odd):
            qual_lo[odd] = np.where(h[odd] == 1, -e[odd] - (0 if tol is None else tol[odd]), 0.0)
            if tol is None:
                qual_lo[odd[e[odd] == 0]] = np.inf
        np.maximum.at(lower, keys, qual_lo)
        upper = qual + slack
        keep = upper >= lower[keys]
        zeros = keep & (e == 0)
        nz = int(np.count_nonzero(zeros))
        if nz and (tol is None or nz > 4096):
            keep &= ~zeros | _first_minimal(keys, h, zeros)
        idx = np.nonzero(keep)[0]
        for i in idx.tolist():
            pool.append((int(keys[i]), tuple(int(c[i]) for c in cols), float(upper[i])))
        if len(pool) > 4 * len(idx) + 4096:
            pool = [c for c in pool if c[2] >= lower[c[0]]]
    pool = [c[1] for c in pool if c[2] >= lower[c[0]]]
    return pool, exhaustive, q_exh, count


def _first_minimal(keys, h, mask):
    """For each key, the first entry of smallest height among ``mask``."""
    out = np.zeros(len(h), dtype=bool)
    sel = np.nonzero(mask)[0]
    hmin = np.full(_NKEYS, np.iinfo(np.int64).max)
    np.minimum.at(hmin, keys[sel], h[sel])
    sel = sel[h[sel] == hmin[keys[sel]]]
    _, first = np.unique(keys[sel], return_index=True)
    out[sel[first]] = True
    return out


# ---------------------------------------------------------------------------
# estimates


def _height_of(q, mode) -> int:
    if mode == "sigma":
        return abs(q[0])
    if mode == "omega":
        return max(abs(v) for v in q)
    return int(pi_plus(q))


def _make_witness(q, y, mode, bits) -> Witness:
    if mode == "sigma":
        p, err = sigma_companion(q[0], y)
    else:
        p, err = _companion(_dot(q, y, bits), bits)
    lv = _log_error(err, bits)
    h = _height_of(q, mode)
    factor = len(y) if mode == "omega_times" else 1
    return Witness(tuple(q), p, lv, h, _quality(lv, h, factor))


def _seeds(y, mode, q_max, cap):
    out = set()
    for i, v in enumerate(y):
        if isinstance(v, Fraction) and v.denominator == 1:
            continue
        for _, q in cf_of_real(v, q_bound=q_max).convergents:
            if q < 2:
                continue
            if mode == "sigma":
                out.add((q,))
            elif q <= cap:
                vec = [0] * len(y)
                vec[i] = q
                out.add(tuple(vec))
    return sorted(out)


def _estimate(y, mode, q_max, height_cap=None, budget=DEFAULT_BUDGET, allow_partial=True):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    y = coerce_vector(y)
    q_max = int(q_max)
    if q_max < 2:
        raise ValueError("q_max must be >= 2")
    n = len(y)
    bits = max_bits(y)
    factor = n if mode == "omega_times" else 1

    if mode == "omega_times":
        cap = q_max ** n if height_cap is None else min(int(height_cap), q_max ** n)
        window = (math.sqrt(cap), float(cap))

        def in_window(h: int) -> bool:
            return h * h >= cap

        def window_ok(h):
            return h.astype(np.float64) ** 2 >= cap
    else:
        if mode == "sigma":
            cap = q_max
            budget = min(budget, SIGMA_BUDGET)
        else:
            cap = q_max ** n if height_cap is None else min(int(height_cap), q_max ** n)
        window = (q_max / 2, float(q_max))

        def in_window(h: int) -> bool:
            return 2 * h >= q_max

        def window_ok(h):
            if q_max >= _INT_LIMIT:
                return np.zeros(len(h), dtype=bool)
            return 2 * h >= q_max

    pool, exhaustive, q_exh, count = _search(y, mode, q_max, cap, window_ok, budget)
    if not exhaustive and not allow_partial:
        raise BudgetExceeded(f"search region exceeds budget of {budget} candidates")

    candidates = set(pool)
    if not exhaustive:
        for q in _seeds(y, mode, q_max, cap):
            candidates.add(q)

    best: dict[int, Witness] = {}
    exact_hit = False
    for q in sorted(candidates):
        w = _make_witness(q, y, mode, bits)
        if w.error.is_zero:
            exact_hit = True
        h = w.height
        key = 2 * (h.bit_length() - 1) + int(in_window(h))
        cur = best.get(key)
        if cur is None or _better(w, cur):
            best[key] = w

    witnesses = tuple(sorted(best.values(), key=lambda w: (w.height, w.q)))
    scored = [w for w in witnesses if w.quality is not None]
    if exact_hit:
        raw = win = math.inf
    else:
        raw = max((w.quality for w in scored), default=-math.inf)
        win = max((w.quality for w in scored if in_window(w.height)), default=-math.inf)
    return ExponentEstimate(
        mode=mode,
        q_max=q_max,
        raw_max=raw,
        window_estimate=win,
        witnesses=witnesses,
        exact_hit=exact_hit,
        window=window,
        height_cap=None if mode == "sigma" else cap,
        exhaustive=exhaustive,
        enumerated=count,
    )


def _better(a: Witness, b: Witness) -> bool:
    if a.quality is None or b.quality is None:
        # height-one block: smaller error wins
        if a.error.magnitude_lt(b.error):
            return True
        if b.error.magnitude_lt(a.error):
            return False
    elif a.quality != b.quality:
        return a.quality > b.quality
    return (a.height, a.q) < (b.height, b.q)


def estimate_omega(y, q_max: int, **kw) -> ExponentEstimate:
    """Best approximation quality with respect to the sup norm of q."""
    return _estimate(y, "omega", q_max, **kw)


def estimate_omega_times(y, q_max: int, height_cap: int | None = None, **kw) -> ExponentEstimate:
    """Multiplicative analogue; q ranges over sup|q| <= q_max and
    Pi_+(q) <= height_cap (default: the whole box)."""
    return _estimate(y, "omega_times", q_max, height_cap=height_cap, **kw)


def estimate_sigma(a, q_max: int, **kw) -> ExponentEstimate:
    """Simultaneous approximation of the vector a by multiples q = 1..q_max."""
    return _estimate(a, "sigma", q_max, **kw)


def estimate(mode: str, y, q_max: int, **kw) -> ExponentEstimate:
    mode = {"omegax": "omega_times", "omega_x": "omega_times"}.get(mode, mode)
    return _estimate(y, mode, q_max, **kw)
