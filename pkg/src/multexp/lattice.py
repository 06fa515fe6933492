"""Unimodular lattices u_y Z^{n+1}, the diagonal flow g_t and short vectors.

Bases are stored column-wise: column j is the j-th basis vector, so the
lattice point with integer coordinates x is ``B @ x``.  For ``u_of_y`` the
coordinates are (q_1, ..., q_n, p) and the image is (q, <q,y> + p).

Shortest vectors are exact: LLL (delta = 0.99) in the basis' own arithmetic
shrinks the search, a Fincke-Pohst enumeration lists every coefficient
vector inside the first reduced norm, and the winners are re-measured in the
original arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np

from .numerics import (
    DEFAULT_BITS,
    LogValue,
    PrecisionReal,
    Real,
    max_bits,
    to_mpf,
)

MAX_DIM = 8
LLL_DELTA = Fraction(99, 100)


class DimensionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bases


@dataclass(frozen=True)
class LatticeBasis:
    """Square basis matrix (rows of entries; columns are basis vectors)."""

    rows: tuple[tuple[Real, ...], ...]

    def __post_init__(self):
        m = len(self.rows)
        if m == 0 or any(len(r) != m for r in self.rows):
            raise ValueError("basis must be a nonempty square matrix")

    @property
    def dimension(self) -> int:
        return len(self.rows)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for r in self.rows for v in r)

    @property
    def bits(self) -> int:
        return max_bits([v for r in self.rows for v in r])

    def det(self):
        if self.exact:
            return det_exact([[Fraction(v) for v in r] for r in self.rows])
        with mpmath.workprec(self.bits):
            m = mpmath.matrix([[to_mpf(v, self.bits) for v in r] for r in self.rows])
            return PrecisionReal(mpmath.det(m), self.bits)

    def image(self, coeffs: Sequence[int]):
        return _matvec(self.rows, coeffs, self.bits)


def det_exact(a: list[list[Fraction]]) -> Fraction:
    a = [[Fraction(v) for v in r] for r in a]
    m = len(a)
    det = Fraction(1)
    for c in range(m):
        piv = next((r for r in range(c, m) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, m):
            f = a[r][c] / a[c][c]
            if f:
                for j in range(c, m):
                    a[r][j] -= f * a[c][j]
    return det


def _matvec(rows, x, bits):
    if all(isinstance(v, (int, Fraction)) for r in rows for v in r):
        return tuple(sum((Fraction(v) * xi for v, xi in zip(r, x)), Fraction(0)) for r in rows)
    with mpmath.workprec(bits + 32):
        return tuple(
            PrecisionReal(mpmath.fsum(to_mpf(v, bits + 32) * xi for v, xi in zip(r, x)), bits)
            for r in rows
        )


def u_of_y(y: Sequence) -> LatticeBasis:
    """Block matrix (I_n 0; y 1)."""
    from .witnesses import coerce_vector

    y = coerce_vector(y)
    n = len(y)
    rows = []
    for i in range(n):
        rows.append(tuple(Fraction(int(i == j)) for j in range(n + 1)))
    rows.append(tuple(y) + (Fraction(1),))
    return LatticeBasis(tuple(rows))


def identity_basis(m: int) -> LatticeBasis:
    return LatticeBasis(tuple(tuple(Fraction(int(i == j)) for j in range(m)) for i in range(m)))


# ---------------------------------------------------------------------------
# flow


@dataclass(frozen=True)
class FlowVector:
    t: tuple[Real, ...]

    def __post_init__(self):
        t = tuple(v if isinstance(v, (Fraction, PrecisionReal)) else _real(v) for v in self.t)
        if not t:
            raise ValueError("flow vector needs at least one entry")
        if any(v < 0 for v in t):
            raise ValueError("flow entries must be nonnegative")
        object.__setattr__(self, "t", t)

    @property
    def total(self):
        return sum(self.t[1:], self.t[0])

    def log_scalings(self, bits=DEFAULT_BITS) -> list:
        """(-t_1, ..., -t_n, t) as mpfs."""
        with mpmath.workprec(bits):
            ts = [to_mpf(v, bits) for v in self.t]
            return [-v for v in ts] + [mpmath.fsum(ts)]


def _real(v):
    if isinstance(v, (int,)):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v)
    return PrecisionReal(v)


@dataclass(frozen=True)
class FlowedLattice:
    """g_t applied to a basis, with each entry kept as a LogValue."""

    base: LatticeBasis
    flow: FlowVector
    entries: tuple[tuple[LogValue, ...], ...]
    bits: int

    def det_log(self):
        """log|det| of the flowed basis: log|det base| + sum of scalings."""
        d = self.base.det()
        with mpmath.workprec(self.bits):
            s = mpmath.fsum(self.flow.log_scalings(self.bits))
            return LogValue.of(d, self.bits).scaled(s)

    def rows_mpf(self, bits=None):
        bits = bits or self.bits
        with mpmath.workprec(bits):
            return [[e.to_mpf(bits) for e in r] for r in self.entries]

    def image(self, coeffs: Sequence[int]):
        """g_t applied to the base lattice point with these coordinates."""
        v = self.base.image(coeffs)
        scal = self.flow.log_scalings(self.bits)
        with mpmath.workprec(self.bits):
            return tuple(PrecisionReal(to_mpf(x, self.bits) * mpmath.exp(s), self.bits)
                         for x, s in zip(v, scal))


def apply_flow(b: LatticeBasis, t, bits: int | None = None) -> FlowedLattice:
    if not isinstance(t, FlowVector):
        t = FlowVector(tuple(t))
    if len(t.t) + 1 != b.dimension:
        raise ValueError("flow dimension does not match lattice")
    bits = max(bits or DEFAULT_BITS, b.bits, max_bits(t.t))
    scal = t.log_scalings(bits)
    entries = tuple(
        tuple(LogValue.of(v, bits).scaled(s) for v in row) for row, s in zip(b.rows, scal)
    )
    return FlowedLattice(b, t, entries, bits)


# ---------------------------------------------------------------------------
# arithmetic backends


class _Backend:
    def __init__(self, kind: str, bits: int = DEFAULT_BITS):
        self.kind = kind
        self.bits = bits

    def conv(self, v):
        if self.kind == "exact":
            return Fraction(v)
        if self.kind == "mpf":
            return to_mpf(v, self.bits)
        return float(v)

    def round(self, v) -> int:
        if self.kind == "exact":
            return round(v)
        if self.kind == "mpf":
            return int(mpmath.nint(v))
        return int(round(v))

    def zero(self):
        return Fraction(0) if self.kind == "exact" else (mpmath.mpf(0) if self.kind == "mpf" else 0.0)

    def context(self):
        if self.kind == "mpf":
            return mpmath.workprec(self.bits)
        return _Null()


class _Null:
    def __enter__(self):
        return self

    def __exit__(self, *a):
        return False


def _backend_for(L, bits=None):
    if isinstance(L, FlowedLattice):
        b = bits or L.bits
        return _Backend("mpf", b), L.rows_mpf(b)
    if isinstance(L, LatticeBasis):
        if L.exact:
            return _Backend("exact"), [[Fraction(v) for v in r] for r in L.rows]
        b = bits or L.bits
        with mpmath.workprec(b):
            return _Backend("mpf", b), [[to_mpf(v, b) for v in r] for r in L.rows]
    arr = np.asarray(L, dtype=np.float64)
    return _Backend("float"), arr.tolist()


def _columns(rows):
    m = len(rows)
    return [[rows[i][j] for i in range(m)] for j in range(m)]


def _dot(u, v, zero):
    s = zero
    for a, b in zip(u, v):
        s = s + a * b
    return s


def lll_reduce(cols, backend: _Backend, delta=LLL_DELTA):
    """LLL on basis columns; returns (reduced columns, integer transform U)
    with reduced = cols @ U (U stored column-wise)."""
    m = len(cols)
    zero = backend.zero()
    delta = backend.conv(delta)
    b = [list(c) for c in cols]
    U = [[int(i == j) for i in range(m)] for j in range(m)]

    def gso():
        bstar, mu, B = [], [[zero] * m for _ in range(m)], []
        for i in range(m):
            v = list(b[i])
            for j in range(i):
                mu[i][j] = _dot(b[i], bstar[j], zero) / B[j] if B[j] else zero
                v = [x - mu[i][j] * y for x, y in zip(v, bstar[j])]
            bstar.append(v)
            B.append(_dot(v, v, zero))
        return mu, B

    with backend.context():
        mu, B = gso()
        k = 1
        guard = 0
        while k < m:
            guard += 1
            if guard > 100000:
                raise RuntimeError("LLL failed to converge")
            for j in range(k - 1, -1, -1):
                r = backend.round(mu[k][j])
                if r:
                    b[k] = [x - r * y for x, y in zip(b[k], b[j])]
                    U[k] = [x - r * y for x, y in zip(U[k], U[j])]
                    for i in range(j):
                        mu[k][i] -= r * mu[j][i]
                    mu[k][j] -= r
            if B[k] >= (delta - mu[k][k - 1] ** 2) * B[k - 1]:
                k += 1
            else:
                b[k], b[k - 1] = b[k - 1], b[k]
                U[k], U[k - 1] = U[k - 1], U[k]
                mu, B = gso()
                k = max(k - 1, 1)
    return b, U


def _enumerate(cols_f: list[list[float]], radius_sq: float, limit: int = 2_000_000):
    """All nonzero integer x with |sum x_j cols_j|^2 <= radius_sq (float GS)."""
    m = len(cols_f)
    Bm = np.array(cols_f, dtype=np.float64).T
    # Gram-Schmidt in float
    Q = np.zeros_like(Bm)
    mu = np.zeros((m, m))
    Bs = np.zeros(m)
    for i in range(m):
        v = Bm[:, i].copy()
        for j in range(i):
            mu[i, j] = Bm[:, i] @ Q[:, j] / Bs[j] if Bs[j] > 0 else 0.0
            v -= mu[i, j] * Q[:, j]
        Q[:, i] = v
        Bs[i] = v @ v
    out = []
    x = [0] * m
    count = [0]

    def rec(i, partial):
        if i < 0:
            if any(x):
                out.append(tuple(x))
            return
        c = -sum(mu[j, i] * x[j] for j in range(i + 1, m))
        if Bs[i] <= 0:
            return
        span = math.sqrt(max(radius_sq - partial, 0.0) / Bs[i])
        lo = math.ceil(c - span - 1e-9)
        hi = math.floor(c + span + 1e-9)
        for xi in range(lo, hi + 1):
            d = (xi - c) ** 2 * Bs[i]
            if partial + d > radius_sq * (1 + 1e-9) + 1e-300:
                continue
            count[0] += 1
            if count[0] > limit:
                raise RuntimeError("enumeration budget exceeded")
            x[i] = xi
            rec(i - 1, partial + d)
        x[i] = 0

    rec(m - 1, 0.0)
    return out


@dataclass(frozen=True)
class ShortVector:
    coeffs: tuple[int, ...]
    vector: tuple
    length_sq: object
    length: object

    def length_log(self, bits=DEFAULT_BITS) -> LogValue:
        lv = LogValue.of(self.length_sq, bits)
        return LogValue(mpmath.ldexp(lv.log_magnitude, -1), 1)

    def to_json(self) -> dict:
        return {"coeffs": list(self.coeffs), "length_log": self.length_log().to_json(),
                "length": float(self.length)}


def _lex_positive(c):
    for v in c:
        if v:
            return c if v > 0 else tuple(-x for x in c)
    return c


def _sqrt(v, backend):
    if backend.kind == "exact":
        from .numerics import euclid_norm

        num, den = v.numerator, v.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            return Fraction(rn, rd)
        with mpmath.workprec(DEFAULT_BITS):
            return PrecisionReal(mpmath.sqrt(to_mpf(v)), DEFAULT_BITS)
    if backend.kind == "mpf":
        with mpmath.workprec(backend.bits):
            return PrecisionReal(mpmath.sqrt(v), backend.bits)
    return math.sqrt(v)


def _search(L, classify: Callable[[tuple[int, ...]], object] | None = None,
            wanted: Sequence = (0,), bits=None, max_doublings: int = 8,
            limit: int = 2_000_000) -> dict:
    """Best vector per class label.  ``classify`` maps lex-positive
    coefficient vectors to a label (None rejects); the radius doubles from
    the reduced minimum until every wanted label has a vector."""
    backend, rows = _backend_for(L, bits)
    m = len(rows)
    if m > MAX_DIM:
        raise DimensionError(f"dimension {m} exceeds the enumeration limit {MAX_DIM}")
    cols = _columns(rows)
    red, U = lll_reduce(cols, backend)
    zero = backend.zero()
    with backend.context():
        norms = [_dot(c, c, zero) for c in red]
    cols_f = [[float(v) for v in c] for c in red]
    scale = max(max(abs(v) for v in c) for c in cols_f) or 1.0
    cols_s = [[v / scale for v in c] for c in cols_f]
    r2 = float(min(norms)) / scale ** 2
    best: dict = {}
    for _ in range(max_doublings + 1):
        try:
            cands = _enumerate(cols_s, r2 * (1 + 1e-6), limit)
        except RuntimeError:
            break
        Gf = np.array(cols_s) @ np.array(cols_s).T
        labelled = {}
        for xr in cands:
            coeffs = _lex_positive(tuple(sum(U[j][i] * xr[j] for j in range(m)) for i in range(m)))
            label = 0 if classify is None else classify(coeffs)
            if label is None:
                continue
            xv = np.array(xr, dtype=np.float64)
            labelled.setdefault(label, []).append((float(xv @ Gf @ xv), coeffs))
        # only near-minimal float norms are re-measured exactly
        with backend.context():
            for label, items in labelled.items():
                fmin = min(f for f, _ in items)
                for f, coeffs in items:
                    if f > fmin * (1 + 1e-6) + 1e-300:
                        continue
                    vec = [sum((rows[i][j] * coeffs[j] for j in range(m)), zero) for i in range(m)]
                    key = (_dot(vec, vec, zero), coeffs)
                    cur = best.get(label)
                    if cur is None or _less(key, cur[0], backend):
                        best[label] = (key, vec)
        if all(w in best for w in wanted):
            break
        r2 *= 4.0
    out = {}
    for label, ((n2, coeffs), vec) in best.items():
        out[label] = ShortVector(coeffs, tuple(vec), n2, _sqrt(n2, backend))
    return out


def _less(a, b, backend):
    (na, ca), (nb, cb) = a, b
    if backend.kind == "exact":
        if na != nb:
            return na < nb
        return ca < cb
    tol = abs(nb) * (2.0 ** (-(backend.bits - 16)) if backend.kind == "mpf" else 1e-12)
    if abs(na - nb) > tol:
        return na < nb
    return ca < cb


def shortest_vector(L, bits: int | None = None) -> ShortVector:
    """Exact shortest nonzero vector (Euclidean).  Ties go to the
    lexicographically smallest lex-positive coefficient vector."""
    return _search(L, None, (0,), bits)[0]


def strata_shortest(L, n: int, ks: Sequence[int] | None = None,
                    bits: int | None = None) -> dict[int, ShortVector]:
    """Shortest vectors whose q part (first n coordinates) has exactly k
    nonzero entries, for each requested k.

    The stratum is a union over supports S of |S| = k; each support is
    searched inside the rank k+1 sublattice spanned by the columns in S and
    the last column, keeping only vectors nonzero on all of S.  Strata with
    no vector inside the search budget are absent from the result.
    """
    from itertools import combinations

    ks = tuple(range(1, n + 1)) if ks is None else tuple(ks)
    if any(not 1 <= k <= n for k in ks):
        raise ValueError("need 1 <= k <= n")
    backend, rows = _backend_for(L, bits)
    m = len(rows)
    if m != n + 1:
        raise ValueError("lattice dimension must be n + 1")
    out: dict[int, ShortVector] = {}
    for k in ks:
        best = None
        for S in combinations(range(n), k):
            idx = list(S) + [n]
            sub = [[rows[i][j] for j in idx] for i in range(m)]
            found = _search_rect(sub, backend, k)
            if found is None:
                continue
            coeffs = [0] * m
            for j, c in zip(idx, found.coeffs):
                coeffs[j] = c
            cand = ShortVector(tuple(coeffs), found.vector, found.length_sq, found.length)
            if best is None or _less((cand.length_sq, cand.coeffs),
                                     (best.length_sq, best.coeffs), backend):
                best = cand
        if best is not None:
            out[k] = best
    return out


def _search_rect(sub_rows, backend, k, max_doublings=10, limit=400_000):
    """Shortest vector of the lattice spanned by the columns of a tall
    matrix whose first k coefficients are all nonzero."""
    m = len(sub_rows)
    r = len(sub_rows[0])
    zero = backend.zero()
    cols = [[sub_rows[i][j] for i in range(m)] for j in range(r)]
    red, U = lll_reduce(cols, backend)
    with backend.context():
        gram = [[_dot(a, b, zero) for b in red] for a in red]
    # enumerate in the Gram metric (the lattice has rank r inside R^m)
    G = np.array([[float(v) for v in row] for row in gram], dtype=np.float64)
    scale = float(max(G[i, i] for i in range(r))) or 1.0
    G /= scale
    r2 = float(min(G[i, i] for i in range(r)))
    best = None
    for _ in range(max_doublings + 1):
        try:
            cands = _enumerate_gram(G, r2 * (1 + 1e-6), limit)
        except RuntimeError:
            break
        items = []
        for xr in cands:
            coeffs = _lex_positive(tuple(sum(U[j][i] * xr[j] for j in range(r)) for i in range(r)))
            if all(coeffs[:k]):
                xv = np.array(xr, dtype=np.float64)
                items.append((float(xv @ G @ xv), coeffs))
        fmin = min((f for f, _ in items), default=0.0)
        with backend.context():
            for f, coeffs in items:
                if f > fmin * (1 + 1e-6) + 1e-300:
                    continue
                vec = [sum((sub_rows[i][j] * coeffs[j] for j in range(r)), zero) for i in range(m)]
                n2 = _dot(vec, vec, zero)
                if best is None or _less((n2, coeffs), best[0], backend):
                    best = ((n2, coeffs), vec)
        if best is not None:
            break
        r2 *= 4.0
    if best is None:
        return None
    (n2, coeffs), vec = best
    return ShortVector(coeffs, tuple(vec), n2, _sqrt(n2, backend))


def _enumerate_gram(G: np.ndarray, radius_sq: float, limit: int):
    """Fincke-Pohst over a Gram matrix via its Cholesky factor."""
    R = np.linalg.cholesky(G).T  # G = R^T R, R upper triangular
    return _enumerate(R.T.tolist(), radius_sq, limit)


def stratum_shortest(L, n: int, k: int, bits: int | None = None) -> ShortVector | None:
    return strata_shortest(L, n, (k,), bits).get(k)


def shortest_length_float(matrix) -> float:
    """Fast shortest-vector length for a float basis (columns)."""
    return _search(np.asarray(matrix, dtype=np.float64))[0].length


def in_K_eps(L, eps) -> bool:
    if eps <= 0:
        raise ValueError("eps must be positive")
    sv = L if isinstance(L, ShortVector) else shortest_vector(L)
    length = sv.length
    if isinstance(length, PrecisionReal):
        return length.value >= to_mpf(eps, length.mantissa_bits)
    if isinstance(length, Fraction):
        if isinstance(eps, (int, Fraction)):
            return length >= eps
        with mpmath.workprec(DEFAULT_BITS):
            return to_mpf(length) >= to_mpf(eps)
    return length >= float(eps)


def lattice_report(L, eps_ladder: Sequence = ()) -> dict:
    sv = shortest_vector(L)
    if isinstance(L, FlowedLattice):
        det = L.det_log()
        det_json = {"log_abs": det.to_json(), "sign": det.sign}
        dim = L.base.dimension
    else:
        d = L.det()
        det_json = str(d) if isinstance(d, Fraction) else d.to_decimal(30)
        dim = L.dimension
    return {
        "dimension": dim,
        "det": det_json,
        "shortest": sv.to_json(),
        "in_K_eps": {str(e): in_K_eps(sv, e) for e in eps_ladder},
    }
