"""Exterior algebra over Z^{n+1} and the R_0 c(w) inequalities.

Index sets are 1-based tuples, strictly increasing, drawn from {1..n+1}.
The contraction coefficients use the convention

    c(w)_i[J] = <e_i ^ e_J, w> = (-1)^{#{j in J : j < i}} w_{{i} u J},

that is, the sign of moving i to the front of {i} u J.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np

from .numerics import (
    DEFAULT_BITS,
    LogValue,
    PrecisionReal,
    max_bits,
    to_mpf,
)


class DegreeError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# multivectors


@dataclass(frozen=True)
class MultiVector:
    dim: int
    degree: int
    terms: tuple[tuple[tuple[int, ...], object], ...] = field(default=())

    def __post_init__(self):
        clean = {}
        for idx, c in self.terms:
            idx = tuple(idx)
            if len(idx) != self.degree:
                raise DegreeError(f"index set {idx} has the wrong order for degree {self.degree}")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index set {idx} is not strictly increasing")
            if idx and (idx[0] < 1 or idx[-1] > self.dim):
                raise ValueError(f"index set {idx} outside 1..{self.dim}")
            clean[idx] = clean.get(idx, 0) + c
        object.__setattr__(
            self, "terms", tuple(sorted((k, v) for k, v in clean.items() if v != 0))
        )

    @classmethod
    def from_dict(cls, dim: int, degree: int, coeffs: Mapping) -> "MultiVector":
        return cls(dim, degree, tuple(coeffs.items()))

    def as_dict(self) -> dict:
        return dict(self.terms)

    def __getitem__(self, idx) -> object:
        return self.as_dict().get(tuple(idx), 0)

    def __add__(self, other: "MultiVector") -> "MultiVector":
        _same_shape(self, other)
        return MultiVector(self.dim, self.degree, self.terms + other.terms)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "MultiVector":
        return MultiVector(self.dim, self.degree, tuple((k, c * v) for k, v in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def norm_sq(self):
        return sum((v * v for _, v in self.terms), 0)

    def to_json(self) -> dict:
        return {"degree": self.degree,
                "terms": [{"indices": list(k), "coeff": _coeff_json(v)} for k, v in self.terms]}


def _coeff_json(v):
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def _same_shape(u, v):
    if u.dim != v.dim or u.degree != v.degree:
        raise DegreeError("multivectors differ in dimension or degree")


def basis_vector(i: int, dim: int) -> MultiVector:
    return MultiVector(dim, 1, (((i,), 1),))


def vector(coeffs: Sequence) -> MultiVector:
    dim = len(coeffs)
    return MultiVector(dim, 1, tuple(((i + 1,), c) for i, c in enumerate(coeffs)))


def scalar(c, dim: int) -> MultiVector:
    return MultiVector(dim, 0, (((), c),))


def _merge_sign(I, J) -> tuple[int, tuple[int, ...]] | None:
    if set(I) & set(J):
        return None
    inversions = sum(1 for i in I for j in J if i > j)
    return (-1 if inversions % 2 else 1), tuple(sorted(I + J))


def wedge(u: MultiVector, v: MultiVector) -> MultiVector:
    if u.dim != v.dim:
        raise DegreeError("dimension mismatch")
    if u.degree + v.degree > u.dim:
        raise DegreeError(f"degree {u.degree + v.degree} exceeds dimension {u.dim}")
    out = {}
    for I, a in u.terms:
        for J, b in v.terms:
            m = _merge_sign(I, J)
            if m is None:
                continue
            sign, K = m
            out[K] = out.get(K, 0) + sign * a * b
    return MultiVector.from_dict(u.dim, u.degree + v.degree, out)


def wedge_all(vectors: Iterable[MultiVector]) -> MultiVector:
    vectors = list(vectors)
    acc = scalar(1, vectors[0].dim)
    for v in vectors:
        acc = wedge(acc, v)
    return acc


def pairing(u: MultiVector, v: MultiVector):
    """Standard inner product <u, v> in the e_I basis."""
    _same_shape(u, v)
    d = v.as_dict()
    return sum((c * d.get(k, 0) for k, c in u.terms), 0)


# ---------------------------------------------------------------------------
# coefficient map and R_0


def contraction_sign(i: int, J: Sequence[int]) -> int:
    return -1 if sum(1 for j in J if j < i) % 2 else 1


def c_of_w(w: MultiVector) -> list[MultiVector]:
    """c(w)_i for i = 1..n+1, each a degree j-1 multivector on {1..n}."""
    dim = w.dim
    n = dim - 1
    j = w.degree
    if not 1 <= j <= dim:
        raise DegreeError("c(w) needs 1 <= degree <= n + 1")
    out = []
    for i in range(1, dim + 1):
        coeffs = {}
        for K, val in w.terms:
            if i not in K:
                continue
            J = tuple(x for x in K if x != i)
            if J and J[-1] > n:
                continue
            coeffs[J] = contraction_sign(i, J) * val
        out.append(MultiVector.from_dict(dim, j - 1, coeffs))
    return out


def r0_matrix(a: Sequence) -> list[list]:
    """The n x (n+1) matrix (a | I_n)."""
    n = len(a)
    return [[a[r]] + [1 if c == r else 0 for c in range(n)] for r in range(n)]


def r0_c(a: Sequence, w: MultiVector) -> list[dict]:
    """Rows (R_0 c(w))_r = a_r c(w)_1 + c(w)_{r+1}, as coefficient maps."""
    n = len(a)
    if w.dim != n + 1:
        raise DegreeError("w must live in dimension n + 1")
    c = c_of_w(w)
    rows = []
    for r in range(n):
        row = {}
        for J, v in c[0].terms:
            row[J] = row.get(J, 0) + a[r] * v
        for J, v in c[r + 1].terms:
            row[J] = row.get(J, 0) + v
        rows.append(row)
    return rows


def r0_c_norm_sq(a: Sequence, w: MultiVector):
    rows = r0_c(a, w)
    return sum((v * v for row in rows for v in row.values()), 0)


def r0_c_norm(a: Sequence, w: MultiVector, bits: int = DEFAULT_BITS):
    """Euclidean norm of R_0 c(w); exact when it is rational."""
    a = [_coerce(x) for x in a]
    sq = r0_c_norm_sq(a, w)
    if isinstance(sq, (int, Fraction)):
        sq = Fraction(sq)
        num, den = sq.numerator, sq.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            return Fraction(rn, rd)
        return _sqrt_pr(sq, bits)
    return _sqrt_pr(sq, max(bits, max_bits(a)))


def _sqrt_pr(x, bits):
    with mpmath.workprec(bits):
        return PrecisionReal(mpmath.sqrt(to_mpf(x, bits)), bits)


def _coerce(x):
    if isinstance(x, (int, Fraction, PrecisionReal)):
        return x
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        from .numerics import parse_real

        return parse_real(x)
    return PrecisionReal(x)


# ---------------------------------------------------------------------------
# flow expansion


@dataclass(frozen=True)
class FlowExpansion:
    """g_t u_y w split as sum_I A_I e_I + sum_J B_J e_J ^ e_{n+1}."""

    plain: dict        # I (n+1 not in I) -> LogValue
    mixed: dict        # J subset of 1..n   -> LogValue (coefficient of e_J ^ e_{n+1})
    bits: int

    def coefficient(self, K: tuple[int, ...], n: int):
        """Signed mpf coefficient of e_K in the standard basis."""
        if K and K[-1] == n + 1:
            lv = self.mixed.get(K[:-1])
        else:
            lv = self.plain.get(K)
        return mpmath.mpf(0) if lv is None else lv.to_mpf(self.bits)

    def norm_sq(self):
        with mpmath.workprec(self.bits):
            return mpmath.fsum(lv.to_mpf(self.bits) ** 2
                               for lv in list(self.plain.values()) + list(self.mixed.values()))


def flow_expansion(w: MultiVector, y: Sequence, t: Sequence, bits: int = DEFAULT_BITS) -> FlowExpansion:
    n = w.dim - 1
    j = w.degree
    if not 1 <= j <= n:
        raise DegreeError("flow_expansion needs 1 <= degree <= n")
    if len(y) != n or len(t) != n:
        raise ValueError("y and t need n entries")
    y = [_coerce(v) for v in y]
    bits = max(bits, max_bits(y), max_bits([_coerce(v) if not isinstance(v, (int, float)) else Fraction(v) for v in t]))
    with mpmath.workprec(bits + 32):
        ts = [to_mpf(v, bits + 32) for v in t]
        if any(v < 0 for v in ts):
            raise ValueError("flow entries must be nonnegative")
        total = mpmath.fsum(ts)
        ys = [to_mpf(v, bits + 32) for v in y] + [mpmath.mpf(1)]
        plain = {}
        for I, val in w.terms:
            if I[-1] <= n:
                s = -mpmath.fsum(ts[i - 1] for i in I)
                plain[I] = LogValue.of(PrecisionReal(to_mpf(val, bits + 32), bits + 32), bits + 32).scaled(s)
        c = c_of_w(w)
        sign = -1 if (j - 1) % 2 else 1
        mixed = {}
        Js = set()
        for ci in c:
            Js.update(J for J, _ in ci.terms)
        for J in sorted(Js):
            inner = mpmath.fsum(ys[i] * to_mpf(c[i][J], bits + 32) for i in range(n + 1) if c[i][J])
            if inner == 0:
                continue
            s = total - mpmath.fsum(ts[i - 1] for i in J)
            mixed[J] = LogValue.of(PrecisionReal(sign * inner, bits + 32), bits + 32).scaled(s)
    return FlowExpansion(plain, mixed, bits)


def flow_matrix(y: Sequence, t: Sequence, bits: int = DEFAULT_BITS):
    """g_t u_y as an mpmath matrix (for oracles and reports)."""
    n = len(y)
    with mpmath.workprec(bits):
        M = mpmath.eye(n + 1)
        for i in range(n):
            M[n, i] = to_mpf(_coerce(y[i]), bits)
        ts = [to_mpf(v, bits) for v in t]
        total = mpmath.fsum(ts)
        for i in range(n):
            for c in range(n + 1):
                M[i, c] *= mpmath.exp(-ts[i])
        for c in range(n + 1):
            M[n, c] *= mpmath.exp(total)
    return M


def _det(rows):
    """Determinant by partial-pivot elimination (mpmath.det trips on zero columns)."""
    m = [list(r) for r in rows]
    size = len(m)
    if size == 0:
        return mpmath.mpf(1)
    det = mpmath.mpf(1)
    for c in range(size):
        piv = max(range(c, size), key=lambda r: abs(m[r][c]))
        if m[piv][c] == 0:
            return mpmath.mpf(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, size):
            f = m[r][c] / m[c][c]
            if f:
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return det


def compound_action(M, w: MultiVector, bits: int = DEFAULT_BITS) -> dict:
    """Apply the j-th compound of M to w: coefficient of e_I is
    sum_K det(M[I, K]) w_K."""
    dim = w.dim
    out = {}
    with mpmath.workprec(bits):
        for I in combinations(range(1, dim + 1), w.degree):
            s = mpmath.mpf(0)
            for K, val in w.terms:
                sub = [[M[r - 1, c - 1] for c in K] for r in I]
                s += _det(sub) * to_mpf(val, bits)
            if s != 0:
                out[I] = s
    return out


# ---------------------------------------------------------------------------
# exhaustive check of the contraction bound


@dataclass(frozen=True)
class Violation:
    a: tuple
    w: MultiVector
    norm_sq: object


def _index_sets(dim, j):
    return list(combinations(range(1, dim + 1), j))


def r0_c_linear_map(a: Sequence, n: int, j: int) -> tuple[list, list, list[list]]:
    """Matrix of w -> stacked R_0 c(w) on degree-j multivectors."""
    dim = n + 1
    src = _index_sets(dim, j)
    tgt = [(r, J) for r in range(n) for J in combinations(range(1, n + 1), j - 1)]
    pos = {key: i for i, key in enumerate(tgt)}
    mat = [[0] * len(src) for _ in tgt]
    for col, K in enumerate(src):
        w = MultiVector(dim, j, ((K, 1),))
        for r, row in enumerate(r0_c(a, w)):
            for J, v in row.items():
                mat[pos[(r, J)]][col] += v
    return src, tgt, mat


def check_rank2_bound(n: int, j: int, coeff_bound: int, a_list: Sequence[Sequence],
                      budget: int = 50_000_000) -> list[Violation]:
    """All nonzero integer degree-j multivectors with coefficients in
    [-b, b] and ||R_0 c(w)|| < 1, for each a in ``a_list``."""
    if j < 2:
        raise ValueError("the bound is only claimed for degree >= 2")
    if j > n + 1:
        raise DegreeError("degree exceeds n + 1")
    dim = n + 1
    src = _index_sets(dim, j)
    count = (2 * coeff_bound + 1) ** len(src)
    if count * max(1, len(a_list)) > budget * 100 or count > budget:
        raise BudgetExceeded(f"{count} multivectors exceed the budget of {budget}")
    rng = np.arange(-coeff_bound, coeff_bound + 1, dtype=np.int64)
    W = np.array(list(product(rng, repeat=len(src))), dtype=np.int64)
    W = W[np.any(W != 0, axis=1)]
    violations = []
    for a in a_list:
        a = tuple(Fraction(x) for x in a)
        _, _, mat = r0_c_linear_map(a, n, j)
        Mf = np.array([[float(v) for v in row] for row in mat], dtype=np.float64)
        vals = W @ Mf.T
        nsq = np.einsum("ij,ij->i", vals, vals)
        for idx in np.nonzero(nsq < 1 + 1e-9)[0].tolist():
            w = MultiVector(dim, j, tuple((K, int(c)) for K, c in zip(src, W[idx]) if c))
            exact = r0_c_norm_sq(a, w)
            if exact < 1:
                violations.append(Violation(a, w, exact))
    return violations


# ---------------------------------------------------------------------------
# degree-one condition search


@dataclass(frozen=True)
class ConditionResult:
    violation: MultiVector | None
    log_lhs: float | None       # log of the max on the left side for the violation
    log_rhs: float              # -d t
    exhaustive: bool
    p1_range: int
    certified_v: object = None


def condition_equi_search(a: Sequence, d, t: Sequence, k: int | None = None,
                          budget: int = 2_000_000, allow_partial: bool = True,
                          bits: int = DEFAULT_BITS) -> ConditionResult:
    """Search degree-one w = (p_1..p_n, p_0) with

        e^{-t_i} |p_i| < e^{-d t}  (i <= n)   and   e^t ||R_0 c(w)|| < e^{-d t}.

    Such a w violates the condition at (d, t).  Every coordinate is pinned
    by p_1: p_{r+1} must sit within e^{-(1+d)t} of -a_r p_1, so the search
    runs over p_1 up to the implied bound, plus continued-fraction seeds.
    """
    if hasattr(d, "c"):
        d = d.c
    a = [_coerce(x) for x in a]
    n = len(a)
    if len(t) != n:
        raise ValueError("t needs n entries")
    bits = max(bits, max_bits(a))
    with mpmath.workprec(bits):
        ts = [to_mpf(v, bits) for v in t]
        dm = to_mpf(d, bits)
        total = mpmath.fsum(ts)
        log_rhs = -dm * total
        log_B = -(1 + dm) * total           # bound on each |a_r p_1 + p_{r+1}|
        log_box = [ti - dm * total for ti in ts]
        B = mpmath.exp(log_B)
        af = [to_mpf(x, bits) for x in a]
        # p_1 bound from its own box and from rows with a_r != 0
        lim = mpmath.exp(log_box[0])
        for r in range(n - 1):
            if af[r] != 0:
                lim = min(lim, (mpmath.exp(log_box[r + 1]) + B) / abs(af[r]))
        P = int(mpmath.floor(lim)) if lim < 2 ** 62 else 2 ** 62

    def check(p1: int):
        """Exact/high-precision test; returns the w and its lhs, or None."""
        ps = []
        with mpmath.workprec(bits + 64):
            for r in range(n):
                target = -af[r] * p1
                lo = int(mpmath.ceil(target - B))
                hi = int(mpmath.floor(target + B))
                opts = [v for v in range(lo, hi + 1)]
                if not opts:
                    return None
                ps.append(opts)
        best = None
        for combo in product(*ps):
            w = (p1,) + tuple(combo[:-1]) + (combo[-1],)
            if not any(w):
                continue
            coeffs = list(w[:n]) + [w[n]]  # (p_1..p_n, p_0)
            with mpmath.workprec(bits + 64):
                if any(coeffs[i] and mpmath.log(abs(coeffs[i])) - ts[i] >= log_rhs for i in range(n)):
                    continue
                rows = [a[r] * p1 + coeffs[r + 1] if r < n - 1 else a[r] * p1 + coeffs[n] for r in range(n)]
                nsq = sum((to_mpf(v, bits + 64) ** 2 for v in rows), mpmath.mpf(0))
                if nsq == 0:
                    lhs_r = -mpmath.inf
                else:
                    lhs_r = total + mpmath.log(nsq) / 2
                if lhs_r >= log_rhs:
                    continue
                parts = [lhs_r] + [mpmath.log(abs(coeffs[i])) - ts[i] for i in range(n) if coeffs[i]]
                lhs = max(parts)
            if best is None or lhs < best[1]:
                best = (coeffs, lhs)
        return best

    exhaustive = P <= budget
    top = min(P, budget)
    found = None
    # vectorized screen over p_1 in [0, top]
    if top >= 0:
        afl = np.array([float(x) for x in af])
        Bf = float(B)
        for start in range(0, top + 1, 1 << 18):
            p1 = np.arange(start, min(top, start + (1 << 18) - 1) + 1, dtype=np.float64)
            v = p1[:, None] * afl[None, :]
            dist = np.abs(v - np.rint(v)).max(axis=1)
            slack = 1e-12 * (1 + np.abs(v).max(axis=1))
            cand = np.nonzero(dist <= Bf + slack)[0]
            for i in cand.tolist():
                got = check(int(p1[i]))
                if got is not None and (found is None or got[1] < found[1]):
                    found = got
    if not exhaustive:
        if not allow_partial:
            raise BudgetExceeded(f"p_1 range {P} exceeds budget {budget}")
        from .constructions import cf_of_real

        seeds = set()
        for x in a:
            if isinstance(x, Fraction) and x.denominator == 1:
                continue
            for _, q in cf_of_real(x, q_bound=P).convergents:
                seeds.add(q)
        for q in sorted(seeds):
            if q <= P:
                got = check(q)
                if got is not None and (found is None or got[1] < found[1]):
                    found = got
    cert = None
    if found is not None and k is not None:
        from .correspondence import v_from_c

        try:
            cert = v_from_c(n, k, d)
        except ValueError:
            cert = None
    if found is None:
        return ConditionResult(None, None, float(log_rhs), exhaustive, P, None)
    coeffs, lhs = found
    w = vector(coeffs)
    return ConditionResult(w, float(lhs), float(log_rhs), exhaustive, P, cert)
