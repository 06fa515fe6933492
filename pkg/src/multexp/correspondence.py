"""Translating approximation witnesses into flow excursions and back.

A witness (x, z) = (<q,y> + p, q) with |x| <= Pi_+(z)^(-v/n) corresponds to
a flow g_t, t in R_+^n, under which the lattice vector g_t (z, x) has every
coordinate below e^(-c t), where c = (v - n) / (k v + n) and k is the number
of nonzero entries of z.  ``estimate_gamma`` scans integer flows for the best
such rate per stratum and ``omega_times_from_gamma`` turns rates back into
an exponent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

import mpmath

from .lattice import FlowVector, apply_flow, strata_shortest, u_of_y
from .numerics import (
    DEFAULT_BITS,
    LogValue,
    PrecisionReal,
    max_bits,
    to_mpf,
)

LOG_TOL = 1e-9
RATE_STEP = Fraction(1, 100)


class WitnessError(ValueError):
    """A witness fails one of the required inequalities."""


# ---------------------------------------------------------------------------
# contraction rates


def _exact(v):
    return isinstance(v, (int, Fraction))


@dataclass(frozen=True)
class ContractionRate:
    n: int
    k: int
    v: object
    c: object


def c_from_v(n: int, k: int, v) -> ContractionRate:
    """c = (v - n) / (k v + n); exact for rational v."""
    _check_nk(n, k)
    if _exact(v):
        v = Fraction(v)
        if v < n:
            raise ValueError(f"v = {v} is below n = {n}")
        return ContractionRate(n, k, v, (v - n) / (k * v + n))
    vm = to_mpf(v)
    if vm < n:
        raise ValueError(f"v = {v} is below n = {n}")
    with mpmath.workprec(DEFAULT_BITS):
        return ContractionRate(n, k, v, PrecisionReal((vm - n) / (k * vm + n)))


def v_from_c(n: int, k: int, c):
    """Inverse map v = (n + n c) / (1 - k c); requires 0 <= c < 1/k."""
    _check_nk(n, k)
    if _exact(c):
        c = Fraction(c)
        if c < 0 or k * c >= 1:
            raise ValueError(f"c = {c} outside [0, 1/{k})")
        return (n + n * c) / (1 - k * c)
    cm = to_mpf(c)
    if cm < 0 or k * cm >= 1:
        raise ValueError(f"c = {c} outside [0, 1/{k})")
    with mpmath.workprec(DEFAULT_BITS):
        return PrecisionReal((n + n * cm) / (1 - k * cm))


def _check_nk(n, k):
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")


# ---------------------------------------------------------------------------
# witness <-> flow round trip


@dataclass(frozen=True)
class ForwardWitness:
    flow: FlowVector
    total: object
    c: object
    k: int
    margins: tuple  # log(e^{-ct}) - log(lhs) for each inequality, >= -LOG_TOL

    @property
    def t(self):
        return self.flow.t


def _log_abs(x, bits):
    lv = LogValue.of(x, bits)
    return None if lv.is_zero else lv.log_magnitude


def forward_witness(x, z: Sequence[int], n: int, v, bits: int = DEFAULT_BITS) -> ForwardWitness:
    """Flow t with e^{(1 - k c) t} = Pi_+(z) and t_i = c t + log|z_i| on the
    support of z; checks max(e^t |x|, e^{-t_i}|z_i|) <= e^{-c t}."""
    z = tuple(int(q) for q in z)
    if len(z) != n:
        raise ValueError("z must have n entries")
    k = sum(1 for q in z if q)
    if k == 0:
        raise WitnessError("z must be nonzero")
    rate = c_from_v(n, k, v)
    bits = max(bits, max_bits([x]))
    with mpmath.workprec(bits + 32):
        c = to_mpf(rate.c, bits + 32)
        vv = to_mpf(v, bits + 32)
        logs = [mpmath.log(abs(q)) if q else None for q in z]
        log_pi = mpmath.fsum(l for l in logs if l is not None)
        lx = _log_abs(x, bits + 32)
        bound = -vv / n * log_pi
        if lx is not None and lx > bound + LOG_TOL:
            raise WitnessError(
                f"|x| <= Pi_+(z)^(-v/n) fails: log|x| = {mpmath.nstr(lx, 12)} > {mpmath.nstr(bound, 12)}"
            )
        total = log_pi / (1 - k * c)
        ts = [c * total + l if l is not None else mpmath.mpf(0) for l in logs]
        # tiny negative entries from rounding when Pi_+ = 1
        ts = [t if t > 0 else mpmath.mpf(0) for t in ts]
        target = -c * total
        margins = [target - (total + lx) if lx is not None else mpmath.inf]
        for l, t in zip(logs, ts):
            margins.append(mpmath.inf if l is None else target - (l - t))
        for mg in margins:
            if mg < -LOG_TOL:
                raise WitnessError(f"flow inequality violated by {mpmath.nstr(-mg, 6)} in log")
        flow = FlowVector(tuple(PrecisionReal(t, bits) for t in ts))
        return ForwardWitness(flow, PrecisionReal(total, bits), rate.c, k,
                              tuple(float(m) for m in margins))


@dataclass(frozen=True)
class BackwardCertificate:
    v: object              # certified exponent v_from_c(n, k, c)
    c: object
    k: int
    log_pi_bound: float    # sum over indices with t_i >= c t of (t_i - c t)
    direct_quality: float  # n * -log|x| / log Pi_+(z) (inf when x = 0)
    restriction_indices: tuple[int, ...]


def backward_witness(t, member, n: int, k: int, c, bits: int = DEFAULT_BITS) -> BackwardCertificate:
    """Certify |x| <= Pi_+(z)^(-v/n) with v = (n + n c)/(1 - k c) from a
    flow t under which (x, z) satisfies the contraction inequalities at rate
    c and at least k of the t_i are >= c t."""
    _check_nk(n, k)
    if not isinstance(t, FlowVector):
        t = FlowVector(tuple(t))
    x, z = member
    z = tuple(int(q) for q in z)
    if len(z) != n or len(t.t) != n:
        raise ValueError("dimension mismatch")
    v_cert = v_from_c(n, k, c)
    bits = max(bits, max_bits(list(t.t) + [x]))
    with mpmath.workprec(bits + 32):
        cm = to_mpf(c, bits + 32)
        ts = [to_mpf(v, bits + 32) for v in t.t]
        total = mpmath.fsum(ts)
        ct = cm * total
        indices = tuple(i for i, ti in enumerate(ts) if ti >= ct - LOG_TOL)
        if len(indices) < k:
            raise WitnessError(
                f"restriction needs t_i >= c t for at least {k} indices, found {len(indices)}"
            )
        lx = _log_abs(x, bits + 32)
        if lx is not None and total + lx > -ct + LOG_TOL:
            raise WitnessError("e^t |x| exceeds e^(-c t)")
        for q, ti in zip(z, ts):
            if q and mpmath.log(abs(q)) - ti > -ct + LOG_TOL:
                raise WitnessError("e^(-t_i)|z_i| exceeds e^(-c t)")
        # |z_i|_+ <= e^{max(0, t_i - ct)}; only t_i >= ct contribute
        log_pi_bound = mpmath.fsum(max(ti - ct, 0) for ti in ts)
        if log_pi_bound > (1 - k * cm) * total + LOG_TOL:
            raise WitnessError("Pi_+ bound exceeds e^{(1-kc)t}")
        log_pi = mpmath.fsum(mpmath.log(abs(q)) for q in z if abs(q) > 1)
        if lx is None:
            direct = math.inf
        elif log_pi == 0:
            direct = math.nan
        else:
            direct = float(-n * lx / log_pi)
    return BackwardCertificate(v_cert, c, k, float(log_pi_bound), direct, indices)


# ---------------------------------------------------------------------------
# gamma estimates


@dataclass(frozen=True)
class GammaEntry:
    k: int
    gamma: Fraction
    certified_v: object
    witness_t: tuple[int, ...] | None
    witness_vector: tuple[int, ...] | None
    witness_log_norm: float | None
    boundary: bool
    degenerate_z: bool

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "gamma": str(self.gamma),
            "gamma_float": float(self.gamma),
            "certified_v": _num_json(self.certified_v),
            "witness_t": list(self.witness_t) if self.witness_t else None,
            "witness_vector": [str(v) for v in self.witness_vector] if self.witness_vector else None,
            "witness_log_norm": self.witness_log_norm,
            "boundary": self.boundary,
            "degenerate_z": self.degenerate_z,
        }


@dataclass(frozen=True)
class GammaTable:
    n: int
    T_max: int
    entries: tuple[GammaEntry, ...]
    flows_scanned: int

    def gamma(self, k: int) -> Fraction:
        return self.entries[k - 1].gamma

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "T_max": self.T_max,
            "flows_scanned": self.flows_scanned,
            "per_k": [e.to_json() for e in self.entries],
        }


def _num_json(v):
    if v is None:
        return None
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    f = float(v)
    if math.isinf(f):
        return "inf"
    return f


def integer_flows(n: int, T_max: int, T_min: int | None = None):
    """Integer t in Z_+^n with T_min <= sum(t) <= T_max, in lex order."""
    T_min = (T_max + 1) // 2 if T_min is None else T_min
    for total in range(T_min, T_max + 1):
        for head in product(range(total + 1), repeat=n - 1):
            s = sum(head)
            if s <= total:
                yield tuple(head) + (total - s,)


def estimate_gamma(y, T_max: int, T_min: int | None = None, bits: int | None = None) -> GammaTable:
    """Best certified decay rate per stratum over integer flows.

    For every integer t with total in [T_min, T_max] (default: the upper
    half of the range) and each k, the shortest stratum vector of
    g_t u_y Z^{n+1} of length delta certifies any grid rate
    c <= min(-log(delta)/t, (k-th largest t_i)/t) below 1/k.
    """
    from .witnesses import coerce_vector

    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    y = coerce_vector(y)
    n = len(y)
    if bits is None:
        bits = max(DEFAULT_BITS, 128 + int(3 * T_max / math.log(2)))
    # the flowed entries only need ~bits of mantissa; rounding a very long
    # input keeps the scan fast
    y_work = tuple(v if isinstance(v, Fraction) or v.mantissa_bits <= bits
                   else PrecisionReal(v.value, bits) for v in y)
    exact = all(isinstance(v, Fraction) for v in y)
    base = u_of_y(y_work)
    best: dict[int, tuple] = {}
    boundary = {k: False for k in range(1, n + 1)}
    scanned = 0
    for t in integer_flows(n, T_max, T_min):
        total = sum(t)
        if total == 0:
            continue
        scanned += 1
        fl = apply_flow(base, t, bits=DEFAULT_BITS)
        strata = strata_shortest(fl, n, bits=bits)
        order = sorted(t, reverse=True)
        for k, sv in strata.items():
            length = sv.length
            with mpmath.workprec(bits):
                lm = to_mpf(length, bits)
                rate = math.inf if lm == 0 else float(-mpmath.log(lm) / total)
            restrict = Fraction(order[k - 1], total)
            cap = Fraction(1, k) - RATE_STEP
            raw = min(rate, float(restrict))
            q, p = sv.coeffs[:n], sv.coeffs[n]
            if exact and sum(qi * yi for qi, yi in zip(q, y)) + p == 0:
                boundary[k] = True  # an exact relation: rates approach 1/k
            if raw < 0:
                continue
            grid = min(Fraction(math.floor(raw / float(RATE_STEP) + 1e-12)) * RATE_STEP, cap)
            grid = min(grid, restrict)
            if grid < 0:
                continue
            key = (grid, rate)
            cur = best.get(k)
            if cur is None or key > cur[0]:
                lognorm = None if rate == math.inf else -rate * total
                best[k] = (key, t, sv.coeffs, lognorm)
    entries = []
    for k in range(1, n + 1):
        if k in best:
            (grid, _), t, coeffs, lognorm = best[k]
            degenerate = all(abs(q) <= 1 for q in coeffs[:n])
            entries.append(GammaEntry(k, grid, v_from_c(n, k, grid), t, coeffs, lognorm,
                                      boundary[k], degenerate))
        else:
            entries.append(GammaEntry(k, Fraction(0), Fraction(n), None, None, None,
                                      boundary[k], False))
    return GammaTable(n, T_max, tuple(entries), scanned)


def omega_times_from_gamma(table) -> object:
    """max over k of (n + n gamma_k) / (1 - k gamma_k); boundary -> inf."""
    if isinstance(table, GammaTable):
        n = table.n
        gammas = [e.gamma for e in table.entries]
        flags = [e.boundary for e in table.entries]
    else:
        gammas = list(table)
        n = len(gammas)
        flags = [False] * n
    best = None
    for k, (g, flag) in enumerate(zip(gammas, flags), start=1):
        if flag or (k * g >= 1):
            return math.inf
        val = v_from_c(n, k, g)
        if best is None or val > best:
            best = val
    return best
