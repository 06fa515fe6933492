"""Monte Carlo probes of sublevel measures and of lattice escape under the flow.

All samples come from a seeded ``numpy.random.Generator`` over the unit
box, so every report is reproducible from (seed, parameters).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .lattice import shortest_length_float
from .polynomials import Polynomial, PolynomialMap

MIN_SUBLEVEL_SAMPLES = 10_000
MAX_FLOW_DIM = 3
WILSON_Z = 1.959963984540054
DEFAULT_ENUM_BUDGET = 5_000_000


class BudgetExceeded(RuntimeError):
    pass


def wilson_interval(hits: int, total: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if total <= 0:
        return 0.0, 1.0
    p = hits / total
    denom = 1 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if hits == 0 else max(0.0, min(p, centre - half))
    hi = 1.0 if hits == total else min(1.0, max(p, centre + half))
    return lo, hi


def _halfwidth(hits, total):
    lo, hi = wilson_interval(hits, total)
    return (hi - lo) / 2


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Least-squares slope of log y against log x over positive y."""
    pts = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if y > 0 and x > 0]
    if len(pts) < 2:
        return None
    lx, ly = np.array(pts).T
    if np.ptp(lx) == 0:
        return None
    return float(np.polyfit(lx, ly, 1)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


# ---------------------------------------------------------------------------
# sublevel sets


@dataclass(frozen=True)
class GoodFunctionReport:
    function: str
    degree: int
    box: tuple[tuple[float, float], ...]
    eps_ladder: tuple[float, ...]
    fractions: tuple[float, ...]
    halfwidths: tuple[float, ...]
    samples: int
    slope: float | None
    sup_norm: float

    def to_json(self) -> dict:
        return {
            "function": self.function,
            "degree": self.degree,
            "box": [list(b) for b in self.box],
            "eps_ladder": list(self.eps_ladder),
            "fractions": list(self.fractions),
            "ci_halfwidths": list(self.halfwidths),
            "samples": self.samples,
            "slope": self.slope,
            "sup_norm": self.sup_norm,
        }


def _box_samples(box, count, seed):
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    u = _rng(seed).random((count, len(box)))
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def sublevel_fraction(f: Polynomial, box: Sequence[Sequence[float]] | None = None,
                      eps_ladder: Sequence[float] = tuple(2.0 ** -k for k in range(2, 13)),
                      samples: int = 100_000, seed: int = 0) -> GoodFunctionReport:
    """Fraction of box points with |f| < eps, for each eps.

    The slope is fitted over the decaying range: ladder entries whose
    fraction lies strictly between 0 and 1/2.
    """
    if f.is_constant():
        raise ValueError("constant polynomials have no sublevel decay")
    if samples < MIN_SUBLEVEL_SAMPLES:
        raise ValueError(f"need at least {MIN_SUBLEVEL_SAMPLES} samples")
    box = tuple(tuple(map(float, b)) for b in (box or [(0.0, 1.0)] * f.nvars))
    if len(box) != f.nvars:
        raise ValueError("box dimension does not match the polynomial")
    X = _box_samples(box, samples, seed)
    vals = np.abs(f.eval_array(X))
    eps = tuple(float(e) for e in eps_ladder)
    hits = [int(np.count_nonzero(vals < e)) for e in eps]
    fr = tuple(h / samples for h in hits)
    decaying = [(e, p) for e, p in zip(eps, fr) if 0 < p < 0.5]
    slope = fit_loglog([e for e, _ in decaying], [p for _, p in decaying])
    return GoodFunctionReport(f.text, f.degree, box, eps, fr,
                              tuple(_halfwidth(h, samples) for h in hits), samples, slope,
                              float(vals.max()))


# ---------------------------------------------------------------------------
# escape under the flow


def flow_basis(y: Sequence[float], t: Sequence[float]) -> np.ndarray:
    """Columns of g_t u_y in float."""
    n = len(y)
    M = np.eye(n + 1)
    M[n, :n] = y
    scale = np.exp(np.concatenate([-np.asarray(t, dtype=np.float64), [float(np.sum(t))]]))
    return scale[:, None] * M


def _deltas(points: np.ndarray, t: Sequence[float]) -> np.ndarray:
    return np.array([shortest_length_float(flow_basis(p, t)) for p in points])


def _map_points(f: PolynomialMap, count: int, seed: int) -> np.ndarray:
    X = _box_samples([(0.0, 1.0)] * f.nvars, count, seed)
    return np.stack([p.eval_array(X) for p in f.components], axis=1)


def _check_flow_dim(n):
    if n > MAX_FLOW_DIM:
        raise ValueError(f"flows are probed for n <= {MAX_FLOW_DIM}")


def _budget(samples, flows, n, budget):
    cost = samples * flows * (n + 1) ** 3
    if cost > budget * 64:
        raise BudgetExceeded(f"{samples} samples x {flows} flows exceeds the budget")


def escape_fraction(f: PolynomialMap, t: Sequence[float], eps: float, samples: int = 2000,
                    seed: int = 0, budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """Fraction of x in [0,1]^d with delta(g_t u_{f(x)} Z^{n+1}) < eps."""
    _check_flow_dim(f.dim)
    if len(t) != f.dim:
        raise ValueError("t needs one entry per component")
    _budget(samples, 1, f.dim, budget)
    d = _deltas(_map_points(f, samples, seed), t)
    return float(np.count_nonzero(d < eps)) / samples


@dataclass(frozen=True)
class EscapeRow:
    t: tuple[float, ...]
    epsilon: float
    fraction: float
    ci_halfwidth: float
    samples: int

    @property
    def t_total(self) -> float:
        return float(sum(self.t))


@dataclass(frozen=True)
class EscapeReport:
    map_text: str
    flows: tuple[tuple[float, ...], ...]
    eps_ladder: tuple[float, ...]
    rows: tuple[EscapeRow, ...]
    samples: int
    seed: int
    exponents: dict = field(default_factory=dict)   # t_total -> fitted alpha

    def fractions_for(self, t) -> list[float]:
        t = tuple(t)
        return [r.fraction for r in self.rows if r.t == t]

    def monotone(self) -> bool:
        """Fractions never increase as eps shrinks along the ladder."""
        for t in self.flows:
            fr = [r.fraction for r in sorted((r for r in self.rows if r.t == t),
                                             key=lambda r: -r.epsilon)]
            if any(b > a for a, b in zip(fr, fr[1:])):
                return False
        return True

    def to_json(self) -> dict:
        return {
            "map": self.map_text,
            "samples": self.samples,
            "seed": self.seed,
            "eps_ladder": list(self.eps_ladder),
            "flows": [list(t) for t in self.flows],
            "rows": [{"t": list(r.t), "t_total": r.t_total, "epsilon": r.epsilon,
                      "fraction": r.fraction, "ci_halfwidth": r.ci_halfwidth,
                      "samples": r.samples} for r in self.rows],
            "fitted_alpha": {str(k): v for k, v in sorted(self.exponents.items())},
            "monotone": self.monotone(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_total", "epsilon", "fraction", "ci_halfwidth", "samples"])
        for r in self.rows:
            w.writerow([repr(r.t_total), repr(r.epsilon), repr(r.fraction),
                        repr(r.ci_halfwidth), r.samples])
        return buf.getvalue()


def equal_split_flows(n: int, totals: Sequence[float]) -> list[tuple[float, ...]]:
    return [tuple(float(T) / n for _ in range(n)) for T in totals]


def escape_table(f: PolynomialMap, flows: Sequence[Sequence[float]], eps_ladder: Sequence[float],
                 samples: int = 2000, seed: int = 0,
                 budget: int = DEFAULT_ENUM_BUDGET) -> EscapeReport:
    """Escape fractions for every (flow, eps).  The same sample points are
    used for every flow, so fractions are monotone in eps by construction
    of the threshold test; alpha is the log-log slope of fraction against
    eps over the nonzero entries."""
    _check_flow_dim(f.dim)
    flows = [tuple(float(v) for v in t) for t in flows]
    _budget(samples, len(flows), f.dim, budget)
    pts = _map_points(f, samples, seed)
    eps = tuple(sorted((float(e) for e in eps_ladder), reverse=True))
    rows, alphas = [], {}
    for t in flows:
        d = _deltas(pts, t)
        fr = []
        for e in eps:
            h = int(np.count_nonzero(d < e))
            rows.append(EscapeRow(t, e, h / samples, _halfwidth(h, samples), samples))
            fr.append(h / samples)
        alpha = fit_loglog(eps, fr)
        if alpha is not None:
            alphas[float(sum(t))] = alpha
    return EscapeReport(f.text(), tuple(flows), eps, tuple(rows), samples, seed, alphas)


# ---------------------------------------------------------------------------
# Borel-Cantelli partial sums


def admissible_flows(n: int, total: int, k: int, d) -> list[tuple[int, ...]]:
    """Integer t >= 0 with sum t = total and t_i >= d * total for at least k indices."""
    out = []
    for head in product(range(total + 1), repeat=n - 1):
        s = sum(head)
        if s > total:
            continue
        t = head + (total - s,)
        if sum(1 for v in t if v >= d * total) >= k:
            out.append(t)
    return out


@dataclass(frozen=True)
class ProbeRow:
    total: int
    flows: int
    measure: float          # mean measured event probability over admissible t
    increment: float        # measure * flows
    cumulative: float


@dataclass(frozen=True)
class BorelCantelliReport:
    k: int
    d: float
    rows: tuple[ProbeRow, ...]
    fitted_ratio: float | None
    samples: int
    seed: int

    def to_json(self) -> dict:
        return {
            "k": self.k, "d": self.d, "samples": self.samples, "seed": self.seed,
            "fitted_ratio": self.fitted_ratio,
            "rows": [vars(r) for r in self.rows],
        }


def borel_cantelli_probe(f: PolynomialMap | Sequence[float], k: int, d: float, T_max: int,
                         samples: int = 500, seed: int = 0,
                         budget: int = DEFAULT_ENUM_BUDGET) -> BorelCantelliReport:
    """Partial sums over integer totals of sum_t mu{x : delta(g_t u_{f(x)}) <= e^{-d T}}.

    ``f`` is a polynomial map over [0,1]^m or a fixed point y.  The fitted
    ratio is exp of the slope of log increment against T (0 when the
    increments vanish from some T on).
    """
    if d <= 0:
        raise ValueError("d must be positive")
    if isinstance(f, PolynomialMap):
        n = f.dim
        pts = None if T_max < 1 else _map_points(f, samples, seed)
    else:
        n = len(f)
        pts = np.tile(np.asarray(f, dtype=np.float64), (samples, 1))
    _check_flow_dim(n)
    if not 1 <= k <= n:
        raise ValueError("k must lie in 1..n")
    rows = []
    cum = 0.0
    for T in range(1, T_max + 1):
        ts = admissible_flows(n, T, k, d)
        _budget(samples, len(ts), n, budget)
        thr = math.exp(-d * T)
        probs = []
        for t in ts:
            dl = _deltas(pts, t)
            probs.append(float(np.count_nonzero(dl <= thr * (1 + 1e-12))) / samples)
        meas = float(np.mean(probs)) if probs else 0.0
        inc = meas * len(ts)
        cum += inc
        rows.append(ProbeRow(T, len(ts), meas, inc, cum))
    ratio = None
    if rows:
        pos = [(r.total, r.increment) for r in rows if r.increment > 0]
        if pos and pos[-1][0] < rows[-1].total:
            ratio = 0.0
        elif len(pos) >= 2:
            Ts, incs = np.array(pos).T
            ratio = float(math.exp(np.polyfit(Ts, np.log(incs), 1)[0]))
    return BorelCantelliReport(k, float(d), tuple(rows), ratio, samples, seed)
