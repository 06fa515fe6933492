"""Polynomial maps with rational coefficients, parsed with sympy."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
import sympy

from .numerics import PrecisionReal, to_mpf


@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial: exponent tuples -> rational coefficients."""

    nvars: int
    terms: tuple[tuple[tuple[int, ...], Fraction], ...]
    text: str = ""

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def is_constant(self) -> bool:
        return self.degree == 0

    def __call__(self, x: Sequence):
        if len(x) != self.nvars:
            raise ValueError(f"expected {self.nvars} variables, got {len(x)}")
        total = 0
        for exps, c in self.terms:
            term = c
            for xi, e in zip(x, exps):
                if e:
                    term = term * xi ** e
            total = total + term
        return total

    def eval_array(self, X: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation; X has shape (samples, nvars)."""
        X = np.asarray(X, dtype=np.float64).reshape(len(X), self.nvars)
        out = np.zeros(len(X))
        for exps, c in self.terms:
            term = np.full(len(X), float(c))
            for i, e in enumerate(exps):
                if e:
                    term = term * X[:, i] ** e
            out += term
        return out

    def sup_on_unit_box(self, grid: int = 4097) -> float:
        """Sup norm over [0,1]^nvars, estimated on a grid (exact for nvars=1 up to grid)."""
        if self.nvars == 1:
            xs = np.linspace(0.0, 1.0, grid)[:, None]
        else:
            side = max(3, int(round(grid ** (1.0 / self.nvars))))
            axes = np.meshgrid(*[np.linspace(0.0, 1.0, side)] * self.nvars, indexing="ij")
            xs = np.stack([a.ravel() for a in axes], axis=1)
        return float(np.abs(self.eval_array(xs)).max())


def _symbols(nvars):
    if nvars == 1:
        return (sympy.Symbol("x"),)
    return tuple(sympy.Symbol(f"x{i + 1}") for i in range(nvars))


def parse_polynomial(text: str, nvars: int = 1) -> Polynomial:
    syms = _symbols(nvars)
    local = {str(s): s for s in syms}
    try:
        expr = sympy.sympify(text.replace("^", "**"), locals=local, rational=True)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ValueError(f"cannot parse polynomial {text!r}") from exc
    extra = expr.free_symbols - set(syms)
    if extra:
        raise ValueError(f"unknown variables {sorted(map(str, extra))} in {text!r}")
    try:
        poly = sympy.Poly(expr, *syms)
    except sympy.PolynomialError as exc:
        raise ValueError(f"{text!r} is not a polynomial") from exc
    terms = []
    for exps, c in poly.terms():
        c = sympy.Rational(c)
        terms.append((tuple(int(e) for e in exps), Fraction(int(c.p), int(c.q))))
    return Polynomial(nvars, tuple(sorted(terms)), text.strip())


@dataclass(frozen=True)
class PolynomialMap:
    components: tuple[Polynomial, ...]

    @property
    def nvars(self) -> int:
        return self.components[0].nvars

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, x: Sequence) -> tuple:
        return tuple(p(x) for p in self.components)

    def text(self) -> str:
        return ", ".join(p.text for p in self.components)


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_map(text: str, nvars: int | None = None) -> PolynomialMap:
    """``"x, x^2"`` -> the curve x -> (x, x^2).  Variables are ``x`` for one
    parameter and ``x1, x2, ...`` otherwise (inferred when not given)."""
    comps = _split_top(text.strip().strip("()"))
    if not comps:
        raise ValueError("empty polynomial map")
    if nvars is None:
        names = set()
        for c in comps:
            names.update(str(s) for s in sympy.sympify(c.replace("^", "**")).free_symbols)
        idx = [int(n[1:]) for n in names if n.startswith("x") and n[1:].isdigit()]
        nvars = max(idx) if idx else 1
    return PolynomialMap(tuple(parse_polynomial(c, nvars) for c in comps))


def evaluate_precise(p: Polynomial, x: Sequence, bits: int):
    """Evaluate at high precision; rationals stay exact."""
    if all(isinstance(v, (int, Fraction)) for v in x):
        return p(x)
    with mpmath.workprec(bits):
        xs = [to_mpf(v, bits) for v in x]
        val = mpmath.fsum(to_mpf(c, bits) * mpmath.fprod(xi ** e for xi, e in zip(xs, exps))
                          for exps, c in p.terms) if p.terms else mpmath.mpf(0)
        return PrecisionReal(val, bits)
