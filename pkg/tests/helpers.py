"""Independent oracles shared by the unit and acceptance tests."""
import math
import random
from fractions import Fraction

import numpy as np

from multexp.lattice import det_exact


def random_unimodular_basis(rng: random.Random):
    """3x3 rational matrix with determinant +-1: a triangular factor with
    diagonal (r, 1/r, +-1) times a few integer column operations."""
    frac = lambda: Fraction(rng.randint(-9, 9), rng.randint(1, 9))
    r = Fraction(rng.randint(1, 9), rng.randint(1, 9))
    T = [[r, 0, 0], [frac(), 1 / r, 0], [frac(), frac(), rng.choice([1, -1])]]
    U = [[int(i == j) for j in range(3)] for i in range(3)]
    for _ in range(3):
        i, j = rng.sample(range(3), 2)
        m = rng.randint(-2, 2)
        for row in U:
            row[j] += m * row[i]
    return [[sum(T[i][k] * U[k][j] for k in range(3)) for j in range(3)] for i in range(3)]


def _box_min(A, box, chunk=2_000_000):
    """Smallest |A x|^2 over nonzero integer x with |x_j| <= box[j], streamed
    in slices of the first coordinate."""
    tail = [np.arange(-b, b + 1) for b in box[1:]]
    grids = np.meshgrid(*tail, indexing="ij")
    rest = np.stack([g.ravel() for g in grids])
    step = max(1, chunk // rest.shape[1])
    best = np.iinfo(np.int64).max
    for lo in range(-box[0], box[0] + 1, step):
        first = np.arange(lo, min(lo + step, box[0] + 1))
        X = np.vstack([np.repeat(first, rest.shape[1]), np.tile(rest, len(first))])
        V = A @ X
        s = (V * V).sum(axis=0)
        s[np.all(X == 0, axis=0)] = np.iinfo(np.int64).max
        best = min(best, int(s.min()))
    return best


def brute_force_min_norm_sq(B):
    """Minimum of |B x|^2 over nonzero integer x by scanning boxes.

    The scan covers [-6, 6] per coordinate, then widens to the dual bound
    |x_j|^2 <= R^2 (G^{-1})_{jj}, where R^2 is the best value seen on the
    first box, so the scan provably contains a minimizer."""
    m = len(B)
    D = math.lcm(*[v.denominator for row in B for v in row])
    Bi = [[int(v * D) for v in row] for row in B]
    A = np.array(Bi, dtype=np.int64)
    best = _box_min(A, [6] * m)
    R2 = Fraction(best, D * D)
    G = [[sum(B[k][i] * B[k][j] for k in range(m)) for j in range(m)] for i in range(m)]
    dG = det_exact(G)
    box = []
    for j in range(m):
        minor = [[G[r][c] for c in range(m) if c != j] for r in range(m) if r != j]
        bound = R2 * det_exact(minor) / dG
        box.append(math.isqrt(math.floor(bound)) + 1)
    assert max(abs(v) for row in Bi for v in row) * max(box) * m < 2**31
    if any(b > 6 for b in box):
        best = min(best, _box_min(A, box))
    return Fraction(best, D * D)


def random_witness_instance(rng: random.Random, bits: int = 256):
    """(x, z, n, k, v) with |x| <= Pi_+(z)^(-v/n), z having k nonzero entries."""
    import mpmath

    from multexp.numerics import PrecisionReal

    n = rng.randint(1, 4)
    k = rng.randint(1, n)
    support = rng.sample(range(n), k)
    z = [0] * n
    for i in support:
        z[i] = rng.choice([-1, 1]) * rng.randint(1, 10**rng.randint(1, 6))
    v = n + Fraction(rng.randint(1, 400), rng.randint(1, 40))
    pi = math.prod(max(1, abs(q)) for q in z)
    with mpmath.workprec(bits):
        u = mpmath.mpf(rng.randint(1, 2**40)) / 2**40
        x = rng.choice([-1, 1]) * u * mpmath.power(pi, -mpmath.mpf(v.numerator) / (v.denominator * n))
        x = PrecisionReal(x, bits)
    return x, tuple(z), n, k, v
