"""Independent reference computations used only by the tests.

None of these share code with the package: they use exact rational
arithmetic, brute force, or dense linear algebra instead of the package's
power iteration and graph searches.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def to_fraction_matrix(m) -> list[list[Fraction]]:
    return [[Fraction(float(v)) if not isinstance(v, Fraction) else v for v in row] for row in m]


def charpoly(m) -> list[Fraction]:
    """Monic characteristic polynomial coefficients [1, c1, ..., cn] (Faddeev-LeVerrier, exact)."""
    a = to_fraction_matrix(m)
    n = len(a)
    ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    coeffs = [Fraction(1)]
    mk = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        prod = [[sum(a[i][t] * mk[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        mk = [[prod[i][j] + coeffs[-1] * ident[i][j] for j in range(n)] for i in range(n)]
        am = [[sum(a[i][t] * mk[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        trace = sum(am[i][i] for i in range(n))
        coeffs.append(-trace / k)
    return coeffs


def routh_hurwitz(coeffs: list[Fraction]) -> bool:
    """True iff every root of the polynomial has strictly negative real part."""
    c = list(coeffs)
    if c[0] < 0:
        c = [-v for v in c]
    if any(v <= 0 for v in c):
        return False
    deg = len(c) - 1
    if deg == 0:
        return True
    rows = [c[0::2], c[1::2]]
    width = len(rows[0])
    rows = [r + [Fraction(0)] * (width - len(r)) for r in rows]
    for _ in range(deg - 1):
        r1, r2 = rows[-2], rows[-1]
        if r2[0] == 0:
            return False
        new = [(r2[0] * r1[j + 1] - r1[0] * r2[j + 1]) / r2[0] for j in range(width - 1)] + [Fraction(0)]
        rows.append(new)
    return all(r[0] > 0 for r in rows[: deg + 1])


def dense_abscissa(m) -> float:
    return float(np.max(np.linalg.eigvals(np.asarray(m, dtype=float)).real))


def dense_radius(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(m, dtype=float)))))


def brute_force_cycles(adjacency) -> set[tuple[int, ...]]:
    """All simple cycles (length >= 2) by trying every ordered node sequence."""
    a = np.asarray(adjacency)
    n = a.shape[0]
    found = set()
    for k in range(2, n + 1):
        for seq in itertools.permutations(range(n), k):
            if seq[0] != min(seq):
                continue
            if all(a[seq[(i + 1) % k], seq[i]] > 0 for i in range(k)):
                found.add(seq)
    return found


def closure_components(adjacency) -> list[list[int]]:
    """Strongly connected components from the boolean transitive closure."""
    a = np.asarray(adjacency) > 0
    n = a.shape[0]
    reach = np.eye(n, dtype=bool) | a.T  # reach[i, j]: i -> j
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    mutual = reach & reach.T
    comps, seen = [], set()
    for i in range(n):
        if i in seen:
            continue
        comp = sorted(int(j) for j in np.flatnonzero(mutual[i]))
        seen.update(comp)
        comps.append(comp)
    return comps


def endemic_fixed_point(d, b, tol: float = 1e-14, max_iter: int = 1_000_000) -> np.ndarray:
    """Endemic equilibrium by damped fixed-point iteration x = Bx / (d + Bx), started at 1."""
    d = np.asarray(d, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.ones(d.size)
    for _ in range(max_iter):
        bx = b @ x
        nxt = 0.5 * x + 0.5 * bx / (d + bx)
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    raise RuntimeError("fixed-point iteration did not settle")
