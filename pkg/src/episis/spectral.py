"""Perron roots, spectral abscissae and M-matrix tests for sign-structured matrices.

Everything reduces to one primitive: power iteration on an irreducible
nonnegative block, shifted by a positive multiple of the identity so that
periodic (imprimitive) blocks still converge.  Reducible inputs are split
into strongly connected components; the matrix is block triangular in that
order, so its dominant root is the largest dominant root of the diagonal
blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graphs import scc

TOL = 1e-10
MAX_ITER = 100_000
EPS_HURWITZ = 1e-9


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SpectralResult:
    value: float
    right_vector: np.ndarray | None
    iterations: int
    residual: float


class MMatrixClass(str, Enum):
    NONSINGULAR = "nonsingular_M"
    SINGULAR = "singular_M"
    NOT_M = "not_M"


def _perron_block(a: np.ndarray, tol: float, max_iter: int) -> SpectralResult:
    """Perron root of an irreducible nonnegative block of size >= 2."""
    n = a.shape[0]
    # any positive shift makes an irreducible block primitive
    shift = max(float(a.sum(axis=1).mean()), np.finfo(float).tiny)
    shifted = a + shift * np.eye(n)
    v = np.full(n, 1.0 / math.sqrt(n))
    v /= v.max()
    residual = math.inf
    for it in range(1, max_iter + 1):
        w = shifted @ v
        lam = float(w.max())
        v_new = w / lam
        residual = float(np.max(np.abs(a @ v_new - (lam - shift) * v_new)))
        v = v_new
        if residual <= tol:
            return SpectralResult(lam - shift, v, it, residual)
    raise ConvergenceError("power iteration did not converge", residual)


def spectral_radius(m, tol: float = TOL, max_iter: int = MAX_ITER) -> SpectralResult:
    """Spectral radius of a nonnegative square matrix.

    The eigenvector is returned for irreducible inputs only; for reducible
    ones ``right_vector`` is ``None``.  An empty matrix has radius 0.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if np.any(a < 0):
        raise ValueError("spectral_radius expects a nonnegative matrix")
    n = a.shape[0]
    if n == 0:
        return SpectralResult(0.0, None, 0, 0.0)

    comps = scc(a)
    if len(comps) == 1:
        if n == 1:
            return SpectralResult(float(a[0, 0]), np.ones(1), 0, 0.0)
        return _perron_block(a, tol, max_iter)

    best, iters, res = -math.inf, 0, 0.0
    for comp in comps:
        if len(comp) == 1:
            val = float(a[comp[0], comp[0]])
        else:
            r = _perron_block(a[np.ix_(comp, comp)], tol, max_iter)
            val, iters, res = r.value, iters + r.iterations, max(res, r.residual)
        best = max(best, val)
    return SpectralResult(best, None, iters, res)


def _check_metzler(m: np.ndarray) -> None:
    off = m - np.diag(np.diag(m))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise ValueError(f"not Metzler: off-diagonal entry ({i}, {j}) = {m[i, j]}")


def spectral_abscissa(m, tol: float = TOL, max_iter: int = MAX_ITER) -> SpectralResult:
    """Largest real part of the spectrum of a Metzler matrix.

    Computed as ``rho(m + c I) - c`` with ``c = 1 + max |m_ii|``.  The empty
    matrix has abscissa ``-inf``.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return SpectralResult(-math.inf, None, 0, 0.0)
    _check_metzler(a)
    c = 1.0 + float(np.max(np.abs(np.diag(a))))
    r = spectral_radius(a + c * np.eye(a.shape[0]), tol, max_iter)
    return SpectralResult(r.value - c, r.right_vector, r.iterations, r.residual)


def is_hurwitz(m, eps: float = EPS_HURWITZ) -> bool:
    return spectral_abscissa(m).value < -eps


def hurwitz_status(m, eps: float = EPS_HURWITZ) -> str:
    """'hurwitz', 'boundary' (|s| <= eps) or 'unstable'."""
    s = spectral_abscissa(m).value
    if s < -eps:
        return "hurwitz"
    return "boundary" if s <= eps else "unstable"


def classify_m_matrix(a, eps: float = EPS_HURWITZ) -> MMatrixClass:
    """Classify ``a`` (with ``-a`` Metzler) as nonsingular/singular/non M-matrix.

    For Metzler ``-a`` the abscissa is the only eigenvalue on its vertical
    line, so the sign of ``s(-a)`` decides: negative means every eigenvalue
    of ``a`` has positive real part, zero (within ``eps``) means a root at
    the origin with the rest strictly to the right.
    """
    s = spectral_abscissa(-np.asarray(a, dtype=float)).value
    if s < -eps:
        return MMatrixClass.NONSINGULAR
    if s <= eps:
        return MMatrixClass.SINGULAR
    return MMatrixClass.NOT_M


def reproduction_number(net, gains, mode: str = "infection") -> float:
    """``rho(D^-1 G B)`` for infection control, ``rho((D G)^-1 B)`` for recovery."""
    g = np.asarray(gains, dtype=float)
    if g.shape != (net.n,):
        raise ValueError(f"gains must have length {net.n}")
    if np.any(~(g > 0)):
        raise ValueError("gains must be strictly positive")
    if mode == "infection":
        m = (g / net.d)[:, None] * net.b
    elif mode == "recovery":
        m = net.b / (net.d * g)[:, None]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return spectral_radius(m).value
