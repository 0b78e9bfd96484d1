"""Dense complex linear algebra used throughout the package.

Matrices here are tiny (at most ~16x16), so everything is plain numpy on
``complex128`` arrays; no BLAS tuning, no sparse formats.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import InvalidInputError

POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000
TAYLOR_DEGREE = 18
SCALING_THRESHOLD = 0.5
DEFAULT_FD_STEP = 1e-5
PS_BLOCK = 4
_INV_FACT = [1.0 / math.factorial(k) for k in range(TAYLOR_DEGREE + 1)]


def as_matrix(M, *, square: bool = False) -> np.ndarray:
    """Validate and coerce ``M`` into a finite 2-D complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {A.shape}")
    return A


def _seed_vector(n: int) -> np.ndarray:
    # fixed, generic start vector; irrational phases avoid exact orthogonality
    k = np.arange(n)
    v = (1.0 + 0.1 * k) * np.exp(1j * k * (math.sqrt(5.0) - 1.0))
    return v / np.linalg.norm(v)


def top_singular_pair(M) -> tuple[float, np.ndarray]:
    """Largest singular value of ``M`` and a unit right singular vector.

    Power iteration on the Gram matrix M^H M from a deterministic start.
    Stops once the eigen-residual drops below ``POWER_TOL`` relative to the
    current Rayleigh quotient, or after ``POWER_MAX_ITER`` sweeps.
    """
    A = as_matrix(M)
    rows, cols = A.shape
    big = np.abs(A).max()
    if big == 0.0:
        return 0.0, np.eye(cols, dtype=complex)[0]
    # exact power-of-two rescale so squares neither under- nor overflow
    e = -int(np.frexp(big)[1])
    A = np.ldexp(A.real, e) + 1j * np.ldexp(A.imag, e)
    if cols == 1:
        return math.ldexp(float(np.linalg.norm(A)), -e), np.ones(1, dtype=complex)
    if rows == 1:
        s = float(np.linalg.norm(A))
        return math.ldexp(s, -e), A[0].conj() / s

    B = A.conj().T @ A
    scale = np.abs(B).max()
    B = B / scale
    v = _seed_vector(cols)
    lam = 0.0
    for _ in range(POWER_MAX_ITER):
        w = B @ v
        lam = float(np.real(np.vdot(v, w)))
        if np.linalg.norm(w - lam * v) <= POWER_TOL * max(lam, 1e-300):
            break
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    lam = max(float(np.real(np.vdot(v, B @ v))), 0.0)
    return math.ldexp(math.sqrt(lam * scale), -e), v


def spectral_norm(M) -> float:
    """Operator 2-norm (largest singular value) of ``M``."""
    return top_singular_pair(M)[0]


def matrix_exp(M) -> np.ndarray:
    """e^M by scaling and squaring around a degree-18 Taylor polynomial."""
    A = as_matrix(M, square=True)
    n = A.shape[0]
    norm1 = float(np.abs(A).sum(axis=0).max())
    s = 0
    if norm1 > SCALING_THRESHOLD:
        s = int(math.ceil(math.log2(norm1 / SCALING_THRESHOLD)))
    A = A / (2.0**s)
    # Paterson-Stockmeyer: blocks of PS_BLOCK terms, Horner in A^PS_BLOCK
    powers = [np.eye(n, dtype=complex), A]
    for _ in range(PS_BLOCK - 1):
        powers.append(powers[-1] @ A)
    top = powers.pop()
    T = np.zeros((n, n), dtype=complex)
    for start in range(TAYLOR_DEGREE - TAYLOR_DEGREE % PS_BLOCK, -1, -PS_BLOCK):
        block = sum(_INV_FACT[k] * powers[k - start]
                    for k in range(start, min(start + PS_BLOCK, TAYLOR_DEGREE + 1)))
        T = block if start == TAYLOR_DEGREE - TAYLOR_DEGREE % PS_BLOCK else T @ top + block
    for _ in range(s):
        T = T @ T
    return T


def numeric_jacobian(fn: Callable[[np.ndarray], np.ndarray], x, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Complex finite-difference Jacobian of a holomorphic map.

    ``fn`` takes a complex vector and returns any complex array; the output is
    flattened, so the result has shape ``(fn(x).size, x.size)``.  Each column
    uses the four-point stencil x +- h, x +- ih, which is exact through
    third order for holomorphic maps (error O(h^4)).
    """
    if not h > 0:
        raise InvalidInputError(f"step must be positive, got {h}")
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    n = x.size
    cols = []
    for a in range(n):
        e = np.zeros(n, dtype=complex)
        e[a] = h
        fp = np.asarray(fn(x + e), dtype=complex).ravel()
        fm = np.asarray(fn(x - e), dtype=complex).ravel()
        gp = np.asarray(fn(x + 1j * e), dtype=complex).ravel()
        gm = np.asarray(fn(x - 1j * e), dtype=complex).ravel()
        cols.append(((fp - fm) - 1j * (gp - gm)) / (4.0 * h))
    return np.stack(cols, axis=1)
