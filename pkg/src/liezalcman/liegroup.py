"""Concrete complex Lie groups with a left-trivialized tangent representation.

Every tangent vector at any point ``g`` is stored as its coordinates in the
fixed algebra basis ``eps`` after pulling it back to the identity by
``(dL_{g^-1})_g``.  With the left-invariant metric that makes ``eps``
orthonormal, all translation differentials become the coordinate identity.

Four instances are provided: the additive group C^m, the torus (C*)^m,
GL(m, C) and SL(2, C).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateElementError, InvalidInputError
from .numkernel import matrix_exp

GL_DET_MIN = 1e-12
SL_DET_TOL = 1e-9
TABLE_TOL = 1e-12


def _det(a: np.ndarray) -> complex:
    if a.shape == (2, 2):
        return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return np.linalg.det(a)


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: "GroupInstance"
    data: np.ndarray

    def __repr__(self) -> str:
        return f"GroupElement({self.group.name}, {self.data.tolist()!r})"


class GroupInstance:
    """Base class; subclasses fill in the group law and the algebra basis."""

    kind: str = ""

    def __init__(self, dim: int):
        self.dim = int(dim)
        self._check_table()

    @property
    def name(self) -> str:
        return f"{self.kind}({self.order})"

    @property
    def order(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupInstance) and (self.kind, self.order) == (other.kind, other.order)

    def __hash__(self) -> int:
        return hash((self.kind, self.order))

    def __repr__(self) -> str:
        return self.name

    # -- structure --------------------------------------------------------
    @cached_property
    def brackets(self) -> np.ndarray:
        """Table ``c[a, b, :]`` = eps-coordinates of [eps_a, eps_b]."""
        return np.zeros((self.dim, self.dim, self.dim), dtype=complex)

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.brackets)

    def _check_table(self) -> None:
        c = self.brackets
        if not np.allclose(c, -c.transpose(1, 0, 2), atol=TABLE_TOL, rtol=0):
            raise InvalidInputError(f"{self.name}: bracket table not antisymmetric")
        # [a,[b,c]] + [b,[c,a]] + [c,[a,b]] on all basis triples
        inner = np.einsum("bcd,ade->abce", c, c)
        jac = inner + inner.transpose(1, 2, 0, 3) + inner.transpose(2, 0, 1, 3)
        if np.abs(jac).max(initial=0.0) > TABLE_TOL:
            raise InvalidInputError(f"{self.name}: bracket table violates Jacobi")

    # -- elements ---------------------------------------------------------
    def element(self, data) -> GroupElement:
        arr = np.array(data, dtype=complex)
        arr = self._validate(arr)
        arr.setflags(write=False)
        return GroupElement(self, arr)

    def identity(self) -> GroupElement:
        raise NotImplementedError

    def _validate(self, arr: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(arr)):
            raise DegenerateElementError(f"{self.name}: non-finite coordinates")
        return arr

    def _mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _inv(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exp_coords(self, X: np.ndarray) -> np.ndarray:
        """Closed-form exp of an algebra vector, as element data."""
        raise NotImplementedError

    def taylor_step(self, X: np.ndarray) -> np.ndarray:
        """Degree-4 Taylor propagator of the left-invariant field X over one unit step."""
        raise NotImplementedError

    def trivialize(self, base: np.ndarray, tangent: np.ndarray) -> np.ndarray:
        """Pull a raw tangent vector at ``base`` back to eps-coordinates."""
        raise NotImplementedError

    def untrivialize(self, base: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Raw tangent vector (dL_base)_e X at ``base``."""
        raise NotImplementedError

    def distance(self, g: GroupElement, h: GroupElement) -> float:
        raise NotImplementedError

    def random_element(self, rng: np.random.Generator, scale: float = 1.0) -> GroupElement:
        return self.element(self.exp_coords(random_algebra(self, rng, scale)))


def random_algebra(inst: GroupInstance, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """Uniformly random algebra vector with norm at most ``radius``."""
    v = rng.normal(size=inst.dim) + 1j * rng.normal(size=inst.dim)
    v /= np.linalg.norm(v)
    return v * radius * rng.uniform() ** (1.0 / (2 * inst.dim))


class Additive(GroupInstance):
    kind = "additive"

    def identity(self):
        return self.element(np.zeros(self.dim))

    def _validate(self, arr):
        arr = super()._validate(arr)
        if arr.shape != (self.dim,):
            raise InvalidInputError(f"{self.name}: expected {self.dim} coordinates, got shape {arr.shape}")
        return arr

    def _mul(self, a, b):
        return a + b

    def _inv(self, a):
        return -a

    def exp_coords(self, X):
        return np.array(X, dtype=complex)

    def taylor_step(self, X):
        return np.array(X, dtype=complex)

    def trivialize(self, base, tangent):
        return np.asarray(tangent, dtype=complex).reshape(self.dim)

    def untrivialize(self, base, X):
        return np.asarray(X, dtype=complex)

    def distance(self, g, h):
        return float(np.linalg.norm(h.data - g.data))


class Torus(GroupInstance):
    kind = "torus"

    def identity(self):
        return self.element(np.ones(self.dim))

    def _validate(self, arr):
        arr = super()._validate(arr)
        if arr.shape != (self.dim,):
            raise InvalidInputError(f"{self.name}: expected {self.dim} coordinates, got shape {arr.shape}")
        if np.any(arr == 0):
            raise DegenerateElementError(f"{self.name}: zero coordinate")
        return arr

    def _mul(self, a, b):
        return a * b

    def _inv(self, a):
        return 1.0 / a

    def exp_coords(self, X):
        return np.exp(np.asarray(X, dtype=complex))

    def taylor_step(self, X):
        x = np.asarray(X, dtype=complex)
        return 1 + x + x**2 / 2 + x**3 / 6 + x**4 / 24

    def trivialize(self, base, tangent):
        return np.asarray(tangent, dtype=complex).reshape(self.dim) / base

    def untrivialize(self, base, X):
        return base * np.asarray(X, dtype=complex)

    def distance(self, g, h):
        # (C*)^m = C^m / 2 pi i Z^m; the principal log is the shortest lift
        return float(np.linalg.norm(np.log(h.data / g.data)))


class MatrixGroup(GroupInstance):
    """Shared machinery for matrix groups with a Hilbert-Schmidt orthonormal basis."""

    def __init__(self, n: int):
        self.n = int(n)
        super().__init__(len(self.basis))

    @property
    def order(self) -> int:
        return self.n

    @cached_property
    def basis(self) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def brackets(self):
        E = self.basis
        comm = np.einsum("aij,bjk->abik", E, E)
        comm = comm - comm.transpose(1, 0, 2, 3)
        return np.stack([self.vee_many(comm[a]) for a in range(len(E))])

    def hat(self, X) -> np.ndarray:
        return np.tensordot(np.asarray(X, dtype=complex), self.basis, axes=1)

    def vee(self, M) -> np.ndarray:
        return np.einsum("aij,ij->a", self.basis.conj(), np.asarray(M, dtype=complex))

    def vee_many(self, Ms) -> np.ndarray:
        return np.einsum("aij,bij->ba", self.basis.conj(), Ms)

    def identity(self):
        return self.element(np.eye(self.n))

    def _validate(self, arr):
        arr = super()._validate(arr)
        if arr.shape != (self.n, self.n):
            raise InvalidInputError(f"{self.name}: expected {self.n}x{self.n} matrix, got shape {arr.shape}")
        if abs(_det(arr)) <= GL_DET_MIN:
            raise DegenerateElementError(f"{self.name}: |det| <= {GL_DET_MIN}")
        return arr

    def _mul(self, a, b):
        return a @ b

    def _inv(self, a):
        if abs(_det(a)) <= GL_DET_MIN:
            raise DegenerateElementError(f"{self.name}: cannot invert, |det| <= {GL_DET_MIN}")
        return np.linalg.inv(a)

    def exp_coords(self, X):
        return matrix_exp(self.hat(X))

    def taylor_step(self, X):
        A = self.hat(X)
        eye = np.eye(self.n, dtype=complex)
        return eye + A @ (eye + A @ (eye + A @ (eye + A / 4) / 3) / 2)

    def trivialize(self, base, tangent):
        T = np.asarray(tangent, dtype=complex).reshape(self.n, self.n)
        return self.vee(np.linalg.solve(base, T))

    def untrivialize(self, base, X):
        return base @ self.hat(X)

    def distance(self, g, h):
        # first-order proxy for the left-invariant metric distance
        D = np.linalg.solve(g.data, h.data) - np.eye(self.n)
        return float(np.linalg.norm(D))


class GL(MatrixGroup):
    kind = "gl"

    @cached_property
    def basis(self):
        m = self.n
        E = np.zeros((m * m, m, m), dtype=complex)
        for a in range(m):
            for b in range(m):
                E[a * m + b, a, b] = 1.0
        return E


class SL2(MatrixGroup):
    kind = "sl2"

    def __init__(self, n: int = 2):
        if n != 2:
            raise InvalidInputError("only SL(2, C) is provided")
        super().__init__(2)

    @cached_property
    def basis(self):
        r = 1.0 / math.sqrt(2.0)
        H = np.array([[r, 0], [0, -r]], dtype=complex)
        E = np.array([[0, 1], [0, 0]], dtype=complex)
        F = np.array([[0, 0], [1, 0]], dtype=complex)
        return np.stack([H, E, F])

    def _validate(self, arr):
        arr = super()._validate(arr)
        det = _det(arr)
        if abs(det - 1) > SL_DET_TOL:
            raise DegenerateElementError(f"{self.name}: |det - 1| = {abs(det - 1):.3e} > {SL_DET_TOL}")
        return arr

    @staticmethod
    def _recondition(a):
        d = _det(a)
        # far out along a flow the determinant cancels to nothing
        if d == 0 or not np.isfinite(d):
            raise DegenerateElementError(f"SL(2, C): determinant {d} lost to cancellation")
        return a / np.sqrt(d)

    def _mul(self, a, b):
        return self._recondition(a @ b)

    def _inv(self, a):
        return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / _det(a)

    def exp_coords(self, X):
        return self._recondition(super().exp_coords(X))


GROUPS = {"additive": Additive, "torus": Torus, "gl": GL, "sl2": SL2}


def make_group(kind: str, order: int | None = None) -> GroupInstance:
    """Build an instance by name; ``order`` is m for C^m, (C*)^m and GL(m)."""
    try:
        cls = GROUPS[kind]
    except KeyError:
        raise InvalidInputError(f"unknown group {kind!r}; known: {sorted(GROUPS)}") from None
    if cls is SL2:
        return SL2(2 if order is None else order)
    return cls(1 if order is None else order)


def _same_group(g: GroupElement, h: GroupElement) -> None:
    if g.group != h.group:
        raise InvalidInputError(f"instance mismatch: {g.group.name} vs {h.group.name}")


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    _same_group(g, h)
    return g.group.element(g.group._mul(g.data, h.data))


def inv(g: GroupElement) -> GroupElement:
    return g.group.element(g.group._inv(g.data))


def distance(g: GroupElement, h: GroupElement) -> float:
    _same_group(g, h)
    return g.group.distance(g, h)


def _check_algebra(inst: GroupInstance, X) -> np.ndarray:
    X = np.atleast_1d(np.asarray(X, dtype=complex))
    if X.shape != (inst.dim,):
        raise InvalidInputError(f"{inst.name}: algebra vector must have length {inst.dim}, got {X.shape}")
    return X


def bracket_ad(inst: GroupInstance, X) -> np.ndarray:
    """Matrix of ad_X in the basis eps (column b holds [X, eps_b])."""
    X = _check_algebra(inst, X)
    return np.einsum("a,abc->cb", X, inst.brackets)


def bracket(inst: GroupInstance, X, Y) -> np.ndarray:
    return bracket_ad(inst, X) @ _check_algebra(inst, Y)


def left_translate_frame(g: GroupElement, v) -> np.ndarray:
    """(dL_g)_e v in left-trivialized coordinates: the coordinates themselves."""
    return _check_algebra(g.group, v).copy()
