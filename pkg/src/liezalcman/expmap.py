"""One-parameter subgroups, based exponentials and the differential of exp."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError, RangeError
from .liegroup import (
    GroupElement,
    GroupInstance,
    _check_algebra,
    bracket_ad,
    mul,
    random_algebra,
)
from .numkernel import numeric_jacobian, spectral_norm, top_singular_pair

EXP_RANGE = 700.0
DEXP_TAIL_TOL = 1e-12
CR_TOL = 1e-6


def _guard(inst: GroupInstance, X: np.ndarray, z: complex) -> None:
    if inst.kind == "additive":
        return
    mag = abs(z) * float(np.linalg.norm(X))
    if mag > EXP_RANGE:
        raise RangeError(f"|z|*|X| = {mag:.6g} exceeds {EXP_RANGE} for {inst.name}")


def one_param(inst: GroupInstance, X, z: complex = 1.0) -> GroupElement:
    """exp(zX) from the closed form of the instance."""
    X = _check_algebra(inst, X)
    _guard(inst, X, z)
    return inst.element(inst.exp_coords(z * X))


def exp_at(g: GroupElement, xi, z: complex = 1.0) -> GroupElement:
    """Based exponential exp_g(z xi) = g exp(z xi), xi left-trivialized at g."""
    return mul(g, one_param(g.group, xi, z))


@dataclass(frozen=True, eq=False)
class OneParamCurve:
    inst: GroupInstance
    X: np.ndarray

    def __call__(self, z: complex) -> GroupElement:
        return one_param(self.inst, self.X, z)

    def cauchy_riemann_residual(self, z: complex, h: float = 1e-5) -> float:
        """max |d/dx + i d/dy| of the coordinates at z; zero for holomorphic curves."""
        dx = (self(z + h).data - self(z - h).data) / (2 * h)
        dy = (self(z + 1j * h).data - self(z - 1j * h).data) / (2 * h)
        return float(np.abs(dx + 1j * dy).max())


def curve(inst: GroupInstance, X) -> OneParamCurve:
    c = OneParamCurve(inst, _check_algebra(inst, X))
    if np.abs(c(0.0).data - inst.identity().data).max() > 1e-12:
        raise InvalidInputError("curve does not start at the identity")
    for z in (0.5 + 0.5j, -0.3 + 0.7j):
        if c.cauchy_riemann_residual(z) > CR_TOL * max(1.0, float(np.abs(c(z).data).max())):
            raise InvalidInputError(f"curve fails the Cauchy-Riemann check at z={z}")
    return c


def ode_exp_oracle(
    inst: GroupInstance,
    X,
    z: complex,
    steps: int = 1000,
    start: GroupElement | None = None,
) -> GroupElement:
    """Integrate gamma' = (dL_gamma)_e (X) along the segment [0, z].

    Each step right-multiplies by the degree-4 Taylor propagator of the
    increment (z/steps) X, i.e. classical RK4 applied to the left-invariant
    field, so the global error is O(steps^-4).  It never calls the closed
    form exponential, which keeps it independent of ``one_param``.
    """
    if steps < 100:
        raise InvalidInputError(f"steps must be >= 100, got {steps}")
    X = _check_algebra(inst, X)
    _guard(inst, X, z)
    g = (start if start is not None else inst.identity()).data
    if not np.any(X):
        return inst.element(g)
    T = inst.taylor_step((z / steps) * X)
    if inst.kind == "additive":
        for _ in range(steps):
            g = g + T
    elif inst.kind == "torus":
        for _ in range(steps):
            g = g * T
    else:
        for _ in range(steps):
            g = g @ T
        if inst.kind == "sl2":
            g = g / np.sqrt(np.linalg.det(g))
    return inst.element(g)


@dataclass(frozen=True)
class StructureConstant:
    lower: float  # best value found: a certified lower bound on C
    upper: float  # tensor-norm bound: a certified upper bound on C
    witness: tuple = ()  # unit pair (X, Y) attaining ``lower``
    sampled: float = 0.0  # raw Monte-Carlo maximum before the ascent polish


def bracket_upper_bound(inst: GroupInstance) -> float:
    """sqrt(sum_ab |[eps_a, eps_b]|^2) >= |[X, Y]| for unit X, Y (Cauchy-Schwarz)."""
    return float(np.sqrt(np.sum(np.abs(inst.brackets) ** 2)))


def _ascend(inst: GroupInstance, X: np.ndarray, Y: np.ndarray, iters: int = 200):
    # alternate exact maximization over one argument with the other fixed
    best = float(np.linalg.norm(bracket_ad(inst, X) @ Y))
    for _ in range(iters):
        _, Y = top_singular_pair(bracket_ad(inst, X))
        s, X = top_singular_pair(bracket_ad(inst, Y))
        if s <= best * (1 + 1e-15):
            best = max(best, s)
            break
        best = s
    val = float(np.linalg.norm(bracket_ad(inst, X) @ Y))
    return val, X, Y


def structure_constant(
    inst: GroupInstance,
    samples: int = 1_000_000,
    seed: int = 0,
    metric_scale: float = 1.0,
    chunk: int = 250_000,
) -> StructureConstant:
    """Estimate C = sup |[X, Y]| over unit X, Y.

    Random unit pairs are scored in chunks; the best few are polished by
    alternating singular-vector ascent.  With the metric rescaled to
    ``metric_scale * |.|``, unit vectors shrink by that factor and bracket
    norms grow by it, so C scales as 1/metric_scale.
    """
    t = float(metric_scale)
    upper = bracket_upper_bound(inst) / t
    if inst.is_abelian:
        return StructureConstant(0.0, 0.0)
    m = inst.dim
    c = inst.brackets
    rng = np.random.default_rng(seed)
    best_vals: list[tuple[float, np.ndarray, np.ndarray]] = []
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        X = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
        Y = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
        X /= t * np.linalg.norm(X, axis=1, keepdims=True)
        Y /= t * np.linalg.norm(Y, axis=1, keepdims=True)
        vals = t * np.linalg.norm(np.einsum("na,nb,abc->nc", X, Y, c), axis=1)
        top = np.argsort(vals)[-4:]
        best_vals.extend((float(vals[i]), X[i] * t, Y[i] * t) for i in top)
        done += n
    best_vals.sort(key=lambda r: r[0], reverse=True)
    lower, wx, wy = 0.0, None, None
    for _, X0, Y0 in best_vals[:8]:
        v, X1, Y1 = _ascend(inst, X0, Y0)
        if v > lower:
            lower, wx, wy = v, X1, Y1
    sampled = best_vals[0][0]  # already in the scaled metric
    lower = max(lower, best_vals[0][0] * t) / t
    return StructureConstant(lower, upper, (wx, wy), sampled)


@lru_cache(maxsize=None)
def _cached_upper(inst: GroupInstance) -> float:
    return bracket_upper_bound(inst)


@dataclass(frozen=True, eq=False)
class DexpOperator:
    base: GroupElement
    xi: np.ndarray
    matrix: np.ndarray
    order: int
    tail_bound: float


def _tail(x: float, K: int) -> float:
    """sum_{k>K} x^k / (k+1)!."""
    total, term = 0.0, x**K / math.factorial(K + 1)
    k = K
    while True:
        k += 1
        term = term * x / (k + 1)
        total += term
        if term < 1e-18 * max(total, 1e-300) or term == 0.0:
            return total


def _truncation_order(x: float, tol: float = DEXP_TAIL_TOL) -> tuple[int, float]:
    """Smallest K with sum_{k>K} x^k/(k+1)! <= tol, and that tail."""
    terms = [1.0]
    k = 0
    # run until terms are negligible against tol and past the peak at k ~ x
    while not (terms[-1] < 1e-6 * tol and k > x):
        k += 1
        terms.append(terms[-1] * x / (k + 1))
    # suffix sums, accumulated small to large
    tails = np.cumsum(terms[::-1])[::-1]
    for K in range(len(terms)):
        tail = float(tails[K + 1]) if K + 1 < len(terms) else 0.0
        if tail <= tol:
            return K, _tail(x, K)
    raise AssertionError("unreachable")


def dexp_at(g: GroupElement, xi) -> DexpOperator:
    """Left-trivialized (d exp_g)_xi from the series sum (-1)^k ad^k / (k+1)!.

    Truncation order is the smallest K whose tail, bounded with the
    certified structure-constant upper bound, is at most 1e-12.
    """
    inst = g.group
    xi = _check_algebra(inst, xi)
    m = inst.dim
    x = _cached_upper(inst) * float(np.linalg.norm(xi))
    K, tail = _truncation_order(x)
    ad = bracket_ad(inst, xi)
    total = np.eye(m, dtype=complex)
    term = np.eye(m, dtype=complex)
    for k in range(1, K + 1):
        term = -(term @ ad) / (k + 1)
        total = total + term
    return DexpOperator(g, xi, total, K, tail)


def dexp_norm_bound(inst: GroupInstance, xi, C: float | None = None) -> float:
    """(e^{C r} - 1) / (C r) with r = |xi|; C defaults to the certified upper bound."""
    xi = _check_algebra(inst, xi)
    if C is None:
        C = _cached_upper(inst)
    x = C * float(np.linalg.norm(xi))
    if x < 1e-14:
        return 1.0
    return math.expm1(x) / x


def dexp_numeric(g: GroupElement, xi, h: float = 1e-5) -> np.ndarray:
    """Finite-difference Jacobian of xi' -> exp_at(g, xi'), left-trivialized at the image."""
    inst = g.group
    xi = _check_algebra(inst, xi)
    J = numeric_jacobian(lambda v: exp_at(g, v).data, xi, h)
    image = exp_at(g, xi).data
    return np.stack([inst.trivialize(image, J[:, a]) for a in range(inst.dim)], axis=1)


# -- property suite -----------------------------------------------------------------

SUITE_TOLERANCES = {
    "one_param_law": 1e-10,
    "based_exp_ode": 1e-10,
    "based_exp_decomposition": 1e-10,
    "curve_derivative": 1e-6,
    "dexp_at_zero_isometry": 1e-10,
}


def property_suite(inst: GroupInstance, samples: int = 1000, seed: int = 0, ode_steps: int = 500) -> dict:
    """Worst residuals of the exponential-map identities over random samples.

    * one_param_law: exp((s+t)X) against exp(sX) exp(tX)
    * based_exp_ode: the integral curve of the left-invariant field through g
      with initial velocity xi, against g exp(z xi)
    * based_exp_decomposition: L_g(exp((dL_{g^-1})_g V)) for a raw tangent V
      at g, against exp_at(g, xi)
    * curve_derivative: d/dz exp(zX), pulled back to the identity, against X
    * dexp_at_zero_isometry: | |(d exp_g)_0| - 1 |
    """
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(SUITE_TOLERANCES, 0.0)

    def unit_disk():
        return rng.uniform() ** 0.5 * np.exp(2j * np.pi * rng.uniform())

    for _ in range(samples):
        X = random_algebra(inst, rng, 1.0)
        g = inst.random_element(rng, 1.0)
        s, t, z = unit_disk(), unit_disk(), unit_disk()

        lhs = one_param(inst, X, s + t)
        rhs = mul(one_param(inst, X, s), one_param(inst, X, t))
        worst["one_param_law"] = max(worst["one_param_law"], inst.distance(lhs, rhs))

        ode = ode_exp_oracle(inst, X, z, ode_steps, start=g)
        worst["based_exp_ode"] = max(worst["based_exp_ode"], inst.distance(ode, exp_at(g, X, z)))

        V = inst.untrivialize(g.data, X)
        composed = mul(g, one_param(inst, inst.trivialize(g.data, V)))
        worst["based_exp_decomposition"] = max(
            worst["based_exp_decomposition"], inst.distance(composed, exp_at(g, X))
        )

        J = numeric_jacobian(lambda w: one_param(inst, X, w[0]).data, np.array([z]))
        vel = inst.trivialize(one_param(inst, X, z).data, J[:, 0])
        worst["curve_derivative"] = max(worst["curve_derivative"], float(np.abs(vel - X).max()))

        iso = spectral_norm(dexp_at(g, np.zeros(inst.dim)).matrix)
        worst["dexp_at_zero_isometry"] = max(worst["dexp_at_zero_isometry"], abs(iso - 1.0))

    return {
        name: {"max_residual": worst[name], "tolerance": tol, "passed": worst[name] <= tol}
        for name, tol in SUITE_TOLERANCES.items()
    }
