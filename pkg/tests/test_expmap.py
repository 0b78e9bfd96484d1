import math

import numpy as np
import pytest

from liezalcman.errors import InvalidInputError, RangeError
from liezalcman.expmap import (
    SUITE_TOLERANCES,
    curve,
    dexp_at,
    dexp_norm_bound,
    dexp_numeric,
    exp_at,
    ode_exp_oracle,
    one_param,
    property_suite,
    structure_constant,
)
from liezalcman.liegroup import distance, make_group, mul, random_algebra
from liezalcman.numkernel import spectral_norm

from conftest import random_complex


def test_one_param_examples():
    A = make_group("additive", 2)
    assert np.array_equal(one_param(A, [1, 1j], 2).data, [2, 2j])
    T = make_group("torus", 1)
    assert abs(one_param(T, [1], 1j * math.pi).data[0] + 1) <= 1e-12
    G = make_group("gl", 2)
    X = G.vee([[0, 1], [0, 0]])
    assert np.abs(one_param(G, X, 1).data - [[1, 1], [0, 1]]).max() <= 1e-15


def test_one_param_range_guard():
    T = make_group("torus", 1)
    with pytest.raises(RangeError, match="800"):
        one_param(T, [1.0], 800)
    # the additive group has no overflow
    assert one_param(make_group("additive", 1), [1.0], 1e6).data[0] == 1e6


def test_exp_at_examples(group, rng):
    g = group.random_element(rng)
    assert np.abs(exp_at(g, np.zeros(group.dim)).data - g.data).max() <= 1e-15
    A = make_group("additive", 3)
    p, xi = random_complex(rng, 3), random_complex(rng, 3)
    assert np.array_equal(exp_at(A.element(p), xi).data, p + xi)
    T = make_group("torus", 1)
    assert abs(exp_at(T.element([2]), [math.log(3)]).data[0] - 6) <= 1e-12


def test_curve_contract(group, rng):
    c = curve(group, random_algebra(group, rng))
    assert np.abs(c(0).data - group.identity().data).max() <= 1e-12
    assert c.cauchy_riemann_residual(0.2 - 0.4j) <= 1e-6
    with pytest.raises(InvalidInputError):
        curve(group, np.zeros(group.dim + 1))


def test_ode_oracle_examples(group, rng):
    assert np.array_equal(ode_exp_oracle(group, np.zeros(group.dim), 1.3).data, group.identity().data)
    with pytest.raises(InvalidInputError):
        ode_exp_oracle(group, np.ones(group.dim), 1.0, steps=99)


def test_ode_oracle_agreement(group, rng):
    for _ in range(20):
        X = random_algebra(group, rng, 1.0)
        z = 2 * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        assert distance(ode_exp_oracle(group, X, z, 1000), one_param(group, X, z)) <= 1e-8


def test_ode_oracle_exact_for_additive(rng):
    A = make_group("additive", 2)
    X = random_complex(rng, 2)
    assert np.abs(ode_exp_oracle(A, X, 1.7j, 100).data - 1.7j * X).max() <= 1e-13


def test_ode_oracle_fourth_order():
    T = make_group("torus", 1)
    X, z = np.array([1.0 + 0.5j]), 1.5 - 0.5j
    errs = [abs(ode_exp_oracle(T, X, z, n).data[0] - np.exp(z * X[0])) for n in (100, 200, 400)]
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(16, rel=0.1)


def test_structure_constant_abelian():
    for kind in ("additive", "torus"):
        sc = structure_constant(make_group(kind, 3), samples=1000)
        assert sc.lower == 0.0 and sc.upper == 0.0


def test_structure_constant_sl2_oracle():
    """Independent oracle: brute-force max over unit pairs, matrix commutators."""
    S = make_group("sl2")
    rng = np.random.default_rng(99)
    n = 400_000
    X = random_complex(rng, n, 3)
    Y = random_complex(rng, n, 3)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    A = np.einsum("na,aij->nij", X, S.basis)
    B = np.einsum("na,aij->nij", Y, S.basis)
    C = A @ B - B @ A
    brute = np.sqrt((np.abs(C) ** 2).sum(axis=(1, 2))).max()
    sc = structure_constant(S, samples=200_000, seed=3)
    assert brute <= sc.lower * (1 + 1e-12)
    assert sc.lower == pytest.approx(brute, rel=2e-3)
    assert sc.lower == pytest.approx(math.sqrt(2), rel=1e-9)
    assert sc.lower <= sc.upper
    Xw, Yw = sc.witness
    assert np.linalg.norm(Xw) == pytest.approx(1) and np.linalg.norm(Yw) == pytest.approx(1)


def test_structure_constant_metric_scaling():
    S = make_group("sl2")
    base = structure_constant(S, samples=50_000, seed=1)
    for t in (0.5, 2.0, 3.0):
        scaled = structure_constant(S, samples=50_000, seed=1, metric_scale=t)
        assert scaled.lower == pytest.approx(base.lower / t, rel=1e-9)
        assert scaled.upper == pytest.approx(base.upper / t, rel=1e-12)


def test_dexp_examples(group, rng):
    g = group.random_element(rng)
    D0 = dexp_at(g, np.zeros(group.dim))
    assert np.array_equal(D0.matrix, np.eye(group.dim))
    assert D0.tail_bound <= 1e-12
    if group.is_abelian:
        assert np.array_equal(dexp_at(g, random_complex(rng, group.dim)).matrix, np.eye(group.dim))


def test_dexp_sl2_along_H():
    S = make_group("sl2")
    g = S.element([[1, 0.5], [0, 1]])
    for t in (0.1, 0.7 - 0.3j, 1.4j):
        xi = np.array([t, 0, 0])
        D = dexp_at(g, xi)
        assert D.tail_bound <= 1e-12
        assert np.abs(D.matrix - dexp_numeric(g, xi)).max() <= 1e-6
        # ad_H is diagonal with eigenvalues (0, 2, -2)/sqrt(2) * sqrt(2) t
        a = math.sqrt(2) * t
        f = lambda x: 1.0 if x == 0 else (1 - np.exp(-x)) / x
        assert np.allclose(np.diag(D.matrix), [1, f(a), f(-a)], atol=1e-12)


def test_dexp_matches_finite_differences_gl(rng):
    G = make_group("gl", 2)
    for _ in range(30):
        g = G.random_element(rng)
        xi = random_algebra(G, rng, 1.5)
        assert spectral_norm(dexp_at(g, xi).matrix - dexp_numeric(g, xi)) <= 1e-6


def test_dexp_norm_bound_examples(rng):
    A = make_group("additive", 2)
    assert dexp_norm_bound(A, random_complex(rng, 2)) == 1.0
    S = make_group("sl2")
    assert dexp_norm_bound(S, np.zeros(3)) == 1.0
    xi = np.array([0.5, 0, 0])
    C = 2.0
    assert dexp_norm_bound(S, xi, C) == pytest.approx(math.expm1(1.0))


def test_dexp_bound_dominance(rng):
    S = make_group("sl2")
    for _ in range(500):
        g = S.random_element(rng)
        xi = random_algebra(S, rng, 3.0)
        assert spectral_norm(dexp_at(g, xi).matrix) <= dexp_norm_bound(S, xi) + 1e-9


def test_property_suite_small(group):
    res = property_suite(group, samples=50, seed=5, ode_steps=500)
    assert set(res) == set(SUITE_TOLERANCES)
    assert all(r["passed"] for r in res.values()), res


def test_based_exp_is_left_translation(group, rng):
    g = group.random_element(rng)
    xi = random_algebra(group, rng)
    z = 0.3 + 0.8j
    assert np.array_equal(exp_at(g, xi, z).data, mul(g, one_param(group, xi, z)).data)
