import math
from dataclasses import replace

import numpy as np
import pytest

from liezalcman.errors import ConsistencyError, DegenerateFamilyError, DomainError
from liezalcman.expmap import exp_at, structure_constant, bracket_upper_bound
from liezalcman.family import constant_family, linear_family, power_family, sl2_entry_family, torus_power_family
from liezalcman.liegroup import distance, make_group
from liezalcman.numkernel import spectral_norm
from liezalcman.target import fs_distance, point
from liezalcman.zalcman import (
    RHO_M_TOL,
    argmax_Mj,
    build_rescaled,
    converge_check,
    nearest_root_of_unity,
    nonconstancy_witness,
    rebase,
    rescale,
    rescaled_differential,
    sup_distance,
)


@pytest.fixture(scope="module")
def linear_steps():
    fam = linear_family()
    return rescale(fam, fam.group.identity(), range(1, 11), grid=41)


@pytest.fixture(scope="module")
def torus_steps():
    fam = torus_power_family()
    return rescale(fam, fam.group.identity(), [20, 40, 60, 80], grid=41)


@pytest.fixture(scope="module")
def snapped_torus_steps(torus_steps):
    return [rebase(s, nearest_root_of_unity(s.p, s.j)) for s in torus_steps]


@pytest.fixture(scope="module")
def sl2_steps():
    fam = sl2_entry_family()
    return rescale(fam, fam.group.identity(), [2, 4, 6], grid=5)


def test_argmax_linear():
    fam = linear_family()
    p0 = fam.group.identity()
    for j in (1, 7, 30):
        res = argmax_Mj(fam, j, p0, grid=41)
        assert res.M == pytest.approx(j, rel=0.01)
        assert abs(res.p.data[0]) <= res.grid_spacing
        assert np.linalg.norm(res.xi) == pytest.approx(1.0, abs=1e-12)


def test_argmax_constant_family_degenerate():
    fam = constant_family(make_group("additive", 1))
    with pytest.raises(DegenerateFamilyError):
        argmax_Mj(fam, 2, fam.group.identity(), grid=11)


def test_argmax_ball_outside_domain():
    fam = linear_family(domain_radius=0.5)
    with pytest.raises(DomainError):
        argmax_Mj(fam, 1, fam.group.identity(), grid=11)
    argmax_Mj(fam, 3, fam.group.identity(), grid=11)


def test_argmax_torus_grows_towards_unit_circle():
    fam = torus_power_family()
    p0 = fam.group.identity()
    Ms, mods = [], []
    for j in (20, 40, 80, 160, 320):
        res = argmax_Mj(fam, j, p0, grid=41)
        Ms.append(res.M)
        mods.append(abs(res.p.data[0]))
        # closed form: max over the ball of j r^j / (1 + r^{2j}) is j/2, at r = 1
        assert res.M == pytest.approx(j / 2, rel=1e-9)
    assert all(b > a for a, b in zip(Ms, Ms[1:]))
    assert all(abs(r - 1) <= 1e-9 for r in mods)


def test_step_invariants(linear_steps, torus_steps, sl2_steps):
    for steps in (linear_steps, torus_steps, sl2_steps):
        for s in steps:
            assert s.rho == 1.0 / s.M
            assert abs(s.rho * s.M - 1) <= RHO_M_TOL
            assert np.linalg.norm(s.xi) == pytest.approx(1.0, abs=1e-9)
            assert distance(s.p0, s.p) <= 1.0 / s.j + s.meta["grid_spacing"]


def test_phi_definition_pointwise(torus_steps, sl2_steps, rng):
    for s in torus_steps + sl2_steps:
        m = s.p.group.dim
        for _ in range(5):
            z = 0.3 * (rng.normal(size=m) + 1j * rng.normal(size=m))
            g = exp_at(s.p, s.rho * z)
            assert fs_distance(s(z), point(s.family.lift(s.j, g))) == 0.0


def test_build_rescaled_additive_reduction(rng):
    fam = power_family()
    A = fam.group
    for _ in range(20):
        p = complex(0.5 * rng.normal() + 0.5j * rng.normal())
        rho = rng.uniform(0.01, 1.0)
        j = int(rng.integers(1, 9))
        s = build_rescaled(fam, j, A.element([p]), rho)
        z = complex(rng.normal() + 1j * rng.normal())
        direct = fam.lift(j, A.element([p + rho * z]))
        assert fs_distance(s(np.array([z])), point(direct)) == 0.0
        assert fs_distance(s(np.zeros(1)), point(fam.lift(j, A.element([p])))) == 0.0


def test_build_rescaled_linear_identity():
    fam = linear_family()
    A = fam.group
    zs = [0, 0.5, -1 + 1j, 3j, 10 - 7j]
    for j in (1, 2, 13, 50):
        s = build_rescaled(fam, j, A.identity(), 1.0 / j)
        for z in zs:
            assert fs_distance(s(np.array([z])), point([1, z])) <= 1e-12


def test_build_rescaled_errors():
    fam = linear_family(domain_radius=1.0)
    A = fam.group
    with pytest.raises(DomainError):
        build_rescaled(fam, 1, A.identity(), 0.0)
    with pytest.raises(DomainError):
        build_rescaled(fam, 1, A.element([2.0]), 0.5)
    s = build_rescaled(fam, 4, A.identity(), 0.25)
    with pytest.raises(DomainError):
        s.lift(np.array([5.0]))


def test_domain_radius_grows():
    fam = linear_family(domain_radius=1.0)
    steps = rescale(fam, fam.group.identity(), [2, 4, 8, 16], grid=21)
    radii = [s.domain_radius for s in steps]
    assert radii == pytest.approx([2, 4, 8, 16], rel=1e-9)
    assert [s.proof_radius for s in steps] == pytest.approx([1, 1, 1, 1], rel=1e-9)


def test_domain_radius_grows_torus(torus_steps, snapped_torus_steps):
    dom = [s.domain_radius for s in torus_steps]
    assert all(b >= a for a, b in zip(dom, dom[1:]))
    assert dom[-1] > 2 * dom[0]
    # |df_j| is constant on the unit circle, so unsnapped p_j drift along it;
    # snapped to p_j = 1 the proof radius is (1/j) / (2/j) = 1/2 for every j
    proof = [s.proof_radius for s in snapped_torus_steps]
    assert proof == pytest.approx([0.5] * len(proof), rel=1e-9)


def test_witness_examples(linear_steps, torus_steps, sl2_steps):
    for s in linear_steps:
        assert nonconstancy_witness(s) == pytest.approx(1.0, abs=1e-9)
    for s in torus_steps + sl2_steps:
        assert nonconstancy_witness(s) == pytest.approx(1.0, abs=1e-6)


def test_witness_detects_corrupted_rho(linear_steps, torus_steps, sl2_steps):
    for s in (linear_steps[4], torus_steps[1], sl2_steps[1]):
        bad = replace(s, rho=s.rho / 2)
        assert nonconstancy_witness(bad) == pytest.approx(0.5, abs=1e-6)


def test_witness_singular_frame(linear_steps):
    with pytest.raises(ConsistencyError):
        nonconstancy_witness(replace(linear_steps[0], rho=0.0))


def test_converge_linear(linear_steps):
    rep = converge_check(linear_steps, 2.0, grid=11, reference=linear_steps[0].family.limit)
    assert rep.sup_distances == pytest.approx([0.0] * 9, abs=1e-15)
    assert rep.cauchy
    assert max(rep.reference_distances) <= 1e-15
    assert rep.witness == pytest.approx(1.0, abs=1e-9)


def test_converge_duplicated_step(sl2_steps):
    s = sl2_steps[0]
    rep = converge_check([s, s, s], 0.1, grid=5)
    assert rep.sup_distances == [0.0, 0.0]


def test_converge_errors(linear_steps):
    with pytest.raises(DomainError):
        converge_check(linear_steps[:2], 1.0)
    fam = linear_family(domain_radius=1.0)
    steps = rescale(fam, fam.group.identity(), [2, 4, 8], grid=21)
    with pytest.raises(DomainError, match="j=2"):
        converge_check(steps, 3.0)


def test_converge_torus_snapped():
    fam = torus_power_family()
    idx = [40, 60, 80, 100, 120]
    steps = rescale(fam, fam.group.identity(), idx, grid=41)
    snapped = [rebase(s, nearest_root_of_unity(s.p, s.j)) for s in steps]
    for s in snapped:
        assert abs(s.p.data[0] ** s.j - 1) <= 1e-12
    rep = converge_check(snapped, 1.0, grid=11, tolerance=1e-2, reference=fam.limit)
    assert max(rep.reference_distances) <= 1e-10
    assert rep.cauchy


def test_nearest_root_of_unity():
    T = make_group("torus", 1)
    r = nearest_root_of_unity(T.element([np.exp(0.26j)]), 12)
    assert r.data[0] == pytest.approx(np.exp(2j * np.pi / 12 * 0.0) if 0.26 < np.pi / 12 else np.exp(2j * np.pi / 12))
    assert abs(r.data[0] ** 12 - 1) <= 1e-13


def test_sup_distance_examples():
    f = lambda z: np.array([1.0, z[0]])
    g = lambda z: np.array([1.0, z[0] + 1e-3])
    assert sup_distance(f, f, 2.0, 11) == 0.0
    d = sup_distance(f, g, 1.0, 11)
    assert d == pytest.approx(1e-3, rel=1e-2)


def _bound(C, rho, r):
    x = C * rho * r
    return 1.0 if x < 1e-14 else math.expm1(x) / x


def test_differential_bound_along_proof(linear_steps, snapped_torus_steps, sl2_steps, rng):
    """|dphi_z| <= (e^{C rho r} - 1)/(C rho r) on |z| <= r inside the 1/j-ball.

    The sharp form has no leading r factor; the looser r-weighted form
    is also checked for r >= 1.
    """
    checked = 0
    for s in linear_steps + snapped_torus_steps + sl2_steps:
        G = s.p.group
        C = bracket_upper_bound(G)
        r0 = s.proof_radius
        assert spectral_norm(rescaled_differential(s)) <= 1 + 1e-6
        if r0 == 0:
            continue
        checked += 1
        for _ in range(10):
            u = rng.normal(size=G.dim) + 1j * rng.normal(size=G.dim)
            z = u / np.linalg.norm(u) * r0 * rng.uniform() ** (1 / (2 * G.dim))
            val = spectral_norm(rescaled_differential(s, z))
            assert val <= _bound(C, s.rho, r0) + 1e-6
            r1 = max(1.0, r0)
            assert val <= r1 * _bound(C, s.rho, r1) + 1e-6
    assert checked >= len(linear_steps) + len(snapped_torus_steps)


def test_differential_linear_exact(linear_steps):
    s = linear_steps[5]
    for z in (0.0, 0.4, 0.6j, -0.9):
        val = spectral_norm(rescaled_differential(s, np.array([z])))
        assert val == pytest.approx(1 / (1 + abs(z) ** 2), rel=1e-8)


def test_rescale_metadata(torus_steps):
    for s in torus_steps:
        assert s.meta["refine_gain"] >= 0
        assert s.meta["grid_max"] <= s.M
