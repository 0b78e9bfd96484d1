"""Constructive Zalcman rescaling on a complex Lie group.

For each index j the engine maximizes |(df_j)_g (xi)| over the exp-ball of
radius 1/j around p0 and unit xi, sets rho_j = 1/M_j, and forms

    phi_j(z) = f_j(exp_at(p_j, rho_j * z))

with z read as left-trivialized coordinates at p_j.  ``converge_check``
then measures how close consecutive phi_j are on a compact ball, and
``nonconstancy_witness`` recovers |(dphi_j)_0 (t_j)| = rho_j M_j = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConsistencyError, DegenerateFamilyError, DomainError, LieZalcmanError
from .expmap import dexp_at, exp_at
from .family import (
    HoloFamily,
    Region,
    _chart_of,
    _inside,
    ball_grid,
    check_region,
    df_top,
    sphere_directions,
)
from .liegroup import GroupElement, distance, left_translate_frame
from .numkernel import numeric_jacobian, spectral_norm
from .target import ProjectivePoint, fs_distance, lift_differential, point

REFINE_MAX_ITER = 50
REFINE_REL_STEP = 1e-4
DEFAULT_R_MAX = 1e3
BISECT_ITER = 60
RHO_M_TOL = 4.5e-16


@dataclass(frozen=True, eq=False)
class ArgmaxResult:
    M: float
    p: GroupElement
    xi: np.ndarray
    offset: np.ndarray  # algebra offset of p from p0 inside the exp-ball
    grid_max: float
    grid_spacing: float


def _score(fam, j, g, analytic):
    try:
        s, v = df_top(fam, j, g, analytic)
    except (LieZalcmanError, ArithmeticError):
        return -1.0, None
    if not math.isfinite(s):
        return -1.0, None
    return s, v


def argmax_Mj(
    fam: HoloFamily,
    j: int,
    p0: GroupElement,
    grid: int = 41,
    analytic: bool | None = None,
) -> ArgmaxResult:
    """max over the closed exp-ball B(p0, 1/j) and unit xi of |(df_j)_g xi|.

    Grid search (strict comparison in grid order, so ties go to the smallest
    grid index) followed by a coordinate pattern search on the 2m real
    offset coordinates, halving the step from half a grid cell down to
    1e-4 of the radius, at most 50 sweeps.
    """
    r = 1.0 / j
    region = Region(p0, r, grid)
    check_region(fam, region)
    best, arg = -1.0, None
    for xi in region.offsets():
        s, _ = _score(fam, j, exp_at(p0, xi), analytic)
        if s > best:
            best, arg = s, xi
    if arg is None or best <= 0.0:
        raise DegenerateFamilyError(f"{fam.name}: differential vanishes on the ball at j={j}")
    grid_max = best

    m = p0.group.dim
    x = np.concatenate([arg.real, arg.imag])
    step = region.spacing / 2
    for _ in range(REFINE_MAX_ITER):
        if step < REFINE_REL_STEP * r:
            break
        moved = False
        for a in range(2 * m):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[a] += sign * step
                xi = y[:m] + 1j * y[m:]
                if np.linalg.norm(xi) > r:
                    continue
                s, _ = _score(fam, j, exp_at(p0, xi), analytic)
                if s > best:
                    best, x, moved = s, y, True
        if not moved:
            step /= 2
    offset = x[:m] + 1j * x[m:]
    p = exp_at(p0, offset)
    M, v = df_top(fam, j, p, analytic)
    return ArgmaxResult(M, p, v, offset, grid_max, region.spacing)


@dataclass(frozen=True, eq=False)
class RescalingStep:
    """One rescaling datum (j, p_j, xi_j, M_j, rho_j) and the map phi_j it defines."""

    family: HoloFamily
    j: int
    p: GroupElement
    xi: np.ndarray
    M: float
    rho: float
    p0: GroupElement | None = None
    offset: float = 0.0  # |offset of p_j from p0| in the exp-ball chart
    proof_radius: float = 0.0  # R with exp-ball(p_j, rho R) inside the 1/j-ball and Omega
    domain_radius: float = 0.0  # R with exp-ball(p_j, rho R) inside Omega
    meta: dict = field(default_factory=dict)

    def base_point(self, z) -> GroupElement:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return exp_at(self.p, self.rho * left_translate_frame(self.p, z))

    def lift(self, z) -> np.ndarray:
        g = self.base_point(z)
        if not self.family.contains(g):
            raise DomainError(f"phi_{self.j}({np.asarray(z).tolist()}) leaves the domain")
        return np.asarray(self.family.lift(self.j, g), dtype=complex)

    def __call__(self, z) -> ProjectivePoint:
        return point(self.lift(z))


def _fits(fam: HoloFamily, p: GroupElement, radius: float, dirs: np.ndarray) -> bool:
    return all(_inside(fam, lambda: exp_at(p, radius * u)) for u in dirs)


def domain_radius(fam: HoloFamily, p: GroupElement, rho: float, R_max: float = DEFAULT_R_MAX) -> float:
    """sup R such that boundary samples of exp-ball(p, rho R) stay in Omega, by bisection."""
    dirs = sphere_directions(p.group.dim)
    if _fits(fam, p, rho * R_max, dirs):
        return R_max
    lo, hi = 0.0, R_max
    for _ in range(BISECT_ITER):
        mid = 0.5 * (lo + hi)
        if _fits(fam, p, rho * mid, dirs):
            lo = mid
        else:
            hi = mid
    return lo


def build_rescaled(
    fam: HoloFamily,
    j: int,
    p: GroupElement,
    rho: float,
    xi=None,
    M: float | None = None,
    p0: GroupElement | None = None,
    offset: float | None = None,
    R_max: float = DEFAULT_R_MAX,
) -> RescalingStep:
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if not fam.contains(p):
        raise DomainError(f"{fam.name}: p_{j} is outside the domain")
    if xi is None or M is None:
        M_here, xi_here = df_top(fam, j, p)
        xi = xi_here if xi is None else xi
        M = M_here if M is None else M
    if offset is None:
        offset = distance(p0, p) if p0 is not None else 0.0
    R_dom = domain_radius(fam, p, rho, R_max)
    R_proof = min(max(0.0, 1.0 / j - offset) / rho, R_dom)
    return RescalingStep(fam, j, p, np.asarray(xi, dtype=complex), float(M), float(rho),
                         p0, float(offset), R_proof, R_dom)


def rescale(
    fam: HoloFamily,
    p0: GroupElement,
    indices,
    grid: int = 41,
    analytic: bool | None = None,
    R_max: float = DEFAULT_R_MAX,
) -> list[RescalingStep]:
    """argmax_Mj followed by build_rescaled for each index."""
    steps = []
    for j in indices:
        res = argmax_Mj(fam, j, p0, grid, analytic)
        rho = 1.0 / res.M
        if abs(rho * res.M - 1.0) > RHO_M_TOL:
            raise ConsistencyError(f"rho*M = {rho * res.M!r} at j={j}")
        step = build_rescaled(fam, j, res.p, rho, res.xi, res.M, p0,
                              float(np.linalg.norm(res.offset)), R_max)
        steps.append(replace(step, meta={
            "grid_max": res.grid_max,
            "grid_spacing": res.grid_spacing,
            "refine_gain": res.M - res.grid_max,
            "offset_xi": res.offset,
        }))
    return steps


def rebase(step: RescalingStep, p: GroupElement, R_max: float = DEFAULT_R_MAX) -> RescalingStep:
    """Move a step to a new base point, recomputing M, xi and rho = 1/M there."""
    fam = step.family
    M, xi = df_top(fam, step.j, p)
    offset = distance(step.p0, p) if step.p0 is not None else 0.0
    new = build_rescaled(fam, step.j, p, 1.0 / M, xi, M, step.p0, offset, R_max)
    return replace(new, meta=dict(step.meta, rebased=True))


def nearest_root_of_unity(g: GroupElement, j: int) -> GroupElement:
    """Torus point whose coordinates are the j-th roots of unity closest to those of g."""
    k = np.round(np.angle(g.data) * j / (2 * np.pi))
    return g.group.element(np.exp(2j * np.pi * k / j))


# -- differentials of phi_j ------------------------------------------------------


def _fd_step(step: RescalingStep, h: float) -> float:
    # keep the group-side stencil near h/j regardless of rho
    return h / max(1.0, step.rho * step.j)


def rescaled_differential(step: RescalingStep, z=None, h: float = 1e-5) -> np.ndarray:
    """(dphi_j)_z in the standard frame of C^m and a Fubini-Study frame, by finite differences."""
    m = step.p.group.dim
    z = np.zeros(m, dtype=complex) if z is None else np.atleast_1d(np.asarray(z, dtype=complex))
    F = step.lift(z)
    k = _chart_of(F)

    def normalized(w):
        Fw = step.lift(w)
        return Fw / Fw[k]

    J = numeric_jacobian(normalized, z, _fd_step(step, h))
    return lift_differential(F / F[k], J)


def nonconstancy_witness(step: RescalingStep, h: float = 1e-5) -> float:
    """|(dphi_j)_0 (t_j)| where t_j is mapped to rho_j xi_j by (d exp_{p_j})_0 (d alpha_j)_0."""
    m = step.p.group.dim
    frame_map = step.rho * dexp_at(step.p, np.zeros(m)).matrix
    try:
        smin = 1.0 / spectral_norm(np.linalg.inv(frame_map))
    except (np.linalg.LinAlgError, LieZalcmanError):
        smin = 0.0
    if not smin > 1e-300:
        raise ConsistencyError(f"frame map at j={step.j} is singular")
    t = np.linalg.solve(frame_map, step.rho * step.xi)
    D = rescaled_differential(step, None, h)
    return float(np.linalg.norm(D @ t))


# -- convergence diagnostics -------------------------------------------------------


def sup_distance(phi, psi, R: float, grid: int, m: int = 1) -> float:
    """max over grid nodes of the ball |z| <= R of d_FS(phi(z), psi(z)); both return lifts."""
    worst = 0.0
    for z in ball_grid(m, R, grid):
        worst = max(worst, fs_distance(point(phi(z)), point(psi(z))))
    return worst


@dataclass
class ConvergenceReport:
    radius: float
    grid: int
    indices: list
    sup_distances: list  # between consecutive steps
    cauchy: bool
    limit_samples: list  # (z, homogeneous coords) from the largest index
    witness: float
    reference_distances: list | None = None


def converge_check(
    steps: list[RescalingStep],
    R: float,
    grid: int = 21,
    tolerance: float = 1e-6,
    slack: float = 1e-9,
    reference=None,
) -> ConvergenceReport:
    """Cauchy diagnostics of phi_j on the ball |z| <= R.

    The verdict is true when consecutive sup-distances are nonincreasing (up
    to ``slack``, which absorbs rounding noise when they are all ~0) and the
    last one is at most ``tolerance``.  ``reference`` is an optional lift of
    a known limit map; distances to it are reported per step.
    """
    if len(steps) < 3:
        raise DomainError("converge_check needs at least 3 steps")
    for s in steps:
        if s.domain_radius < R:
            raise DomainError(f"R = {R} exceeds the domain radius {s.domain_radius:.6g} of step j={s.j}")
    m = steps[0].p.group.dim
    d = [sup_distance(a.lift, b.lift, R, grid, m) for a, b in zip(steps, steps[1:])]
    cauchy = all(y <= x + slack for x, y in zip(d, d[1:])) and d[-1] <= tolerance
    last = steps[-1]
    samples = []
    for z in ball_grid(m, R, 3):
        samples.append((z, last(z).coords))
    ref = None
    if reference is not None:
        ref = [sup_distance(s.lift, reference, R, grid, m) for s in steps]
    return ConvergenceReport(R, grid, [s.j for s in steps], d, cauchy, samples,
                             nonconstancy_witness(last), ref)
