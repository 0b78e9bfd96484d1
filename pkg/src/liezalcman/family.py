"""Holomorphic families into P^n and the Marty normality scan."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidInputError, LieZalcmanError, ScanError
from .expmap import exp_at
from .liegroup import Additive, GroupElement, GroupInstance, SL2, Torus, random_algebra
from .numkernel import numeric_jacobian, spectral_norm, top_singular_pair
from .target import lift_differential

SPOT_CHECKS = 20
SPOT_TOL = 1e-6
DEFAULT_GRID = 41
DEFAULT_CAP = 1e6
MAX_NODES = 5_000_000
FAILURE_FRACTION = 0.01

Lift = Callable[[int, GroupElement], np.ndarray]


@dataclass(eq=False)
class HoloFamily:
    """Indexed family j -> f_j of holomorphic maps Omega -> P^n.

    Maps are given by a holomorphic lift to C^{n+1}; ``dlift`` (optional) is
    its derivative in the left-trivialized orthonormal source frame, shape
    (n+1, m).  ``probe`` draws a random point of Omega for spot checks.
    """

    name: str
    group: GroupInstance
    lift: Lift
    contains: Callable[[GroupElement], bool]
    probe: Callable[[np.random.Generator], GroupElement]
    dlift: Callable[[int, GroupElement], np.ndarray] | None = None
    target_dim: int = 1
    limit: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)
    spot_indices: tuple = (1, 2, 3, 5, 8)

    def __post_init__(self):
        if self.dlift is not None:
            self.spot_check()

    def spot_check(self, seed: int = 12345) -> float:
        """Compare ``dlift`` with finite differences at random points; returns the worst residual."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for k in range(SPOT_CHECKS):
            j = self.spot_indices[k % len(self.spot_indices)]
            g = self.probe(rng)
            A = _local_derivative(self, j, g, analytic=True)
            N = _local_derivative(self, j, g, analytic=False)
            err = float(np.abs(A - N).max()) / max(1.0, float(np.abs(A).max()))
            worst = max(worst, err)
            if err > SPOT_TOL:
                raise InvalidInputError(
                    f"{self.name}: analytic differential disagrees with finite differences "
                    f"at j={j}, g={g.data.tolist()} (relative error {err:.3e})"
                )
        return worst


def _chart_of(F: np.ndarray) -> int:
    return int(np.argmax(np.abs(F)))


def _local_derivative(fam: HoloFamily, j: int, g: GroupElement, analytic: bool) -> np.ndarray:
    """Derivative of the lift normalized by its largest coordinate at g."""
    F = np.asarray(fam.lift(j, g), dtype=complex)
    k = _chart_of(F)
    if analytic:
        dF = np.asarray(fam.dlift(j, g), dtype=complex).reshape(F.size, -1)
        return dF / F[k] - np.outer(F, dF[k]) / F[k] ** 2

    def normalized(xi):
        Fx = np.asarray(fam.lift(j, exp_at(g, xi)), dtype=complex)
        return Fx / Fx[k]

    return numeric_jacobian(normalized, np.zeros(fam.group.dim, dtype=complex))


def df_frame(fam: HoloFamily, j: int, g: GroupElement, analytic: bool | None = None) -> np.ndarray:
    """(df_j)_g in the left-trivialized source frame and a Fubini-Study target frame."""
    if not fam.contains(g):
        raise DomainError(f"{fam.name}: point {g.data.tolist()} is outside the domain")
    use_analytic = fam.dlift is not None if analytic is None else analytic
    if use_analytic and fam.dlift is None:
        raise InvalidInputError(f"{fam.name} has no analytic differential")
    if use_analytic:
        F = np.asarray(fam.lift(j, g), dtype=complex)
        return lift_differential(F, fam.dlift(j, g))
    F = np.asarray(fam.lift(j, g), dtype=complex)
    F = F / F[_chart_of(F)]
    return lift_differential(F, _local_derivative(fam, j, g, analytic=False))


def df_norm(fam: HoloFamily, j: int, g: GroupElement, analytic: bool | None = None) -> float:
    return spectral_norm(df_frame(fam, j, g, analytic))


def df_top(fam: HoloFamily, j: int, g: GroupElement, analytic: bool | None = None):
    """(|df_j|_g, unit maximizing direction) via the top singular pair."""
    return top_singular_pair(df_frame(fam, j, g, analytic))


# -- regions ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Region:
    """Exp-ball {exp_at(center, xi) : |xi| <= radius} sampled on a product grid.

    ``grid`` counts points per real axis; there are 2m real axes, so the
    raw grid has grid**(2m) nodes before clipping to the ball.
    """

    center: GroupElement
    radius: float
    grid: int = DEFAULT_GRID

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidInputError(f"radius must be positive, got {self.radius}")
        if self.grid < 2:
            raise InvalidInputError(f"grid must have at least 2 points per axis, got {self.grid}")
        if self.grid ** (2 * self.center.group.dim) > MAX_NODES:
            raise InvalidInputError(
                f"grid {self.grid} over {2 * self.center.group.dim} real axes exceeds {MAX_NODES} nodes"
            )

    @property
    def spacing(self) -> float:
        return 2 * self.radius / (self.grid - 1)

    def offsets(self) -> np.ndarray:
        """Algebra offsets of the nodes, in lexicographic grid-index order."""
        return ball_grid(self.center.group.dim, self.radius, self.grid)

    def boundary(self, count: int = 64) -> np.ndarray:
        return sphere_directions(self.center.group.dim, count) * self.radius


def ball_grid(m: int, radius: float, grid: int) -> np.ndarray:
    axis = np.linspace(-radius, radius, grid)
    if grid % 2:
        axis[grid // 2] = 0.0
    pts = np.array(list(itertools.product(axis, repeat=2 * m)))
    xi = pts[:, :m] + 1j * pts[:, m:]
    keep = np.linalg.norm(xi, axis=1) <= radius * (1 + 1e-12)
    return xi[keep]


def sphere_directions(m: int, count: int = 64) -> np.ndarray:
    """Deterministic unit vectors in C^m used to probe ball boundaries."""
    if m == 1:
        return np.exp(2j * np.pi * np.arange(count) / count)[:, None]
    eye = np.eye(m, dtype=complex)
    rng = np.random.default_rng(2024)
    extra = rng.normal(size=(count, m)) + 1j * rng.normal(size=(count, m))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.concatenate([eye, -eye, 1j * eye, -1j * eye, extra])


def _inside(fam: HoloFamily, g_maker) -> bool:
    """Membership test that treats overflow while building the point as outside."""
    try:
        with np.errstate(over="raise", invalid="raise"):
            g = g_maker()
        return bool(fam.contains(g))
    except (LieZalcmanError, ArithmeticError):
        return False


def check_region(fam: HoloFamily, region: Region) -> None:
    """Raise DomainError unless the region's boundary samples lie in Omega."""
    c = region.center
    for xi in region.boundary():
        if not _inside(fam, lambda: exp_at(c, xi)):
            raise DomainError(
                f"{fam.name}: exp-ball of radius {region.radius:g} around {c.data.tolist()} leaves the domain"
            )


# -- Marty scan ----------------------------------------------------------------


@dataclass
class NormalityReport:
    family: str
    indices: list
    maxima: list
    argmax: list  # algebra offsets of the maximizing nodes
    failures: int
    nodes: int
    growth_exponent: float | None
    classification: str  # "bounded" | "growing"
    verdict: str  # "normal" | "non-normal" | "inconclusive"
    cap: float


def _growth_exponent(indices, maxima) -> float | None:
    pts = [(math.log(j), math.log(v)) for j, v in zip(indices, maxima) if v > 0 and j > 0]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def classify(indices, maxima, cap: float = DEFAULT_CAP, tail: int = 5) -> tuple[str, str]:
    if all(v <= cap for v in maxima):
        return "bounded", "normal"
    last = maxima[-tail:]
    monotone = len(last) >= min(tail, len(maxima)) and all(b > a for a, b in zip(last, last[1:]))
    if monotone and last[-1] > cap:
        return "growing", "non-normal"
    return "growing", "inconclusive"


def marty_scan(
    fam: HoloFamily,
    region: Region,
    indices,
    cap: float = DEFAULT_CAP,
    analytic: bool | None = None,
) -> NormalityReport:
    """Grid maxima of |df_j| over ``region`` for each j, with a normality verdict.

    Nodes are reduced in grid-index order with a strict comparison, so ties
    resolve to the lexicographically smallest node.  Nodes whose evaluation
    fails are skipped and counted; more than 1% failures aborts the scan.
    """
    indices = list(indices)
    if not indices:
        raise InvalidInputError("indices must be nonempty")
    check_region(fam, region)
    offsets = region.offsets()
    points = [exp_at(region.center, xi) for xi in offsets]
    maxima, argmax = [], []
    failures = 0
    for j in indices:
        best, arg = -1.0, None
        for xi, g in zip(offsets, points):
            try:
                v = df_norm(fam, j, g, analytic)
            except (LieZalcmanError, ArithmeticError):
                failures += 1
                continue
            if not math.isfinite(v):
                failures += 1
                continue
            if v > best:
                best, arg = v, xi
        if arg is None:
            raise ScanError(f"{fam.name}: every node failed at j={j}")
        maxima.append(best)
        argmax.append(arg)
    total = len(points) * len(indices)
    if failures > FAILURE_FRACTION * total:
        raise ScanError(f"{fam.name}: {failures} of {total} node evaluations failed")
    classification, verdict = classify(indices, maxima, cap)
    return NormalityReport(
        family=fam.name,
        indices=indices,
        maxima=maxima,
        argmax=argmax,
        failures=failures,
        nodes=len(points),
        growth_exponent=_growth_exponent(indices, maxima),
        classification=classification,
        verdict=verdict,
        cap=cap,
    )


# -- built-in families -------------------------------------------------------------


def _pow_lift(u: complex, j: int, c: complex = 1.0):
    """Lift of c*u^j and d/du of that lift, in the chart that keeps it bounded."""
    if abs(u) <= 1.0:
        return np.array([1.0, c * u**j]), np.array([0.0, c * j * u ** (j - 1)])
    v = 1.0 / u
    return np.array([v**j / c, 1.0]), np.array([-j * v ** (j + 1) / c, 0.0])


def _first_coord_column(m: int, d: np.ndarray) -> np.ndarray:
    out = np.zeros((d.size, m), dtype=complex)
    out[:, 0] = d
    return out


def _disk_probe(m: int, radius: float):
    def probe(rng):
        return Additive(m).element(random_algebra(Additive(m), rng, radius))

    return probe


def _ball_contains(radius: float | None):
    if radius is None:
        return lambda g: bool(np.all(np.isfinite(g.data)))
    return lambda g: float(np.linalg.norm(g.data)) < radius


def linear_family(m: int = 1, coefficient: complex = 1.0, domain_radius: float | None = None) -> HoloFamily:
    """f_j(z) = c j z_1 on C^m."""
    G = Additive(m)
    c = complex(coefficient)
    if c == 0:
        raise InvalidInputError("coefficient must be nonzero")

    def lift(j, g):
        u = c * j * g.data[0]
        return np.array([1.0, u]) if abs(u) <= 1 else np.array([1.0 / u, 1.0])

    def dlift(j, g):
        u = c * j * g.data[0]
        d = np.array([0.0, c * j]) if abs(u) <= 1 else np.array([-c * j / u**2, 0.0])
        return _first_coord_column(m, d)

    return HoloFamily(
        "linear-family", G, lift, _ball_contains(domain_radius), _disk_probe(m, 1.0), dlift,
        limit=lambda z: np.array([1.0, c / abs(c) * z[0]]),
        params={"coefficient": c, "dim": m, "domain_radius": domain_radius},
    )


def power_family(m: int = 1, coefficient: complex = 1.0, domain_radius: float | None = None) -> HoloFamily:
    """f_j(z) = c z_1^j on C^m."""
    G = Additive(m)
    c = complex(coefficient)
    if c == 0:
        raise InvalidInputError("coefficient must be nonzero")

    def lift(j, g):
        return _pow_lift(g.data[0], j, c)[0]

    def dlift(j, g):
        return _first_coord_column(m, _pow_lift(g.data[0], j, c)[1])

    return HoloFamily(
        "power-family", G, lift, _ball_contains(domain_radius), _disk_probe(m, 1.2), dlift,
        params={"coefficient": c, "dim": m, "domain_radius": domain_radius},
    )


def exp_family(m: int = 1, domain_radius: float | None = None) -> HoloFamily:
    """f_j(z) = e^{j z_1} on C^m."""
    G = Additive(m)

    def lift(j, g):
        u = j * g.data[0]
        return np.array([1.0, np.exp(u)]) if u.real <= 0 else np.array([np.exp(-u), 1.0])

    def dlift(j, g):
        u = j * g.data[0]
        d = np.array([0.0, j * np.exp(u)]) if u.real <= 0 else np.array([-j * np.exp(-u), 0.0])
        return _first_coord_column(m, d)

    return HoloFamily(
        "exp-family", G, lift, _ball_contains(domain_radius), _disk_probe(m, 1.0), dlift,
        params={"dim": m, "domain_radius": domain_radius},
    )


def torus_power_family(m: int = 1, inner: float = 0.9, outer: float = 1.1) -> HoloFamily:
    """f_j(w) = w_1^j on the annular domain inner < |w_a| < outer of (C*)^m."""
    G = Torus(m)
    if not 0 < inner < 1 < outer:
        raise InvalidInputError("annulus must satisfy 0 < inner < 1 < outer")

    def contains(g):
        r = np.abs(g.data)
        return bool(np.all((r > inner) & (r < outer)))

    def lift(j, g):
        return _pow_lift(g.data[0], j)[0]

    def dlift(j, g):
        # d/dt (w e^t)^j = j w^j, i.e. w * d/dw
        w = g.data[0]
        return _first_coord_column(m, w * _pow_lift(w, j)[1])

    def probe(rng):
        r = rng.uniform(inner, outer, size=m)
        return G.element(r * np.exp(2j * np.pi * rng.uniform(size=m)))

    return HoloFamily(
        "torus-power-family", G, lift, contains, probe, dlift,
        limit=lambda z: np.array([1.0, np.exp(2.0 * z[0])]) if (2.0 * z[0]).real <= 0
        else np.array([np.exp(-2.0 * z[0]), 1.0]),
        params={"dim": m, "inner": inner, "outer": outer},
    )


def sl2_entry_family() -> HoloFamily:
    """f_j(g) = (g_11)^j on SL(2, C)."""
    G = SL2()
    basis = G.basis

    def lift(j, g):
        return _pow_lift(g.data[0, 0], j)[0]

    def dlift(j, g):
        du = (g.data @ basis)[:, 0, 0]  # d/dt (g exp(t eps_a))_11
        return np.outer(_pow_lift(g.data[0, 0], j)[1], du)

    return HoloFamily(
        "sl2-entry-family", G, lift, lambda g: True, lambda rng: G.random_element(rng, 0.8), dlift,
        params={},
    )


def constant_family(group: GroupInstance, value: complex = 0.5) -> HoloFamily:
    val = np.array([1.0, complex(value)])

    def probe(rng):
        return group.random_element(rng, 0.5)

    return HoloFamily(
        "constant-family", group, lambda j, g: val, lambda g: True, probe,
        lambda j, g: np.zeros((2, group.dim)), params={"value": complex(value)},
    )
