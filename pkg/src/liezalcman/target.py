"""Complex projective space P^n with the Fubini-Study metric.

Normalization: on the affine chart of P^1 the metric is |dw|^2 / (1+|w|^2)^2,
so geodesic distance is arccos|<p, q>| (diameter pi/2) and the operator norm
of df for f: C -> P^1 is the spherical derivative |f'| / (1 + |f|^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidFrameError, InvalidInputError
from .numkernel import as_matrix, spectral_norm

FRAME_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """Unit representative whose first nonzero coordinate is real positive."""

    coords: np.ndarray

    @property
    def n(self) -> int:
        return self.coords.size - 1

    def affine(self, chart: int = 0) -> np.ndarray:
        """Inhomogeneous coordinates in the chart {coords[chart] != 0}."""
        c = self.coords
        if c[chart] == 0:
            raise InvalidInputError(f"point lies outside chart {chart}")
        return np.delete(c, chart) / c[chart]


def normalize(v) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("homogeneous coordinates must be finite")
    big = np.abs(v).max()
    if big == 0.0:
        raise InvalidInputError("homogeneous coordinates must not all be zero")
    # exact power-of-two rescale; complex division by a subnormal overflows
    e = -int(np.frexp(big)[1])
    v = np.ldexp(v.real, e) + 1j * np.ldexp(v.imag, e)
    v = v / np.linalg.norm(v)
    k = int(np.flatnonzero(v)[0])
    # phase via angle: v[k] may be subnormal, where |v|/v overflows
    v = v * np.exp(-1j * np.angle(v[k]))
    v[k] = abs(v[k])
    return v


def point(v) -> ProjectivePoint:
    return ProjectivePoint(normalize(v))


def from_affine(w, chart: int = 0) -> ProjectivePoint:
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    return point(np.insert(w, chart, 1.0))


def fs_distance(p, q) -> float:
    """Geodesic Fubini-Study distance arccos|<p, q>| (unit representatives)."""
    a = p.coords if isinstance(p, ProjectivePoint) else normalize(p)
    b = q.coords if isinstance(q, ProjectivePoint) else normalize(q)
    if a.size != b.size:
        raise InvalidInputError(f"dimension mismatch: P^{a.size - 1} vs P^{b.size - 1}")
    if a.tobytes() > b.tobytes():
        a, b = b, a  # canonical order makes d(p, q) == d(q, p) bit for bit
    c = abs(np.vdot(a, b))
    # |a ^ b| = sin d, computed directly: accurate near 0 where arccos is not
    i, k = np.triu_indices(a.size, 1)
    sn = float(np.linalg.norm(a[i] * b[k] - a[k] * b[i]))
    return math.atan2(sn, float(c))


def lift_differential(F, dF) -> np.ndarray:
    """Differential of z -> [F(z)] from a holomorphic lift.

    ``F`` is the lift value (n+1,), ``dF`` its derivative (n+1, m) in an
    orthonormal source frame.  Returns the (n+1, m) matrix P dF / |F|, with
    P the orthogonal projection onto F-perp; its singular values are those of
    the differential measured against an orthonormal frame of the target.
    """
    F = np.asarray(F, dtype=complex)
    dF = np.asarray(dF, dtype=complex).reshape(F.size, -1)
    nF = np.linalg.norm(F)
    u = F / nF
    return (dF - np.outer(u, u.conj() @ dF)) / nF


@dataclass(frozen=True, eq=False)
class TargetMetricFrame:
    """Fubini-Study orthonormal frame of the tangent space at ``base``, in an affine chart."""

    base: ProjectivePoint
    chart: int
    vectors: np.ndarray  # columns are the frame vectors in chart coordinates

    def gram(self) -> np.ndarray:
        G = fs_metric(self.base.affine(self.chart))
        return self.vectors.conj().T @ G @ self.vectors


def fs_metric(w) -> np.ndarray:
    """Hermitian matrix of the metric at affine point w: |v|^2 = v^H G v."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    s = 1.0 + float(np.vdot(w, w).real)
    return (s * np.eye(w.size) - np.outer(w, w.conj())) / s**2


def chart_frame(p: ProjectivePoint, chart: int = 0) -> TargetMetricFrame:
    w = p.affine(chart)
    s = 1.0 + float(np.vdot(w, w).real)
    r2 = s - 1.0
    P = np.outer(w, w.conj()) / r2 if r2 > 0 else np.zeros((w.size, w.size), dtype=complex)
    # G = (I - P)/s + P/s^2, so G^{-1/2} = sqrt(s) (I - P) + s P
    A = math.sqrt(s) * (np.eye(w.size) - P) + s * P
    frame = TargetMetricFrame(p, chart, A)
    check_frame(frame)
    return frame


def check_frame(frame: TargetMetricFrame) -> None:
    resid = np.abs(frame.gram() - np.eye(frame.vectors.shape[1])).max()
    if resid > FRAME_TOL:
        raise InvalidFrameError(f"frame Gram residual {resid:.3e} > {FRAME_TOL}")


def chart_frame_matrix(frame: TargetMetricFrame, J) -> np.ndarray:
    """Express an affine-chart Jacobian J (n, m) in the orthonormal frame."""
    return np.linalg.solve(frame.vectors, np.asarray(J, dtype=complex).reshape(frame.vectors.shape[0], -1))


def differential_norm(df, frame: TargetMetricFrame | None = None) -> float:
    """Operator norm of a differential given in orthonormal source/target frames.

    When the target ``frame`` the matrix was expressed in is supplied, its
    orthonormality is verified first.
    """
    if frame is not None:
        check_frame(frame)
    return spectral_norm(as_matrix(df))
