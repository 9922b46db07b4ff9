"""Quadrature of 2p-Dirichlet energies, Jacobian residuals, circle energies.

Region energies use break-aligned composite Gauss-Legendre grids (polar for
Euclidean discs/annuli, rotated-coordinate tensor grids for l1 balls, a
symmetric triangle rule for polygons).  Circle energies use the periodic
trapezoid rule, which is spectrally accurate for smooth integrands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BreakRadius, EvaluationFailure, JacobianMismatch
from .geometry import TWO_PI, det2, frobenius
from .maps import FD_SCALE, PlanarMap
from .radial import (
    GeneralisedStretching,
    RadialDatum,
    condition_report,
    profile_from_datum,
    zhukovsky,
)
from .regions import Region, annulus, quasi_random_points

_GL_ORDER = 4

# 6-point symmetric triangle rule, exact to degree 4
_TRI_A = 0.445948490915965
_TRI_B = 0.091576213509771
_TRI_WA = 0.223381589678011
_TRI_WB = 0.109951743655322


def _composite_gl(edges, n_target: int):
    """Composite Gauss-Legendre nodes/weights over consecutive edge intervals."""
    edges = np.asarray(sorted(set(float(e) for e in edges)))
    lengths = np.diff(edges)
    total = float(np.sum(lengths))
    x0, w0 = np.polynomial.legendre.leggauss(_GL_ORDER)
    nodes, weights = [], []
    for a, b, ln in zip(edges[:-1], edges[1:], lengths):
        chunks = max(1, int(round(n_target * ln / total / _GL_ORDER)))
        sub = np.linspace(a, b, chunks + 1)
        for s0, s1 in zip(sub[:-1], sub[1:]):
            mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
            nodes.append(mid + half * x0)
            weights.append(half * w0)
    return np.concatenate(nodes), np.concatenate(weights)


def _sector(constraints) -> tuple[float, float]:
    """Angular interval cut out of [0, 2pi) by half-plane constraints."""
    lo, hi = 0.0, TWO_PI
    cs = set(constraints)
    if not cs:
        return lo, hi
    intervals = {
        frozenset(): (0.0, TWO_PI),
        frozenset({"x>0"}): (-np.pi / 2, np.pi / 2),
        frozenset({"x<0"}): (np.pi / 2, 3 * np.pi / 2),
        frozenset({"y>0"}): (0.0, np.pi),
        frozenset({"y<0"}): (np.pi, TWO_PI),
        frozenset({"x>0", "y>0"}): (0.0, np.pi / 2),
        frozenset({"x<0", "y>0"}): (np.pi / 2, np.pi),
        frozenset({"x<0", "y<0"}): (np.pi, 3 * np.pi / 2),
        frozenset({"x>0", "y<0"}): (3 * np.pi / 2, TWO_PI),
    }
    try:
        return intervals[frozenset(cs)]
    except KeyError as exc:
        raise ValueError(f"unsupported constraint set {cs}") from exc


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights for a region, aligned with declared breaks."""

    region: Region
    nodes: np.ndarray
    weights: np.ndarray
    break_aligned: bool

    def check_area(self, rtol: float = 1e-10) -> bool:
        return abs(float(np.sum(self.weights)) - self.region.area()) <= rtol * self.region.area()


def build_grid(
    region: Region,
    n: int = 256,
    break_radii=(),
    break_angles=(),
) -> QuadratureGrid:
    """A tensor quadrature grid with roughly n x n nodes over the region."""
    if region.kind in ("disc", "annulus"):
        r_lo = region.r_in
        r_edges = [r_lo, region.r_out] + [
            float(b) for b in break_radii if r_lo < b < region.r_out
        ]
        t_lo, t_hi = _sector(region.constraints)
        t_edges = [t_lo, t_hi] + [float(a) for a in break_angles if t_lo < a < t_hi]
        rs, wr = _composite_gl(r_edges, n)
        ts, wt = _composite_gl(t_edges, n)
        R, T = np.meshgrid(rs, ts, indexing="ij")
        nodes = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
        weights = ((wr * rs)[:, None] * wt[None, :]).reshape(-1)
        return QuadratureGrid(region, nodes, weights, True)

    if region.kind in ("l1_ball", "l1_annulus"):
        if region.constraints:
            raise ValueError("constrained l1 regions are not gridded")
        R = region.r_out
        marks = sorted({region.r_in, R} | {float(b) for b in break_radii if 0 < b < R})
        marks = [m for m in marks if m > 0]
        edges = sorted({-m for m in marks} | set(marks) | {0.0})
        # rotated coordinates s = x + y, t = x - y; |z|_1 = max(|s|, |t|)
        ss, ws = _composite_gl(edges, n)
        ts, wt = _composite_gl(edges, n)
        S, T = np.meshgrid(ss, ts, indexing="ij")
        W = 0.5 * ws[:, None] * wt[None, :]
        keep = np.maximum(np.abs(S), np.abs(T)) > region.r_in
        nodes = np.stack([(S + T) / 2.0, (S - T) / 2.0], axis=-1)[keep]
        return QuadratureGrid(region, nodes.reshape(-1, 2), W[keep].reshape(-1), True)

    if region.kind == "polygon":
        return _polygon_grid(region, n)

    raise ValueError(f"cannot grid region kind {region.kind!r}")


def _polygon_grid(region: Region, n: int) -> QuadratureGrid:
    verts = np.asarray(region.vertices, dtype=float)
    centroid = verts.mean(axis=0)
    tris = [
        np.array([centroid, verts[i], verts[(i + 1) % len(verts)]])
        for i in range(len(verts))
    ]
    # subdivide until the node count is comparable to n*n
    levels = max(0, int(math.ceil(math.log(max(n * n / (6 * len(tris)), 1), 4))))
    for _ in range(levels):
        finer = []
        for t in tris:
            m01, m12, m20 = (t[0] + t[1]) / 2, (t[1] + t[2]) / 2, (t[2] + t[0]) / 2
            finer += [
                np.array([t[0], m01, m20]),
                np.array([m01, t[1], m12]),
                np.array([m20, m12, t[2]]),
                np.array([m01, m12, m20]),
            ]
        tris = finer
    bary = np.array(
        [
            [1 - 2 * _TRI_A, _TRI_A, _TRI_A],
            [_TRI_A, 1 - 2 * _TRI_A, _TRI_A],
            [_TRI_A, _TRI_A, 1 - 2 * _TRI_A],
            [1 - 2 * _TRI_B, _TRI_B, _TRI_B],
            [_TRI_B, 1 - 2 * _TRI_B, _TRI_B],
            [_TRI_B, _TRI_B, 1 - 2 * _TRI_B],
        ]
    )
    wb = np.array([_TRI_WA] * 3 + [_TRI_WB] * 3)
    tris = np.asarray(tris)  # (T, 3, 2)
    areas = 0.5 * np.abs(
        (tris[:, 1, 0] - tris[:, 0, 0]) * (tris[:, 2, 1] - tris[:, 0, 1])
        - (tris[:, 2, 0] - tris[:, 0, 0]) * (tris[:, 1, 1] - tris[:, 0, 1])
    )
    nodes = np.einsum("qb,tbi->tqi", bary, tris).reshape(-1, 2)
    weights = (areas[:, None] * wb[None, :]).reshape(-1)
    return QuadratureGrid(region, nodes, weights, True)


@dataclass(frozen=True)
class EnergyReport:
    """A quadrature value of the 2p-energy with a two-level error estimate."""

    value: float
    p: float
    region: Region
    refinement_estimate: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "p": self.p,
            "region": self.region.kind,
            "refinement_estimate": self.refinement_estimate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _energy_on_grid(u: PlanarMap, p: float, grid: QuadratureGrid) -> float:
    jac = u.jacobian(grid.nodes)
    dens = np.sum(jac * jac, axis=(-2, -1))
    if not np.all(np.isfinite(dens)):
        raise EvaluationFailure(f"{u.name} returned non-finite derivatives")
    return float(np.sum(grid.weights * dens**p))


def region_energy(u: PlanarMap, p: float, region: Region, n: int = 256) -> EnergyReport:
    """Quadrature of the 2p-energy over the region, on a break-aligned grid.

    Two grid levels are used; the report carries the finest value and the
    difference between levels as the refinement estimate.
    """
    fine = build_grid(region, n, u.break_radii, u.break_angles)
    coarse = build_grid(region, max(n // 2, 8), u.break_radii, u.break_angles)
    v_fine = _energy_on_grid(u, p, fine)
    v_coarse = _energy_on_grid(u, p, coarse)
    return EnergyReport(
        value=v_fine,
        p=p,
        region=region,
        refinement_estimate=abs(v_fine - v_coarse),
    )


def circle_energy(u: PlanarMap, p: float, r: float, n: int = 1024) -> float:
    """integral_0^{2pi} |Du(r e^{i theta})|^{2p} d theta by periodic trapezoid."""
    if n < 256:
        raise ValueError("need at least 256 angular samples")
    margin = 10 * FD_SCALE * max(1.0, r)
    for b in u.break_radii:
        if abs(r - b) <= margin:
            raise BreakRadius(f"circle r={r} touches the break radius {b}")
    theta = np.arange(n) * (TWO_PI / n)
    pts = r * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    jac = u.jacobian(pts)
    dens = np.sum(jac * jac, axis=(-2, -1))
    if not np.all(np.isfinite(dens)):
        raise EvaluationFailure(f"{u.name} returned non-finite derivatives on S_r")
    return float(np.sum(dens**p) * (TWO_PI / n))


def jacobian_residual(
    u: PlanarMap,
    f_field,
    region: Region,
    n: int = 4096,
    seed: int | None = None,
    margin: float | None = None,
) -> tuple[float, float]:
    """(max, mean) of |det Du - f| over quasi-random samples off the breaks."""
    lo, hi = region.bbox()
    scale = float(np.max(np.abs(np.concatenate([lo, hi]))))
    if margin is None:
        margin = 10 * FD_SCALE * max(1.0, scale)
    pts = quasi_random_points(
        region, n, seed=seed, min_break_distance=margin,
        break_distance=u.break_distance,
    )
    res = np.abs(det2(u.jacobian(pts)) - np.asarray(f_field(pts)))
    return float(np.max(res)), float(np.mean(res))


def lipschitz_estimate(
    u: PlanarMap,
    region: Region | None = None,
    n: int = 20000,
    seed: int | None = None,
) -> float:
    """Sampled maximum of the Frobenius norm |Du|; a lower bound for the sup."""
    region = region or u.domain
    lo, hi = region.bbox()
    scale = float(np.max(np.abs(np.concatenate([lo, hi]))))
    margin = 10 * FD_SCALE * max(1.0, scale)
    pts = quasi_random_points(
        region, n, seed=seed, min_break_distance=margin,
        break_distance=u.break_distance,
    )
    return float(np.max(frobenius(u.jacobian(pts))))


@dataclass(frozen=True)
class ZhukovskyRow:
    r: float
    lhs: float
    rhs: float
    ratio: float


def zhukovsky_comparison(
    datum: RadialDatum,
    u: PlanarMap,
    p: float,
    radii,
    n_theta: int = 2048,
    check_jacobian: bool = True,
) -> tuple[list[ZhukovskyRow], float]:
    """Per-circle comparison of the symmetric stretching against a competitor.

    For each radius r: lhs is the circle energy of the degree-one stretching
    for the datum, rhs is Z(lambda*) times the circle energy of u.  When u
    solves the same Jacobian equation and satisfies the parametric
    isoperimetric inequality, lhs <= rhs up to quadrature error.
    """
    radii = np.asarray(radii, dtype=float)
    report = condition_report(datum)
    if not math.isfinite(report.lambda_star):
        raise JacobianMismatch("datum has no finite lambda*; comparison undefined")
    if check_jacobian:
        shell = annulus(0.5 * float(np.min(radii)), float(np.max(radii)))
        worst, _ = jacobian_residual(u, datum.as_field(), shell, n=2048, seed=0)
        if worst >= 1e-3:
            raise JacobianMismatch(
                f"competitor violates the Jacobian constraint (max {worst:.3e})"
            )
    k = -1 if report.orientation == "nonpositive" else 1
    phi1 = GeneralisedStretching(profile_from_datum(datum, k)).as_planar_map()
    z = float(zhukovsky(report.lambda_star))
    rows = []
    for r in radii:
        lhs = circle_energy(phi1, p, float(r), n=n_theta)
        rhs = z * circle_energy(u, p, float(r), n=n_theta)
        rows.append(ZhukovskyRow(r=float(r), lhs=lhs, rhs=rhs, ratio=lhs / rhs))
    return rows, report.lambda_star
