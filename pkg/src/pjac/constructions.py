"""Explicit constructions: ball-to-square chart, shear and wedge maps, the
piecewise counterexample assembly, and the sign-changing balanced datum.

All maps are continuous and piecewise smooth with closed-form branch
Jacobians; interfaces between branches are declared so continuity can be
audited by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (
    ConstraintInfeasible,
    GluingMismatch,
    OriginEvaluation,
    OutsideWedge,
)
from .maps import Interface, PlanarMap, reflect_extend, rotate_map
from .radial import (
    AffineExpr,
    ConstExpr,
    GeneralisedStretching,
    Piece,
    PolyExpr,
    RadialDatum,
    RadialProfile,
    profile_from_datum,
)
from .regions import disc, l1_annulus, l1_ball, l1_norm

rotated_family = rotate_map  # precompose with a rotation; energies unchanged

_SQRT2 = math.sqrt(2.0)
_ROT45 = np.array([[_SQRT2 / 2, -_SQRT2 / 2], [_SQRT2 / 2, _SQRT2 / 2]])


# ---------------------------------------------------------------------------
# ball onto square
# ---------------------------------------------------------------------------


def _eta_fn(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = np.hypot(x, y)
    out = np.zeros_like(pts)
    b1 = np.abs(y) < np.abs(x)
    b2 = ~b1 & (r > 0)
    # |y| < |x|: sgn(x) r/sqrt2 * (1, (4/pi) atan(y/x))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(b1, np.arctan(np.where(b1, y, 0.0) / np.where(b1, x, 1.0)), 0.0)
        t2 = np.where(b2, np.arctan(np.where(b2, x, 0.0) / np.where(b2, y, 1.0)), 0.0)
    s1 = np.sign(x) * r / _SQRT2
    out[..., 0] = np.where(b1, s1, 0.0)
    out[..., 1] = np.where(b1, s1 * (4.0 / np.pi) * t1, 0.0)
    # |y| >= |x|: sgn(y) r/sqrt2 * ((4/pi) atan(x/y), 1)
    s2 = np.sign(y) * r / _SQRT2
    out[..., 0] = np.where(b2, s2 * (4.0 / np.pi) * t2, out[..., 0])
    out[..., 1] = np.where(b2, s2, out[..., 1])
    return out


def _eta_jac(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = np.hypot(x, y)
    if np.any(r == 0):
        raise OriginEvaluation("no preferred derivative branch at the origin")
    b1 = np.abs(y) < np.abs(x)
    cx, cy = x / r, y / r
    out = np.empty(pts.shape[:-1] + (2, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(b1, np.arctan(np.where(b1, y, 0.0) / np.where(b1, x, 1.0)),
                     np.arctan(np.where(b1, 0.0, x) / np.where(b1, 1.0, y)))
    c = 4.0 / (np.pi * _SQRT2)
    sgn = np.where(b1, np.sign(x), np.sign(y))
    # branch 1 rows: grad eta1 = sgn(x)/sqrt2 (cx, cy)
    #               grad eta2 = sgn(x) c (cx t - cy, cy t + cx)
    # branch 2 swaps the roles of the components (and of x and y)
    out[..., 0, 0] = np.where(b1, sgn * cx / _SQRT2, sgn * c * (cx * t + cy))
    out[..., 0, 1] = np.where(b1, sgn * cy / _SQRT2, sgn * c * (cy * t - cx))
    out[..., 1, 0] = np.where(b1, sgn * c * (cx * t - cy), sgn * cx / _SQRT2)
    out[..., 1, 1] = np.where(b1, sgn * c * (cy * t + cx), sgn * cy / _SQRT2)
    return out


def _eta_inv(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    a, b = pts[..., 0], pts[..., 1]
    out = np.zeros_like(pts)
    b1 = np.abs(b) <= np.abs(a)
    nz = (np.abs(a) > 0) | (np.abs(b) > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        m1 = np.tan(np.pi * np.where(b1 & nz, b, 0.0) / (4.0 * np.where(b1 & nz, a, 1.0)))
        m2 = np.tan(np.pi * np.where(~b1, a, 0.0) / (4.0 * np.where(~b1, b, 1.0)))
    r1 = _SQRT2 * np.abs(a)
    x1 = np.sign(a) * r1 / np.sqrt(1.0 + m1 * m1)
    r2 = _SQRT2 * np.abs(b)
    y2 = np.sign(b) * r2 / np.sqrt(1.0 + m2 * m2)
    out[..., 0] = np.where(b1, x1, m2 * y2)
    out[..., 1] = np.where(b1, m1 * x1, y2)
    return out


def _diag_axis_distance(pts: np.ndarray) -> np.ndarray:
    """Distance to the coordinate axes and the two diagonals."""
    x, y = pts[..., 0], pts[..., 1]
    return np.minimum.reduce(
        [np.abs(x), np.abs(y), np.abs(x - y) / _SQRT2, np.abs(x + y) / _SQRT2]
    )


def ball_to_square() -> tuple[PlanarMap, np.ndarray]:
    """The area-scaling chart of the disc onto an axis-diagonal square.

    Returns (eta, R) with det D eta = 2/pi a.e. and R the rotation by pi/4;
    R(eta(.)) carries the circle |z| = r onto the l1 sphere |w|_1 = r.
    """
    eta = PlanarMap(
        fn=_eta_fn,
        domain=disc(math.inf),
        jac=_eta_jac,
        break_distance=_diag_axis_distance,
        break_angles=tuple(i * np.pi / 4 for i in range(1, 8)),
        name="ball_to_square",
    )
    return eta, _ROT45.copy()


@dataclass(frozen=True)
class DiamondChart:
    """w = R(eta(z)): a bijection of each disc B_r onto the diamond Q_r."""

    det: float = 2.0 / math.pi

    def fwd(self, pts: np.ndarray) -> np.ndarray:
        return _eta_fn(np.asarray(pts, dtype=float)) @ _ROT45.T

    def inv(self, pts: np.ndarray) -> np.ndarray:
        return _eta_inv(np.asarray(pts, dtype=float) @ _ROT45)

    def jac(self, pts: np.ndarray) -> np.ndarray:
        return _ROT45 @ _eta_jac(np.asarray(pts, dtype=float))


# ---------------------------------------------------------------------------
# shear map of the diamond Q_2
# ---------------------------------------------------------------------------


def shear_map(eps: float) -> PlanarMap:
    """The vertical shear of Q_2: compresses Q_1 onto a flat lens.

    Branches: (x, eps y) on Q_1; identity on the ring where |x| > 1;
    (x, y -+ (1 - eps)(1 - |x|)) on the ring where |x| < 1 and +-y > 0.
    The Jacobian is eps on Q_1 and 1 on the ring, and the branches glue
    continuously along |z|_1 = 1 and the chords |x| = 1.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("shear parameter must lie in [0, 1]")

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        n1 = np.abs(x) + np.abs(y)
        out = pts.copy()
        q1 = n1 <= 1.0
        shear = ~q1 & (np.abs(x) < 1.0)
        out[..., 1] = np.where(q1, eps * y, out[..., 1])
        shift = (1.0 - eps) * (1.0 - np.abs(x)) * np.sign(y)
        out[..., 1] = np.where(shear, y - shift, out[..., 1])
        return out

    def jac(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        n1 = np.abs(x) + np.abs(y)
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        q1 = n1 <= 1.0
        shear = ~q1 & (np.abs(x) < 1.0)
        out[..., 1, 1] = np.where(q1, eps, 1.0)
        out[..., 1, 0] = np.where(shear, (1.0 - eps) * np.sign(x) * np.sign(y), 0.0)
        return out

    def break_distance(pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[..., 0]
        n1 = l1_norm(pts)
        in_ring = n1 > 1.0
        return np.minimum.reduce(
            [
                np.abs(n1 - 1.0),
                np.abs(2.0 - n1),
                np.abs(np.abs(x) - 1.0),
                np.where(in_ring, np.abs(x), np.inf),
            ]
        )

    def edge(x0, x1, upper):
        def curve(t):
            x = x0 + (x1 - x0) * np.asarray(t)
            y = (1.0 - np.abs(x)) * (1.0 if upper else -1.0)
            return np.stack([x, y], axis=-1)

        return curve

    def q1_branch(pts):
        pts = np.asarray(pts, dtype=float)
        return np.stack([pts[..., 0], eps * pts[..., 1]], axis=-1)

    def shear_branch(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        shift = (1.0 - eps) * (1.0 - np.abs(x)) * np.sign(y)
        return np.stack([x, y - shift], axis=-1)

    def chord(xc, y0, y1):
        def curve(t):
            y = y0 + (y1 - y0) * np.asarray(t)
            return np.stack([np.full_like(y, xc), y], axis=-1)

        return curve

    ident = lambda pts: np.asarray(pts, dtype=float)  # noqa: E731
    interfaces = (
        Interface(edge(-1, 1, True), q1_branch, shear_branch, "inner-top"),
        Interface(edge(-1, 1, False), q1_branch, shear_branch, "inner-bottom"),
        Interface(chord(1.0, 0.0, 1.0), ident, shear_branch, "chord+x+y"),
        Interface(chord(1.0, -1.0, 0.0), ident, shear_branch, "chord+x-y"),
        Interface(chord(-1.0, 0.0, 1.0), ident, shear_branch, "chord-x+y"),
        Interface(chord(-1.0, -1.0, 0.0), ident, shear_branch, "chord-x-y"),
    )
    return PlanarMap(
        fn=fn,
        domain=l1_ball(2.0),
        jac=jac,
        break_distance=break_distance,
        interfaces=interfaces,
        name=f"shear_eps{eps:g}",
    )


# ---------------------------------------------------------------------------
# wedge map of the quarter ring
# ---------------------------------------------------------------------------

WEDGE_VERTICES = ((2.0, 0.0), (3.0, 0.0), (0.0, 3.0), (0.0, 2.0))


def _wedge_outside(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    s = x + y
    return np.maximum.reduce([2.0 - s, s - 3.0, -x, -y])


def wedge_map(eps: float) -> tuple[PlanarMap, "callable"]:
    """Piecewise-quadratic map of the quarter l1-ring {x,y>0, 2<x+y<3}.

    The first component is x; the second is quadratic in y per vertical
    strip, chosen so the map is the identity on the outer edge, shears the
    inner edge to (x, 1 + eps(y - 1)), and preserves the two straight sides.
    Its Jacobian is piecewise affine, Lipschitz across the strips, and
    bounded below by 1/2:

        x in [0,1]: eps(x-1) + y - 1/2
        x in [1,2]: x + y - 3/2
        x in [2,3]: (x-1)/2 + y

    Returns (map, jdet) with jdet the closed-form Jacobian determinant.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("wedge parameter must lie in [0, 1]")

    def check_inside(pts):
        worst = float(np.max(_wedge_outside(np.asarray(pts, dtype=float))))
        if worst > 1e-2:
            raise OutsideWedge(f"points leave the wedge by {worst:.3e}")

    def second(pts):
        x, y = pts[..., 0], pts[..., 1]
        inner = 0.5 * (2 * eps * (x - 1) * (x + y - 3) - x**2 + 3 * x + y**2 - y)
        middle = 0.5 * (x * (2 * y - 5) + x**2 + y**2 - 3 * y + 6)
        outer = 0.5 * y * (x + y - 1)
        return np.where(x <= 1.0, inner, np.where(x <= 2.0, middle, outer))

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        check_inside(pts)
        return np.stack([pts[..., 0], second(pts)], axis=-1)

    def jdet(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return np.where(
            x <= 1.0,
            eps * (x - 1) + y - 0.5,
            np.where(x <= 2.0, x + y - 1.5, 0.5 * (x - 1) + y),
        )

    def jac(pts):
        pts = np.asarray(pts, dtype=float)
        check_inside(pts)
        x, y = pts[..., 0], pts[..., 1]
        dx = np.where(
            x <= 1.0,
            eps * (2 * x + y - 4) + 0.5 * (3 - 2 * x),
            np.where(x <= 2.0, x + y - 2.5, 0.5 * y),
        )
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 0] = dx
        out[..., 1, 1] = jdet(pts)
        return out

    def break_distance(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        s = x + y
        return np.minimum.reduce(
            [np.abs(x - 1.0), np.abs(x - 2.0), np.abs(s - 2.0), np.abs(s - 3.0),
             np.abs(x), np.abs(y)]
        )

    def strip_branch(lo_mid_hi):
        def branch(pts):
            pts = np.asarray(pts, dtype=float)
            x, y = pts[..., 0], pts[..., 1]
            if lo_mid_hi == "inner":
                val = 0.5 * (2 * eps * (x - 1) * (x + y - 3) - x**2 + 3 * x + y**2 - y)
            elif lo_mid_hi == "middle":
                val = 0.5 * (x * (2 * y - 5) + x**2 + y**2 - 3 * y + 6)
            else:
                val = 0.5 * y * (x + y - 1)
            return np.stack([x, val], axis=-1)

        return branch

    def vertical(xc, y0, y1):
        def curve(t):
            y = y0 + (y1 - y0) * np.asarray(t)
            return np.stack([np.full_like(y, xc), y], axis=-1)

        return curve

    interfaces = (
        Interface(vertical(1.0, 1.0, 2.0), strip_branch("inner"),
                  strip_branch("middle"), "strip x=1"),
        Interface(vertical(2.0, 0.0, 1.0), strip_branch("middle"),
                  strip_branch("outer"), "strip x=2"),
    )

    pmap = PlanarMap(
        fn=fn,
        domain=l1_annulus(2.0, 3.0, constraints=("x>0", "y>0")),
        jac=jac,
        break_distance=break_distance,
        interfaces=interfaces,
        name=f"wedge_eps{eps:g}",
    )

    # construction invariants: jdet >= 1/2 and Lipschitz across the strips
    xs = np.linspace(1e-6, 3 - 1e-6, 301)
    ys = np.linspace(1e-6, 3 - 1e-6, 301)
    X, Y = np.meshgrid(xs, ys)
    inside = pmap.domain.contains(np.stack([X, Y], axis=-1))
    vals = jdet(np.stack([X, Y], axis=-1))
    if inside.any() and float(np.min(vals[inside])) < 0.5 - 1e-9:
        raise ConstraintInfeasible("wedge Jacobian dips below 1/2")
    for xc in (1.0, 2.0):
        y = np.linspace(max(2 - xc, 0) + 1e-9, 3 - xc - 1e-9, 64)
        left = jdet(np.stack([np.full_like(y, xc - 1e-12), y], axis=-1))
        right = jdet(np.stack([np.full_like(y, xc + 1e-12), y], axis=-1))
        if float(np.max(np.abs(left - right))) > 1e-9:
            raise GluingMismatch(f"wedge Jacobian jumps across x = {xc}")

    return pmap, jdet


def corrected_wedge(eps: float, corrector) -> PlanarMap:
    """Post-compose the wedge map with a prescribed-Jacobian corrector.

    ``corrector`` provides sigma (a self-map of the wedge) and its
    finite-difference Jacobian; the composition pushes the wedge Jacobian
    toward the constant (6 - eps)/5 with the corrector's reported residual.
    """
    base, _ = wedge_map(eps)

    def fn(pts):
        return base.fn(corrector.sigma(np.asarray(pts, dtype=float)))

    def jac(pts):
        pts = np.asarray(pts, dtype=float)
        moved = corrector.sigma(pts)
        return base.jac(moved) @ corrector.jacobian(pts)

    return PlanarMap(
        fn=fn,
        domain=base.domain,
        jac=jac,
        break_distance=base.break_distance,
        name=f"wedge_corrected_eps{eps:g}",
    )


# ---------------------------------------------------------------------------
# layered datum and counterexample assembly
# ---------------------------------------------------------------------------


def layered_datum(eps: float, p: float = 1.0) -> RadialDatum:
    """eps on B_1, 1 on the ring A(1,2), (6-eps)/5 on A(2,3); mean 1 on B_3.

    The mean is exact: (eps + 3 + (6 - eps)) / 9 = 1 for every eps.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    return RadialDatum(
        pieces=(
            Piece(0.0, 1.0, ConstExpr(float(eps))),
            Piece(1.0, 2.0, ConstExpr(1.0)),
            Piece(2.0, 3.0, ConstExpr((6.0 - eps) / 5.0)),
        ),
        p=p,
        support_radius=3.0,
    )


def layered_profile(eps: float) -> GeneralisedStretching:
    """Degree-one stretching for the layered datum.

    On the middle ring rho(r) = sqrt(r^2 - 1 + eps), whose derivative energy
    blows up logarithmically as eps -> 0.
    """
    return GeneralisedStretching(profile_from_datum(layered_datum(eps), 1))


def _inv2(mats: np.ndarray) -> np.ndarray:
    det = mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    out = np.empty_like(mats)
    out[..., 0, 0] = mats[..., 1, 1]
    out[..., 0, 1] = -mats[..., 0, 1]
    out[..., 1, 0] = -mats[..., 1, 0]
    out[..., 1, 1] = mats[..., 0, 0]
    return out / det[..., None, None]


def assemble_counterexample(
    eps: float,
    corrector=None,
    interface_tol: float = 1e-8,
    n_interface: int = 512,
) -> PlanarMap:
    """The identity-boundary competitor on B_3 with Jacobian close to the
    layered datum.

    In diamond coordinates w = R(eta(z)) the map applies the shear on Q_2 and
    the (optionally corrected) wedge map, reflected around the ring; the
    chart conjugation cancels its own constant Jacobian, so the competitor's
    Jacobian at z equals the diamond map's Jacobian at w.  Without the
    corrector the outer-ring Jacobian is the wedge's (in [1/2, 2.5]), not the
    constant (6 - eps)/5.
    """
    chart = DiamondChart()
    vmap = shear_map(eps)
    if corrector is not None:
        wedge = corrected_wedge(eps, corrector)
        trace_tol = max(interface_tol, 10.0 * corrector.boundary_displacement)
    else:
        wedge, _ = wedge_map(eps)
        trace_tol = interface_tol
    upper = reflect_extend(wedge, axes=("y",), trace_tol=trace_tol)
    ring = reflect_extend(upper, axes=("x",), trace_tol=trace_tol)

    def diamond_fn(w):
        w = np.asarray(w, dtype=float)
        n1 = l1_norm(w)
        inner = n1 <= 2.0
        out = np.empty_like(w)
        if np.any(inner):
            out[inner] = vmap.fn(w[inner])
        if np.any(~inner):
            out[~inner] = ring.fn(w[~inner])
        return out

    def diamond_jac(w):
        w = np.asarray(w, dtype=float)
        n1 = l1_norm(w)
        inner = n1 <= 2.0
        out = np.empty(w.shape[:-1] + (2, 2))
        if np.any(inner):
            out[inner] = vmap.jac(w[inner])
        if np.any(~inner):
            out[~inner] = ring.jac(w[~inner])
        return out

    # audit the glue along the four edges of the diamond |w|_1 = 2
    t = (np.arange(n_interface) + 0.5) / n_interface
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            x = sx * 2.0 * t
            y = sy * (2.0 - np.abs(x))
            pts = np.stack([x, y], axis=-1)
            gap = vmap.fn(pts) - ring.fn(pts)
            worst = float(np.max(np.hypot(gap[..., 0], gap[..., 1])))
            if worst > trace_tol:
                raise GluingMismatch(
                    f"shear and ring disagree on |w|_1 = 2 by {worst:.3e}"
                )

    def fn(z):
        return chart.inv(diamond_fn(chart.fwd(z)))

    def jac(z):
        z = np.asarray(z, dtype=float)
        w = chart.fwd(z)
        uz = chart.inv(diamond_fn(w))
        return _inv2(chart.jac(uz)) @ diamond_jac(w) @ chart.jac(z)

    def break_distance(z):
        z = np.asarray(z, dtype=float)
        r = np.hypot(z[..., 0], z[..., 1])
        w = chart.fwd(z)
        xw, yw = np.abs(w[..., 0]), np.abs(w[..., 1])
        in_ring = l1_norm(w) > 2.0
        return np.minimum.reduce(
            [
                np.abs(r - 1.0),
                np.abs(r - 2.0),
                np.abs(3.0 - r),
                _diag_axis_distance(z),
                np.abs(xw - 1.0),
                np.abs(xw - 2.0),
                np.where(in_ring, np.minimum(xw, yw), np.inf),
            ]
        )

    return PlanarMap(
        fn=fn,
        domain=disc(3.0),
        jac=jac,
        break_distance=break_distance,
        break_radii=(1.0, 2.0),
        break_angles=tuple(i * np.pi / 4 for i in range(1, 8)),
        name=f"counterexample_eps{eps:g}" + ("_corrected" if corrector else ""),
    )


def boundary_identity_residual(u: PlanarMap, radius: float = 3.0, n: int = 720) -> float:
    """Max |u(z) - z| on the circle |z| = radius."""
    theta = np.arange(n) * (2.0 * np.pi / n)
    pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    gap = u(pts) - pts
    return float(np.max(np.hypot(gap[..., 0], gap[..., 1])))


def map_to_csv(u: PlanarMap, region, n: int = 64) -> str:
    """Sampled grid of the map and its Jacobian as `x,y,ux,uy,J` rows.

    Intended for external plotting; points outside the region are skipped.
    """
    from .geometry import det2

    lo, hi = region.bbox()
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    keep = region.contains(pts)
    pts = pts[keep]
    vals = u(pts)
    jac = det2(u.jacobian(pts))
    lines = ["x,y,ux,uy,J"]
    for (x, y), (ux, uy), j in zip(pts, vals, jac):
        lines.append(f"{x:.17g},{y:.17g},{ux:.17g},{uy:.17g},{j:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# the sign-changing datum with balanced mass
# ---------------------------------------------------------------------------

# coefficients solved from: vanishing mass on B_2, vanishing total mass,
# C^1 matching at r = 1, 2, 3, and the fixed tail (4 - r)+ beyond r = 3
_NU_A = 35.0          # depth of the negative well on (0, 1)
_NU_MU = -287.0 / 5.0  # bump amplitude of the bridge on (2, 3)


@dataclass(frozen=True)
class NonuniquenessReport:
    mass_ball2_residual: float
    mass_total_residual: float
    c1_value_gap: float
    c1_slope_gap: float
    sign_ok: bool
    tail_value: float


def nonuniqueness_datum(p: float = 1.0) -> tuple[RadialDatum, NonuniquenessReport]:
    """A C^1 radial datum: negative well, positive ring, balanced bridge.

    f < 0 on (0, 1), f > 0 on (1, 2), f = (4 - r)+ for r > 3, and both the
    mass over B_2 and the total mass vanish.  The bridge on (2, 3) is the
    quartic determined by C^1 matching plus the total-mass constraint.
    """
    mu = _NU_MU
    datum = RadialDatum(
        pieces=(
            # -A r^2 (1 - r)^2
            Piece(0.0, 1.0, PolyExpr(coeffs=(0.0, 0.0, -_NU_A, 2 * _NU_A, -_NU_A))),
            # (r - 1)^2
            Piece(1.0, 2.0, PolyExpr(coeffs=(1.0, -2.0, 1.0))),
            # quartic bridge in t = r - 2
            Piece(2.0, 3.0, PolyExpr(
                coeffs=(1.0, 2.0, mu - 3.0, 1.0 - 2.0 * mu, mu), center=2.0)),
            Piece(3.0, 4.0, AffineExpr(a=4.0, b=-1.0)),
        ),
        p=p,
        support_radius=4.0,
    )

    def mass_integrand(r):
        return 2.0 * r * float(datum.f(np.array([r]))[0])

    res2 = abs(quad(mass_integrand, 0.0, 2.0, points=[1.0], limit=200)[0])
    res_tot = abs(
        quad(mass_integrand, 0.0, 4.0, points=[1.0, 2.0, 3.0], limit=200)[0]
    )

    # one-sided limits straight from the piece expressions: C^1 matching at
    # the joints is exact, not a finite-difference estimate
    value_gap = 0.0
    slope_gap = abs(float(datum.pieces[0].expr.deriv(np.array([0.0]))[0]))
    for left, right in zip(datum.pieces, datum.pieces[1:]):
        r_j = np.array([left.r_max])
        value_gap = max(value_gap, abs(float(left.expr.value(r_j)[0])
                                       - float(right.expr.value(r_j)[0])))
        slope_gap = max(slope_gap, abs(float(left.expr.deriv(r_j)[0])
                                       - float(right.expr.deriv(r_j)[0])))
    edge = np.array([datum.support_radius])
    value_gap = max(value_gap, abs(float(datum.pieces[-1].expr.value(edge)[0])))

    rs = np.linspace(1e-4, 2.0 - 1e-4, 1024)
    f_in = datum.f(rs[rs < 1.0])
    f_out = datum.f(rs[rs > 1.0])
    sign_ok = bool(np.all(f_in < 0) and np.all(f_out > 0))

    report = NonuniquenessReport(
        mass_ball2_residual=res2,
        mass_total_residual=res_tot,
        c1_value_gap=value_gap,
        c1_slope_gap=slope_gap,
        sign_ok=sign_ok,
        tail_value=float(datum.f(np.array([3.5]))[0]),
    )
    if res2 > 1e-8 or res_tot > 1e-8 or not sign_ok or value_gap > 1e-8:
        raise ConstraintInfeasible(f"shipped datum violates its constraints: {report}")
    return datum, report


def nonuniqueness_inner_profile() -> RadialProfile:
    """Degree -1 profile of the datum restricted to B_2 (where its mass is <= 0).

    rho vanishes at r = 2 while r f does not, so the derivative energy
    diverges logarithmically there.
    """
    datum, _ = nonuniqueness_datum()
    inner = RadialDatum(pieces=datum.pieces[:2], p=datum.p, support_radius=2.0)
    return profile_from_datum(inner, -1)


def phase_twisted_stretching(profile: RadialProfile, beta, beta_dot,
                             radius: float) -> PlanarMap:
    """psi(r) e^{i (k theta + beta(r))}: a stretching with a radial phase.

    The phase drops out of the Jacobian (it only rotates each circle), so the
    map solves the same equation as the plain stretching while carrying extra
    derivative energy psi^2 beta_dot^2.
    """
    k = profile.k
    sq = math.sqrt(abs(k))

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        theta = np.arctan2(pts[..., 1], pts[..., 0])
        psi = profile.rho(r) / sq
        phi = k * theta + np.asarray(beta(r))
        return np.stack([psi * np.cos(phi), psi * np.sin(phi)], axis=-1)

    def jac(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        r = np.hypot(x, y)
        theta = np.arctan2(y, x)
        psi = profile.rho(r) / sq
        psi_r = profile.rho_dot(r) / sq
        bd = np.asarray(beta_dot(r))
        phi = k * theta + np.asarray(beta(r))
        cp, sp = np.cos(phi), np.sin(phi)
        ur = np.stack([psi_r * cp - psi * bd * sp, psi_r * sp + psi * bd * cp], axis=-1)
        ut = np.stack([-k * psi / r * sp, k * psi / r * cp], axis=-1)
        out = np.empty(pts.shape[:-1] + (2, 2))
        out[..., :, 0] = ur * (x / r)[..., None] + ut * (-y / r)[..., None]
        out[..., :, 1] = ur * (y / r)[..., None] + ut * (x / r)[..., None]
        return out

    breaks = tuple(float(b) for b in profile.datum.breakpoints() if 0 < b <= radius)
    return PlanarMap(
        fn=fn,
        domain=disc(float(radius)),
        jac=jac,
        break_radii=breaks,
        name=f"twisted_k{k}",
    )
