"""Planar domain descriptors: Euclidean and l1 balls/annuli, polygons.

The l1 ball Q_r = {|x| + |y| < r} and annulus A1(r, R) carry the diamond
geometry used by the explicit counterexample maps.  Regions support exact
membership tests, areas, bounding boxes and quasi-random sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

_HALF_PLANES = {
    "x>0": lambda p: p[..., 0] > 0,
    "x<0": lambda p: p[..., 0] < 0,
    "y>0": lambda p: p[..., 1] > 0,
    "y<0": lambda p: p[..., 1] < 0,
}


def l1_norm(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return np.abs(pts[..., 0]) + np.abs(pts[..., 1])


@dataclass(frozen=True)
class Region:
    """A planar domain: disc/annulus in either norm, or a convex polygon.

    ``constraints`` intersects the base region with open half planes, which
    covers the half and quadrant restrictions used by the reflections.
    """

    kind: str  # "disc" | "annulus" | "l1_ball" | "l1_annulus" | "polygon"
    r_in: float = 0.0
    r_out: float = 0.0
    vertices: tuple = ()
    constraints: tuple = ()

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.kind in ("disc", "annulus"):
            rho = np.hypot(pts[..., 0], pts[..., 1])
            mask = (rho < self.r_out) & (rho > self.r_in)
        elif self.kind in ("l1_ball", "l1_annulus"):
            rho = l1_norm(pts)
            mask = (rho < self.r_out) & (rho > self.r_in)
        elif self.kind == "polygon":
            mask = self._polygon_contains(pts)
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")
        for c in self.constraints:
            mask &= _HALF_PLANES[c](pts)
        return mask

    def _polygon_contains(self, pts: np.ndarray) -> np.ndarray:
        # convex, counterclockwise vertices: inside iff left of every edge
        verts = np.asarray(self.vertices, dtype=float)
        mask = np.ones(pts.shape[:-1], dtype=bool)
        for i in range(len(verts)):
            a, b = verts[i], verts[(i + 1) % len(verts)]
            cross = (b[0] - a[0]) * (pts[..., 1] - a[1]) - (b[1] - a[1]) * (
                pts[..., 0] - a[0]
            )
            mask &= cross > 0
        return mask

    def area(self) -> float:
        if self.kind == "disc":
            base = math.pi * self.r_out**2
        elif self.kind == "annulus":
            base = math.pi * (self.r_out**2 - self.r_in**2)
        elif self.kind == "l1_ball":
            base = 2.0 * self.r_out**2
        elif self.kind == "l1_annulus":
            base = 2.0 * (self.r_out**2 - self.r_in**2)
        elif self.kind == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            x, y = v[:, 0], v[:, 1]
            base = 0.5 * abs(
                np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
            )
        else:
            raise ValueError(self.kind)
        # base regions are symmetric about both axes, so each half-plane
        # constraint halves the area exactly
        if self.kind == "polygon" and self.constraints:
            raise ValueError("constrained polygons are not supported")
        return base * 0.5 ** len(self.constraints)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            lo, hi = v.min(axis=0).copy(), v.max(axis=0).copy()
        else:
            R = self.r_out
            lo, hi = np.array([-R, -R]), np.array([R, R])
            for c in self.constraints:
                axis = 0 if c[0] == "x" else 1
                if c[1] == ">":
                    lo[axis] = 0.0
                else:
                    hi[axis] = 0.0
        return lo, hi


def disc(radius: float, constraints: tuple = ()) -> Region:
    return Region(kind="disc", r_out=float(radius), constraints=constraints)


def annulus(r_in: float, r_out: float, constraints: tuple = ()) -> Region:
    return Region(
        kind="annulus", r_in=float(r_in), r_out=float(r_out), constraints=constraints
    )


def l1_ball(radius: float, constraints: tuple = ()) -> Region:
    return Region(kind="l1_ball", r_out=float(radius), constraints=constraints)


def l1_annulus(r_in: float, r_out: float, constraints: tuple = ()) -> Region:
    return Region(
        kind="l1_annulus",
        r_in=float(r_in),
        r_out=float(r_out),
        constraints=constraints,
    )


def convex_polygon(vertices) -> Region:
    """Convex polygon from counterclockwise vertices."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) <= 0:
        raise ValueError("vertices must be counterclockwise")
    return Region(kind="polygon", vertices=tuple(map(tuple, v)))


def quasi_random_points(
    region: Region,
    n: int,
    seed: int | None = None,
    min_break_distance: float = 0.0,
    break_distance=None,
) -> np.ndarray:
    """n Halton points inside the region, optionally clear of break curves.

    With a seed the Halton sequence is scrambled (still deterministic for a
    fixed seed); without one it is the plain sequence.
    """
    lo, hi = region.bbox()
    sampler = qmc.Halton(d=2, scramble=seed is not None, seed=seed)
    out = []
    have = 0
    while have < n:
        raw = sampler.random(max(2 * (n - have), 256))
        pts = lo + raw * (hi - lo)
        mask = region.contains(pts)
        if break_distance is not None and min_break_distance > 0:
            mask &= np.asarray(break_distance(pts)) > min_break_distance
        pts = pts[mask]
        out.append(pts)
        have += len(pts)
    return np.concatenate(out, axis=0)[:n]
