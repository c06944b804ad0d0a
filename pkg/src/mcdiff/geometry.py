"""Vector algebra, reflectors, spheres and mirror-image construction.

All lengths are in micrometers.  Positions are plain float64 numpy arrays
of shape (3,); the constructors below validate finiteness.  Plane normals
are oriented into the valid domain, so "point is inside the domain" is a
single signed-distance sign test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometry,
    PlanesNotParallel,
    SphereIntersectsPlane,
    SphereOutsideSlab,
)

Vec3 = np.ndarray  # shape (3,), float64

_UNIT_TOL = 1e-12


def vec3(x: float, y: float, z: float) -> Vec3:
    """Build a finite 3-vector (micrometers)."""
    v = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def as_vec3(v) -> Vec3:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def _check_unit(v: Vec3, name: str) -> None:
    if abs(np.dot(v, v) - 1.0) > 2 * _UNIT_TOL:
        raise ValueError(f"{name} must be unit length, |v| = {np.linalg.norm(v)!r}")


@dataclass(frozen=True)
class Plane:
    """Infinite reflecting plane; normal points into the valid domain."""

    point: Vec3
    normal: Vec3

    def __post_init__(self):
        object.__setattr__(self, "point", as_vec3(self.point))
        object.__setattr__(self, "normal", as_vec3(self.normal))
        _check_unit(self.normal, "Plane.normal")

    def signed_distance(self, p) -> float:
        """Positive on the valid side of the plane."""
        return float(np.dot(as_vec3(p) - self.point, self.normal))


@dataclass(frozen=True)
class Rect:
    """Finite rectangular reflecting layer (thin, two-sided in simulation)."""

    center: Vec3
    normal: Vec3
    u_axis: Vec3
    v_axis: Vec3
    half_u: float
    half_v: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "normal", as_vec3(self.normal))
        object.__setattr__(self, "u_axis", as_vec3(self.u_axis))
        object.__setattr__(self, "v_axis", as_vec3(self.v_axis))
        for name in ("normal", "u_axis", "v_axis"):
            _check_unit(getattr(self, name), f"Rect.{name}")
        for a, b in (("normal", "u_axis"), ("normal", "v_axis"), ("u_axis", "v_axis")):
            if abs(np.dot(getattr(self, a), getattr(self, b))) > 10 * _UNIT_TOL:
                raise ValueError(f"Rect axes not orthogonal: {a} . {b}")
        if not (self.half_u > 0 and self.half_v > 0):
            raise ValueError("Rect half-extents must be positive")

    def plane(self) -> Plane:
        """The infinite plane containing this rectangle."""
        return Plane(self.center, self.normal)


@dataclass(frozen=True)
class AbsorbingSphere:
    """Fully absorbing spherical receiver."""

    center: Vec3
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"sphere radius must be positive, got {self.radius}")

    def contains(self, p) -> bool:
        return float(np.linalg.norm(as_vec3(p) - self.center)) < self.radius


@dataclass(frozen=True)
class ImageSet:
    """A real receiver (index 0) plus its mirror images, nearest first."""

    spheres: tuple
    distances_from_tx: tuple

    def __post_init__(self):
        radii = {s.radius for s in self.spheres}
        if len(radii) > 1:
            raise ValueError("image spheres must all share the real receiver's radius")


def mirror_point(p, plane: Plane) -> Vec3:
    """Reflect a point across a plane (tangential components unchanged)."""
    p = as_vec3(p)
    d = np.dot(p - plane.point, plane.normal)
    return p - 2.0 * d * plane.normal


def mirror_sphere(s: AbsorbingSphere, plane: Plane) -> AbsorbingSphere:
    """Mirror image of a receiver across a reflecting plane."""
    dist = abs(plane.signed_distance(s.center))
    if dist < s.radius:
        raise SphereIntersectsPlane(
            f"sphere at distance {dist} from plane intersects it (radius {s.radius})"
        )
    return AbsorbingSphere(mirror_point(s.center, plane), s.radius)


def angular_separation(tx, c_i, c_j) -> float:
    """Angle (radians, in [0, pi]) between the directions tx->c_i and tx->c_j."""
    tx = as_vec3(tx)
    a = as_vec3(c_i) - tx
    b = as_vec3(c_j) - tx
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateGeometry("transmitter coincides with a receiver center")
    cosang = np.dot(a, b) / (na * nb)
    return float(math.acos(min(1.0, max(-1.0, cosang))))


def generate_images_two_planes(
    rx: AbsorbingSphere, p1: Plane, p2: Plane, n_images: int, tx=None
) -> ImageSet:
    """Real receiver plus the nearest mirror images of the parallel-mirror lattice.

    Images are ordered by increasing distance from the real receiver center;
    equidistant pairs list the positive-normal side (along p1.normal) first.
    ``tx`` fills ``distances_from_tx``; when omitted the tuple is empty.
    """
    if n_images < 0:
        raise ValueError("image count must be >= 0")
    cross = np.linalg.norm(np.cross(p1.normal, p2.normal))
    if cross > 1e-9:
        raise PlanesNotParallel(f"plane normals differ (|n1 x n2| = {cross})")
    axis = p1.normal
    a = float(np.dot(p1.point, axis))
    b = float(np.dot(p2.point, axis))
    c = float(np.dot(rx.center, axis))
    lo, hi = min(a, b), max(a, b)
    if not (lo + rx.radius <= c <= hi - rx.radius) or lo == hi:
        raise SphereOutsideSlab(
            f"receiver at {c} (radius {rx.radius}) not between planes at {lo}, {hi}"
        )
    span = b - a
    # Lattice {2k*span + c} U {2k*span + 2a - c}, k in Z; k=0 of the first
    # family is the real receiver.
    coords = []
    for k in range(-(n_images + 2), n_images + 3):
        coords.append(2 * k * span + c)
        coords.append(2 * k * span + 2 * a - c)
    coords = [x for x in coords if abs(x - c) > 1e-12]
    coords.sort(key=lambda x: (abs(x - c), 0 if x > c else 1))
    centers = [rx.center] + [rx.center + (x - c) * axis for x in coords[:n_images]]
    spheres = tuple(AbsorbingSphere(ctr, rx.radius) for ctr in centers)
    if tx is None:
        dists = ()
    else:
        tx = as_vec3(tx)
        dists = tuple(float(np.linalg.norm(s.center - tx)) for s in spheres)
    return ImageSet(spheres, dists)


def segment_boundary_hit(a, b, reflector):
    """Earliest crossing of segment a->b through a reflector, or None.

    Planes are one-sided (a starts on the valid side); rectangles are
    two-sided and only intercept if the crossing point lies within bounds.
    """
    a = as_vec3(a)
    b = as_vec3(b)
    if isinstance(reflector, Plane):
        da = float(np.dot(a - reflector.point, reflector.normal))
        db = float(np.dot(b - reflector.point, reflector.normal))
        if db >= 0.0 or da < db:
            return None
        s = da / (da - db)
        return s, a + s * (b - a)
    if isinstance(reflector, Rect):
        da = float(np.dot(a - reflector.center, reflector.normal))
        db = float(np.dot(b - reflector.center, reflector.normal))
        if da == db or (da > 0.0) == (db > 0.0):
            if not (da != 0.0 and db == 0.0):
                return None
        s = da / (da - db)
        if not (0.0 <= s <= 1.0):
            return None
        point = a + s * (b - a)
        rel = point - reflector.center
        if abs(np.dot(rel, reflector.u_axis)) > reflector.half_u:
            return None
        if abs(np.dot(rel, reflector.v_axis)) > reflector.half_v:
            return None
        return s, point
    raise TypeError(f"unsupported reflector type {type(reflector)!r}")


def segment_sphere_entry(a, b, sphere: AbsorbingSphere):
    """Earliest parameter where segment a->b enters the ball, or None.

    A start point already inside the ball yields parameter 0.
    """
    a = as_vec3(a)
    b = as_vec3(b)
    f = a - sphere.center
    if float(np.dot(f, f)) <= sphere.radius * sphere.radius:
        return 0.0, a
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return None
    bcoef = float(np.dot(f, d))
    ccoef = float(np.dot(f, f)) - sphere.radius * sphere.radius
    disc = bcoef * bcoef - dd * ccoef
    if disc < 0.0:
        return None
    s = (-bcoef - math.sqrt(disc)) / dd
    if 0.0 <= s <= 1.0:
        return s, a + s * d
    return None
