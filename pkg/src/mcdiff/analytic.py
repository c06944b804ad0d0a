"""Closed-form diffusion channel responses.

Hitting-rate densities and cumulative absorption probabilities for a point
transmitter and fully absorbing spherical receivers: unbounded SISO, the
two-receiver SIMO pair with the stealing correction, a half-space bounded
by one reflecting plane (via the mirror-image receiver), and a slab
bounded by two parallel reflecting planes (truncated image series).

Every rate integrates to its CDF; the rate/CDF consistency is enforced by
the test suite via adaptive quadrature.  Rates may dip below zero at very
small t because of the stealing subtraction; ``clamp`` controls whether
that is reported raw (for quadrature checks) or clamped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from . import geometry
from .errors import NonPositiveTime
from .geometry import AbsorbingSphere, Plane, Vec3

_SQRT4PI = math.sqrt(4.0 * math.pi)


@dataclass(frozen=True)
class DiffusionParams:
    """Diffusion coefficient, micrometers^2 per second."""

    D: float

    def __post_init__(self):
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"diffusion coefficient must be positive, got {self.D}")


@dataclass(frozen=True)
class SisoParams:
    """One receiver in unbounded space: center distance r0 > radius r_r."""

    r0: float
    r_r: float
    D: DiffusionParams

    def __post_init__(self):
        if not (self.r0 > self.r_r > 0):
            raise ValueError(f"need r0 > r_r > 0, got r0={self.r0}, r_r={self.r_r}")


@dataclass(frozen=True)
class SimoPairParams:
    """Receiver pair geometry as seen from the transmitter.

    ``phi`` is the angular separation of the two receiver centers viewed
    from the transmitter.
    """

    r_i: float
    r_j: float
    r0_i: float
    r0_j: float
    phi: float

    def __post_init__(self):
        if not (self.r0_i > self.r_i > 0):
            raise ValueError(f"need r0_i > r_i > 0, got {self.r0_i}, {self.r_i}")
        if not (self.r0_j > self.r_j > 0):
            raise ValueError(f"need r0_j > r_j > 0, got {self.r0_j}, {self.r_j}")
        if not (0.0 <= self.phi <= math.pi + 1e-12):
            raise ValueError(f"phi must be in [0, pi], got {self.phi}")


@dataclass(frozen=True)
class HalfSpaceParams:
    """Transmitter and receiver on the valid side of one reflecting plane.

    The transmitter may sit exactly on the plane (distance 0), which is the
    edge case of a source flush against the wall.
    """

    tx: Vec3
    rx: AbsorbingSphere
    plane: Plane
    D: DiffusionParams

    def __post_init__(self):
        object.__setattr__(self, "tx", geometry.as_vec3(self.tx))
        d_tx = self.plane.signed_distance(self.tx)
        d_rx = self.plane.signed_distance(self.rx.center)
        if d_tx < 0:
            raise ValueError("transmitter is behind the reflecting plane")
        if d_rx < self.rx.radius:
            raise ValueError("receiver crosses the reflecting plane")
        if float(np.linalg.norm(self.tx - self.rx.center)) <= self.rx.radius:
            raise ValueError("transmitter is inside the receiver")


@dataclass(frozen=True)
class TwoPlaneParams:
    """Receiver between two parallel reflecting planes; K retained images."""

    tx: Vec3
    rx: AbsorbingSphere
    p1: Plane
    p2: Plane
    K: int
    D: DiffusionParams

    def __post_init__(self):
        object.__setattr__(self, "tx", geometry.as_vec3(self.tx))
        if self.K < 0:
            raise ValueError(f"image count must be >= 0, got {self.K}")
        # Raises PlanesNotParallel / SphereOutsideSlab on bad geometry.
        geometry.generate_images_two_planes(self.rx, self.p1, self.p2, 0)
        if float(np.linalg.norm(self.tx - self.rx.center)) <= self.rx.radius:
            raise ValueError("transmitter is inside the receiver")


def _time_array(t, allow_zero: bool):
    t = np.asarray(t, dtype=np.float64)
    if allow_zero:
        if np.any(t < 0):
            raise NonPositiveTime(f"time must be >= 0, got {t}")
    else:
        if np.any(t <= 0):
            raise NonPositiveTime(f"time must be > 0, got {t}")
    return t


def _first_passage_rate(t, prefactor, path, D):
    """prefactor * (4 pi D t)^-1/2 * path/t * exp(-path^2 / (4 D t))."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = prefactor / (_SQRT4PI * np.sqrt(D * t)) * (path / t) * np.exp(
            -(path * path) / (4.0 * D * t)
        )
    return np.where(t > 0, out, 0.0)


def _erfc_term(t, prefactor, path, D):
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(t > 0, path / np.sqrt(4.0 * D * t), np.inf)
    return prefactor * erfc(arg)


def siso_hit_rate(t, p: SisoParams):
    """First-hit rate (1/s) at a single absorbing sphere in free space."""
    t = _time_array(t, allow_zero=False)
    return _first_passage_rate(t, p.r_r / p.r0, p.r0 - p.r_r, p.D.D)


def siso_hit_cdf(t, p: SisoParams):
    """Probability of absorption by time t; limit r_r/r0 as t -> inf."""
    t = _time_array(t, allow_zero=True)
    return _erfc_term(t, p.r_r / p.r0, p.r0 - p.r_r, p.D.D)


def effective_distance(r0_source, r_source, r0_target, phi) -> float:
    """Effective source-to-target distance for the stealing correction.

    The stealing receiver ("source") is shrunk toward the transmitter by
    r_source^2 / r0_source before the law of cosines is applied.
    """
    if not (r0_source > r_source):
        raise ValueError("need r0_source > r_source")
    shrunk = r0_source - r_source * r_source / r0_source
    return math.sqrt(
        shrunk * shrunk
        + r0_target * r0_target
        - 2.0 * shrunk * r0_target * math.cos(phi)
    )


def _steal_path(r_i, r_j, r0_j, r0_ij):
    # Total detour path through the stealing receiver, minus both radii.
    return (r0_j + r0_ij) - (r_j + r_i)


def simo_hit_rate(t, p: SimoPairParams, D: DiffusionParams, clamp: bool = False):
    """Hit rate at receiver i in the presence of the stealing receiver j."""
    t = _time_array(t, allow_zero=False)
    r0_ij = effective_distance(p.r0_j, p.r_j, p.r0_i, p.phi)
    first = _first_passage_rate(t, p.r_i / p.r0_i, p.r0_i - p.r_i, D.D)
    steal = _first_passage_rate(
        t,
        (p.r_j * p.r_i) / (p.r0_j * r0_ij),
        _steal_path(p.r_i, p.r_j, p.r0_j, r0_ij),
        D.D,
    )
    out = first - steal
    if clamp:
        out = np.maximum(out, 0.0)
    return out


def simo_hit_cdf(t, p: SimoPairParams, D: DiffusionParams, clamp: bool = True):
    """Absorption probability at receiver i by time t (stealing-corrected)."""
    t = _time_array(t, allow_zero=True)
    r0_ij = effective_distance(p.r0_j, p.r_j, p.r0_i, p.phi)
    out = _erfc_term(t, p.r_i / p.r0_i, p.r0_i - p.r_i, D.D) - _erfc_term(
        t,
        (p.r_j * p.r_i) / (p.r0_j * r0_ij),
        _steal_path(p.r_i, p.r_j, p.r0_j, r0_ij),
        D.D,
    )
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def halfspace_pair(p: HalfSpaceParams):
    """The SIMO pair (toward Rx, toward its mirror image) for a half-space."""
    rx_im = geometry.mirror_sphere(p.rx, p.plane)
    r0 = float(np.linalg.norm(p.tx - p.rx.center))
    r_im = float(np.linalg.norm(p.tx - rx_im.center))
    if np.allclose(p.rx.center, rx_im.center):
        phi = 0.0
    else:
        phi = geometry.angular_separation(p.tx, p.rx.center, rx_im.center)
    toward_rx = SimoPairParams(
        r_i=p.rx.radius, r_j=p.rx.radius, r0_i=r0, r0_j=r_im, phi=phi
    )
    toward_im = SimoPairParams(
        r_i=p.rx.radius, r_j=p.rx.radius, r0_i=r_im, r0_j=r0, phi=phi
    )
    return toward_rx, toward_im


def halfspace_hit_rate(t, p: HalfSpaceParams, clamp: bool = False):
    """Hit rate at the real receiver in the half-space (image decomposition)."""
    toward_rx, toward_im = halfspace_pair(p)
    out = simo_hit_rate(t, toward_rx, p.D, clamp=False) + simo_hit_rate(
        t, toward_im, p.D, clamp=False
    )
    if clamp:
        out = np.maximum(out, 0.0)
    return out


def halfspace_hit_cdf(t, p: HalfSpaceParams, clamp: bool = True):
    """Absorption probability at the real receiver in the half-space."""
    toward_rx, toward_im = halfspace_pair(p)
    out = simo_hit_cdf(t, toward_rx, p.D, clamp=False) + simo_hit_cdf(
        t, toward_im, p.D, clamp=False
    )
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def _two_plane_lattice(p: TwoPlaneParams):
    """Tx distances and pairwise effective distances for the image lattice."""
    images = geometry.generate_images_two_planes(p.rx, p.p1, p.p2, p.K, tx=p.tx)
    centers = [s.center for s in images.spheres]
    r_im = np.asarray(images.distances_from_tx)
    n = len(centers)
    r_r = p.rx.radius
    eff = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            phi = geometry.angular_separation(p.tx, centers[i], centers[j])
            eff[i, j] = effective_distance(r_im[j], r_r, r_im[i], phi)
    return r_im, eff


def two_plane_hit_rate(t, p: TwoPlaneParams, clamp: bool = False):
    """Truncated image-series hit rate between two reflecting planes."""
    t = _time_array(t, allow_zero=False)
    r_im, eff = _two_plane_lattice(p)
    r_r = p.rx.radius
    out = np.zeros_like(t, dtype=np.float64)
    for i in range(len(r_im)):
        out = out + _first_passage_rate(t, r_r / r_im[i], r_im[i] - r_r, p.D.D)
        for j in range(len(r_im)):
            if j == i:
                continue
            out = out - _first_passage_rate(
                t,
                (r_r * r_r) / (r_im[j] * eff[i, j]),
                (r_im[j] + eff[i, j]) - 2.0 * r_r,
                p.D.D,
            )
    if clamp:
        out = np.maximum(out, 0.0)
    return out


def two_plane_hit_cdf_approx(t, p: TwoPlaneParams, clamp: bool = True):
    """Truncated erfc series for absorption probability between two planes."""
    t = _time_array(t, allow_zero=True)
    r_im, eff = _two_plane_lattice(p)
    r_r = p.rx.radius
    out = np.zeros_like(t, dtype=np.float64)
    for i in range(len(r_im)):
        out = out + _erfc_term(t, r_r / r_im[i], r_im[i] - r_r, p.D.D)
        for j in range(len(r_im)):
            if j == i:
                continue
            out = out - _erfc_term(
                t,
                (r_r * r_r) / (r_im[j] * eff[i, j]),
                (r_im[j] + eff[i, j]) - 2.0 * r_r,
                p.D.D,
            )
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out
