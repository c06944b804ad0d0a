"""Particle-based ground-truth simulator.

Emits molecules at the transmitter, steps them with Gaussian Wiener
increments, folds trajectories at reflecting surfaces and removes them on
first contact with an absorbing sphere.  Histograms first-hit times per
receiver.  Fully deterministic for a given seed, independent of thread
count (see kernels module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigInvalid, ReceiverUnknown
from .geometry import AbsorbingSphere, Plane, Rect, Vec3, as_vec3


@dataclass(frozen=True)
class SimConfig:
    D: float  # um^2/s
    dt: float  # s
    T_total: float  # s
    n_molecules: int
    n_reps: int
    seed: int
    bin_width: float  # s

    def __post_init__(self):
        if not (self.D > 0):
            raise ConfigInvalid(f"D must be positive, got {self.D}")
        if not (self.dt > 0):
            raise ConfigInvalid(f"dt must be positive, got {self.dt}")
        if not (self.T_total >= self.dt):
            raise ConfigInvalid("T_total must be at least one time step")
        if self.n_molecules < 0:
            raise ConfigInvalid("n_molecules must be >= 0")
        if self.n_reps < 1:
            raise ConfigInvalid("n_reps must be >= 1")
        if self.bin_width < self.dt:
            raise ConfigInvalid("bin_width must be >= dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.T_total / self.dt))

    @property
    def n_bins(self) -> int:
        return int(math.ceil(self.n_steps * self.dt / self.bin_width - 1e-9))

    @property
    def sigma(self) -> float:
        """Per-axis standard deviation of one Wiener increment."""
        return math.sqrt(2.0 * self.D * self.dt)


@dataclass(frozen=True)
class Environment:
    tx: Vec3
    reflectors: tuple
    receivers: tuple

    def __post_init__(self):
        object.__setattr__(self, "tx", as_vec3(self.tx))
        object.__setattr__(self, "reflectors", tuple(self.reflectors))
        object.__setattr__(self, "receivers", tuple(self.receivers))
        for rx in self.receivers:
            if rx.contains(self.tx):
                raise ConfigInvalid("transmitter is inside a receiver")
        for ref in self.reflectors:
            if isinstance(ref, Plane) and ref.signed_distance(self.tx) < 0:
                raise ConfigInvalid("transmitter is behind a reflecting plane")


@dataclass
class HitHistogram:
    """Binned first-hit counts, aggregated and per replication."""

    bin_width: float
    counts: np.ndarray  # (n_receivers, n_bins), summed over reps
    rep_counts: np.ndarray  # (n_reps, n_receivers, n_bins)
    n_emitted: int
    n_survived: int
    fold_limit_hits: int = 0

    @property
    def n_receivers(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    @property
    def n_absorbed(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def brownian_step(pos, rng: np.random.Generator, D: float, dt: float) -> Vec3:
    """Candidate position after one Wiener increment (no boundary handling)."""
    pos = as_vec3(pos)
    sigma = math.sqrt(2.0 * D * dt)
    return pos + rng.normal(0.0, sigma, size=3) if sigma > 0 else pos.copy()


def _pack_environment(env: Environment):
    planes = [r for r in env.reflectors if isinstance(r, Plane)]
    rects = [r for r in env.reflectors if isinstance(r, Rect)]
    planes_arr = np.zeros((len(planes), 6))
    for i, p in enumerate(planes):
        planes_arr[i, 0:3] = p.point
        planes_arr[i, 3:6] = p.normal
    rects_arr = np.zeros((len(rects), 14))
    for i, r in enumerate(rects):
        rects_arr[i, 0:3] = r.center
        rects_arr[i, 3:6] = r.normal
        rects_arr[i, 6:9] = r.u_axis
        rects_arr[i, 9:12] = r.v_axis
        rects_arr[i, 12] = r.half_u
        rects_arr[i, 13] = r.half_v
    spheres_arr = np.zeros((len(env.receivers), 4))
    for i, s in enumerate(env.receivers):
        spheres_arr[i, 0:3] = s.center
        spheres_arr[i, 3] = s.radius
    return planes_arr, rects_arr, spheres_arr


def _guard_spheres(env: Environment) -> np.ndarray:
    """Receivers plus mirror images: proximity set for jump sizing.

    Two rounds of mirroring across every reflector plane cover the nearest
    lattice image in any parallel-plane configuration; farther images are
    never the closest one inside the slab.
    """
    mirrors = []
    for ref in env.reflectors:
        plane = ref if isinstance(ref, Plane) else ref.plane()
        mirrors.append((plane.point, plane.normal))
    centers = [(s.center, s.radius) for s in env.receivers]
    for _ in range(2):
        new = []
        for point, normal in mirrors:
            for c, r in centers:
                d = float(np.dot(c - point, normal))
                new.append((c - 2.0 * d * normal, r))
        for cand, r in new:
            if not any(np.linalg.norm(cand - c) < 1e-9 for c, _ in centers):
                centers.append((cand, r))
    out = np.zeros((len(centers), 4))
    for i, (c, r) in enumerate(centers):
        out[i, 0:3] = c
        out[i, 3] = r
    return out


def resolve_step(prev, candidate, env: Environment):
    """Resolve one displacement against the environment.

    Returns ``("absorbed", receiver_index)`` or ``("moved", new_position)``.
    """
    planes_arr, rects_arr, spheres_arr = _pack_environment(env)
    prev = as_vec3(prev)
    candidate = as_vec3(candidate)
    out = np.empty(4)
    res = kernels._resolve_segment(
        prev[0], prev[1], prev[2],
        candidate[0], candidate[1], candidate[2],
        planes_arr, rects_arr, spheres_arr, out,
    )
    if res >= 0:
        return "absorbed", int(res)
    return "moved", out[:3].copy()


def simulate(env: Environment, cfg: SimConfig, jump_cap: int | None = None) -> HitHistogram:
    """Run all replications and histogram first-hit times per receiver.

    ``jump_cap`` bounds the far-field multi-step jump (in base steps); the
    default allows up to 10 ms per jump.  Set to 1 to force plain stepping.
    Jumps only engage when every boundary is beyond seven standard
    deviations of the combined increment, and absorption times within a
    jump are attributed to the sub-step where the segment enters the
    receiver, so histogram resolution is preserved.
    """
    planes_arr, rects_arr, spheres_arr = _pack_environment(env)
    guards_arr = _guard_spheres(env)
    n_steps = cfg.n_steps
    n_bins = cfg.n_bins
    if jump_cap is None:
        jump_cap = max(1, int(round(0.01 / cfg.dt)))
    n_rx = len(env.receivers)
    rep_counts = np.zeros((cfg.n_reps, n_rx, n_bins), dtype=np.int64)
    absorb_receiver = np.empty(cfg.n_molecules, dtype=np.int64)
    absorb_step = np.empty(cfg.n_molecules, dtype=np.int64)
    fold_exhausted = np.empty(cfg.n_molecules, dtype=np.int64)
    survived = 0
    fold_hits = 0
    steps_per_bin = cfg.bin_width / cfg.dt
    for rep in range(cfg.n_reps):
        kernels.simulate_replication(
            env.tx,
            planes_arr,
            rects_arr,
            spheres_arr,
            guards_arr,
            cfg.n_molecules,
            n_steps,
            cfg.sigma,
            jump_cap,
            cfg.seed,
            rep,
            absorb_receiver,
            absorb_step,
            fold_exhausted,
        )
        fold_hits += int(fold_exhausted.sum())
        hit = absorb_receiver >= 0
        survived += int(cfg.n_molecules - hit.sum())
        if hit.any():
            bins = np.ceil(absorb_step[hit] / steps_per_bin - 1e-9).astype(np.int64) - 1
            np.clip(bins, 0, n_bins - 1, out=bins)
            np.add.at(rep_counts[rep], (absorb_receiver[hit], bins), 1)
    counts = rep_counts.sum(axis=0)
    return HitHistogram(
        bin_width=cfg.bin_width,
        counts=counts,
        rep_counts=rep_counts,
        n_emitted=cfg.n_molecules * cfg.n_reps,
        n_survived=survived,
        fold_limit_hits=fold_hits,
    )


def cumulative_fraction(h: HitHistogram, receiver_id: int, t: float) -> float:
    """Fraction of emitted molecules absorbed by ``receiver_id`` by time t."""
    if not (0 <= receiver_id < h.n_receivers):
        raise ReceiverUnknown(f"receiver {receiver_id} of {h.n_receivers}")
    n = min(h.n_bins, int(math.floor(t / h.bin_width + 1e-9)))
    if n <= 0 or h.n_emitted == 0:
        return 0.0
    return float(h.counts[receiver_id, :n].sum()) / h.n_emitted


def cumulative_curves(h: HitHistogram, receiver_id: int):
    """Grid (bin right edges), mean cumulative fraction and its stderr."""
    if not (0 <= receiver_id < h.n_receivers):
        raise ReceiverUnknown(f"receiver {receiver_id} of {h.n_receivers}")
    grid = h.bin_width * np.arange(1, h.n_bins + 1)
    n_reps = h.rep_counts.shape[0]
    per_mol = h.n_emitted / n_reps
    rep_cum = h.rep_counts[:, receiver_id, :].cumsum(axis=1) / per_mol
    mean = rep_cum.mean(axis=0)
    if n_reps > 1:
        stderr = rep_cum.std(axis=0, ddof=1) / math.sqrt(n_reps)
    else:
        stderr = np.zeros_like(mean)
    return grid, mean, stderr
