"""Topology registry and analytic-vs-simulation comparison harness.

Ships the benchmark topologies (edge transmitter, side mirror, total and
half eclipse, finite square layer, two parallel planes) and produces RMSE
reports between the closed-form responses and the particle simulator.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import analytic, montecarlo
from .analytic import DiffusionParams, HalfSpaceParams, SisoParams, TwoPlaneParams
from .errors import LengthMismatch, SpecInvalid
from .geometry import AbsorbingSphere, Plane, Rect, vec3
from .montecarlo import Environment, SimConfig

PAPER_D = 79.4  # um^2/s
PAPER_T_TOTAL = 2.0  # s
GRID_STEP = 1e-3  # s, comparison grid spacing

TOPOLOGY_IDS = ("t0", "t1", "t2", "t3", "t4", "t2finite", "twoplane")


@dataclass(frozen=True)
class TopologySpec:
    """One benchmark scenario: geometry plus the matching analytic model."""

    name: str
    tx_um: tuple
    rx_center_um: tuple
    r_r_um: float
    reflectors: tuple  # of dicts, the JSON schema form
    model: str  # "siso" | "halfspace" | "twoplane"
    kprime: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reflectors"] = [dict(r) for r in self.reflectors]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TopologySpec":
        try:
            return cls(
                name=str(d["name"]),
                tx_um=tuple(float(x) for x in d["tx_um"]),
                rx_center_um=tuple(float(x) for x in d["rx_center_um"]),
                r_r_um=float(d["r_r_um"]),
                reflectors=tuple(dict(r) for r in d.get("reflectors", [])),
                model=str(d.get("model", "halfspace")),
                kprime=None if d.get("kprime") is None else int(d["kprime"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecInvalid(f"bad topology spec: {exc}") from exc


def _plane_ref(x: float) -> dict:
    return {"type": "plane", "point_um": [x, 0.0, 0.0], "normal": [1.0, 0.0, 0.0]}


def paper_topology(
    name: str,
    r_r: float | None = None,
    d: float | None = None,
    kprime: int | None = None,
) -> TopologySpec:
    """Build one of the built-in benchmark topologies.

    ``r_r`` applies to t0/t1 (default 5), ``d`` to t2/t3 (default 1) and
    ``kprime`` to twoplane (default 11).
    """
    name = name.lower()
    if name not in TOPOLOGY_IDS:
        raise SpecInvalid(
            f"unknown topology {name!r}; available: {', '.join(TOPOLOGY_IDS)}"
        )
    if name == "t0":
        rr = 5.0 if r_r is None else float(r_r)
        return TopologySpec("t0", (0, 0, 10), (10, 0, 0), rr, (_plane_ref(0.0),), "halfspace")
    if name == "t1":
        rr = 5.0 if r_r is None else float(r_r)
        return TopologySpec("t1", (10, 0, 10), (10, 0, 0), rr, (_plane_ref(0.0),), "halfspace")
    if name in ("t2", "t3"):
        dd = 1.0 if d is None else float(d)
        rr = 5.0 if r_r is None else float(r_r)
        tx = (20, 0, 0) if name == "t2" else (20, 0, 5)
        plane_x = 10.0 - rr - dd
        return TopologySpec(name, tx, (10, 0, 0), rr, (_plane_ref(plane_x),), "halfspace")
    if name == "t4":
        return TopologySpec(
            "t4",
            (5, 0, 0),
            (15, 0, 0),
            5.0 if r_r is None else float(r_r),
            (
                {
                    "type": "rect",
                    "center_um": [0.0, 0.0, 0.0],
                    "normal": [1.0, 0.0, 0.0],
                    "u_axis": [0.0, 1.0, 0.0],
                    "v_axis": [0.0, 0.0, 1.0],
                    "half_u_um": 20.0,
                    "half_v_um": 20.0,
                },
            ),
            "halfspace",
        )
    if name == "t2finite":
        rr = 5.0 if r_r is None else float(r_r)
        dd = 1.0 if d is None else float(d)
        plane_x = 10.0 - rr - dd
        return TopologySpec(
            "t2finite",
            (20, 0, 0),
            (10, 0, 0),
            rr,
            (
                {
                    "type": "rect",
                    "center_um": [plane_x, 0.0, 0.0],
                    "normal": [1.0, 0.0, 0.0],
                    "u_axis": [0.0, 1.0, 0.0],
                    "v_axis": [0.0, 0.0, 1.0],
                    "half_u_um": 20.0,
                    "half_v_um": 20.0,
                },
            ),
            "halfspace",
        )
    # twoplane: planes at distance d + r_r either side of the receiver
    # center; the transmitter sits inside the slab, offset along z.
    rr = 5.0 if r_r is None else float(r_r)
    dd = 3.0 if d is None else float(d)
    gap = dd + rr
    return TopologySpec(
        "twoplane",
        (10, 0, 10),
        (10, 0, 0),
        rr,
        (
            {"type": "plane", "point_um": [10.0 - gap, 0.0, 0.0], "normal": [1.0, 0.0, 0.0]},
            {"type": "plane", "point_um": [10.0 + gap, 0.0, 0.0], "normal": [-1.0, 0.0, 0.0]},
        ),
        "twoplane",
        kprime=11 if kprime is None else int(kprime),
    )


def paper_variants():
    """All benchmark (topology, variant) combinations from the evaluation."""
    out = []
    for rr in (3.0, 5.0, 8.0):
        out.append(paper_topology("t0", r_r=rr))
        out.append(paper_topology("t1", r_r=rr))
    for dd in (1.0, 3.0, 5.0):
        out.append(paper_topology("t2", d=dd))
        out.append(paper_topology("t3", d=dd))
    out.append(paper_topology("t4"))
    out.append(paper_topology("t2finite"))
    for kp in (3, 5, 11):
        out.append(paper_topology("twoplane", kprime=kp))
    return out


def _reflector_from_dict(r: dict):
    try:
        kind = r["type"]
        if kind == "plane":
            return Plane(vec3(*r["point_um"]), vec3(*r["normal"]))
        if kind == "rect":
            return Rect(
                vec3(*r["center_um"]),
                vec3(*r["normal"]),
                vec3(*r["u_axis"]),
                vec3(*r["v_axis"]),
                float(r["half_u_um"]),
                float(r["half_v_um"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecInvalid(f"bad reflector entry {r!r}: {exc}") from exc
    raise SpecInvalid(f"unknown reflector type {r.get('type')!r}")


@dataclass
class AnalyticModel:
    """Closed-form response matched to a topology."""

    name: str
    cdf: object  # callable t -> probability
    rate: object  # callable t -> 1/s


def build_topology(spec: TopologySpec, D: float = PAPER_D):
    """Instantiate the simulation environment and matching analytic model."""
    tx = vec3(*spec.tx_um)
    rx = AbsorbingSphere(vec3(*spec.rx_center_um), spec.r_r_um)
    reflectors = tuple(_reflector_from_dict(r) for r in spec.reflectors)
    env = Environment(tx=tx, reflectors=reflectors, receivers=(rx,))
    diff = DiffusionParams(D)

    if spec.model == "siso":
        p = SisoParams(float(np.linalg.norm(tx - rx.center)), rx.radius, diff)
        model = AnalyticModel(
            "siso",
            cdf=lambda t: analytic.siso_hit_cdf(t, p),
            rate=lambda t: analytic.siso_hit_rate(t, p),
        )
    elif spec.model == "halfspace":
        planes = [
            r if isinstance(r, Plane) else r.plane() for r in reflectors
        ]
        if len(planes) != 1:
            raise SpecInvalid("halfspace model needs exactly one reflecting surface")
        p = HalfSpaceParams(tx, rx, planes[0], diff)
        model = AnalyticModel(
            "halfspace",
            cdf=lambda t: analytic.halfspace_hit_cdf(t, p),
            rate=lambda t: analytic.halfspace_hit_rate(t, p),
        )
    elif spec.model == "twoplane":
        planes = [r for r in reflectors if isinstance(r, Plane)]
        if len(planes) != 2:
            raise SpecInvalid("twoplane model needs exactly two reflecting planes")
        kprime = 11 if spec.kprime is None else spec.kprime
        p = TwoPlaneParams(tx, rx, planes[0], planes[1], kprime, diff)
        model = AnalyticModel(
            "twoplane",
            cdf=lambda t: analytic.two_plane_hit_cdf_approx(t, p),
            rate=lambda t: analytic.two_plane_hit_rate(t, p),
        )
    else:
        raise SpecInvalid(f"unknown analytic model {spec.model!r}")
    return env, model


def rmse(analytic_series, simulated_series) -> float:
    """Root-mean-square difference between two equal-length series."""
    a = np.asarray(analytic_series, dtype=np.float64)
    s = np.asarray(simulated_series, dtype=np.float64)
    if a.shape != s.shape:
        raise LengthMismatch(f"series shapes differ: {a.shape} vs {s.shape}")
    return float(np.sqrt(np.mean((a - s) ** 2)))


def desk_scale_config(seed: int = 1) -> SimConfig:
    """Fast configuration: full suite in minutes on one core."""
    return SimConfig(
        D=PAPER_D, dt=1e-4, T_total=PAPER_T_TOTAL,
        n_molecules=100_000, n_reps=10, seed=seed, bin_width=GRID_STEP,
    )


def paper_scale_config(seed: int = 1) -> SimConfig:
    """Full-accuracy configuration (expensive)."""
    return SimConfig(
        D=PAPER_D, dt=1e-5, T_total=PAPER_T_TOTAL,
        n_molecules=1_000_000, n_reps=100, seed=seed, bin_width=GRID_STEP,
    )


@dataclass
class ComparisonReport:
    topology: dict
    config: dict
    grid: np.ndarray
    analytic_cdf: np.ndarray
    simulated_cdf_mean: np.ndarray
    simulated_cdf_stderr: np.ndarray
    rmse: float
    n_emitted: int
    n_absorbed: int
    n_survived: int

    def to_json(self) -> str:
        payload = {
            "topology": self.topology,
            "config": self.config,
            "rmse": self.rmse,
            "n_emitted": self.n_emitted,
            "n_absorbed": self.n_absorbed,
            "n_survived": self.n_survived,
            "grid_s": [float(x) for x in self.grid],
            "analytic_cdf": [float(x) for x in self.analytic_cdf],
            "simulated_cdf_mean": [float(x) for x in self.simulated_cdf_mean],
            "simulated_cdf_stderr": [float(x) for x in self.simulated_cdf_stderr],
        }
        return json.dumps(payload, indent=2)

    def curves_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t_seconds,analytic_cdf,simulated_cdf_mean,simulated_cdf_stderr\n")
        for t, a, m, e in zip(
            self.grid, self.analytic_cdf, self.simulated_cdf_mean,
            self.simulated_cdf_stderr,
        ):
            buf.write(f"{float(t)!r},{float(a)!r},{float(m)!r},{float(e)!r}\n")
        return buf.getvalue()


def run_experiment(
    spec: TopologySpec, cfg: SimConfig, jump_cap: int | None = None
) -> ComparisonReport:
    """Simulate one topology and compare with its closed-form response."""
    env, model = build_topology(spec, D=cfg.D)
    hist = montecarlo.simulate(env, cfg, jump_cap=jump_cap)
    grid, sim_mean, sim_err = montecarlo.cumulative_curves(hist, 0)
    ana = np.asarray(model.cdf(grid), dtype=np.float64)
    err = rmse(ana, sim_mean)
    cfg_echo = {
        "D_um2_per_s": cfg.D,
        "dt_s": cfg.dt,
        "T_total_s": cfg.T_total,
        "n_molecules": cfg.n_molecules,
        "n_reps": cfg.n_reps,
        "seed": cfg.seed,
        "bin_width_s": cfg.bin_width,
    }
    return ComparisonReport(
        topology=spec.to_dict(),
        config=cfg_echo,
        grid=grid,
        analytic_cdf=ana,
        simulated_cdf_mean=sim_mean,
        simulated_cdf_stderr=sim_err,
        rmse=err,
        n_emitted=hist.n_emitted,
        n_absorbed=int(hist.n_absorbed.sum()),
        n_survived=hist.n_survived,
    )
