"""Command-line surface: analytic curves, simulations, benchmark experiments.

Exit codes: 0 success, 2 usage/config error, 3 runtime error.  CSV output
is UTF-8, comma separated with a header row; JSON key order is stable.
Set MCDIFF_THREADS to bound the simulator thread count.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, analytic, experiments, montecarlo
from .analytic import DiffusionParams, HalfSpaceParams, SimoPairParams, SisoParams, TwoPlaneParams
from .errors import McDiffError
from .experiments import TopologySpec, paper_topology
from .geometry import AbsorbingSphere, Plane, vec3


def _apply_thread_env():
    threads = os.environ.get("MCDIFF_THREADS")
    if threads:
        import numba

        numba.set_num_threads(int(threads))


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_vec(_ctx, _param, value):
    if value is None:
        return None
    try:
        parts = [float(x) for x in value.split(",")]
        return vec3(*parts)
    except (TypeError, ValueError) as exc:
        raise click.BadParameter(f"expected x,y,z — {exc}")


def _grid(t_max: float, grid_ms: float) -> np.ndarray:
    step = grid_ms * 1e-3
    n = int(round(t_max / step))
    return step * np.arange(1, n + 1)


def _write_rate_cdf_csv(grid, rate, cdf, out):
    lines = ["t_seconds,rate_per_s,cdf"]
    for t, r, c in zip(grid, rate, cdf):
        lines.append(f"{float(t)!r},{float(r)!r},{float(c)!r}")
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _manifest(command: str, config: dict, seed, duration: float) -> dict:
    return {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": seed,
        "version": __version__,
        "duration_s": duration,
    }


@click.group()
@click.version_option(__version__)
def main():
    """Diffusion-channel toolkit for molecular communication."""
    _apply_thread_env()


@main.group("analytic")
def analytic_group():
    """Evaluate closed-form channel responses to CSV."""


_common_grid = [
    click.option("--D", "d_coeff", type=float, default=experiments.PAPER_D,
                 show_default=True, help="Diffusion coefficient (um^2/s)."),
    click.option("--t-max", type=float, default=2.0, show_default=True,
                 help="Last grid time (s)."),
    click.option("--grid-ms", type=float, default=1.0, show_default=True,
                 help="Grid spacing (ms)."),
    click.option("--out", type=click.Path(dir_okay=False), default=None,
                 help="Write CSV here instead of stdout."),
]


def _with_grid_options(f):
    for opt in reversed(_common_grid):
        f = opt(f)
    return f


@analytic_group.command("siso")
@click.option("--r0", type=float, required=True, help="Tx-to-center distance (um).")
@click.option("--rr", type=float, required=True, help="Receiver radius (um).")
@_with_grid_options
def analytic_siso(r0, rr, d_coeff, t_max, grid_ms, out):
    """Single absorbing sphere in unbounded space."""
    try:
        p = SisoParams(r0, rr, DiffusionParams(d_coeff))
    except (McDiffError, ValueError) as exc:
        _fail(2, str(exc))
    grid = _grid(t_max, grid_ms)
    _write_rate_cdf_csv(grid, analytic.siso_hit_rate(grid, p), analytic.siso_hit_cdf(grid, p), out)


@analytic_group.command("simo")
@click.option("--ri", type=float, required=True, help="Radius of receiver i (um).")
@click.option("--rj", type=float, required=True, help="Radius of receiver j (um).")
@click.option("--r0i", type=float, required=True, help="Tx distance to i (um).")
@click.option("--r0j", type=float, required=True, help="Tx distance to j (um).")
@click.option("--phi", type=float, required=True, help="Angular separation (rad).")
@_with_grid_options
def analytic_simo(ri, rj, r0i, r0j, phi, d_coeff, t_max, grid_ms, out):
    """Receiver i of a two-receiver pair (stealing-corrected)."""
    try:
        p = SimoPairParams(r_i=ri, r_j=rj, r0_i=r0i, r0_j=r0j, phi=phi)
        diff = DiffusionParams(d_coeff)
    except (McDiffError, ValueError) as exc:
        _fail(2, str(exc))
    grid = _grid(t_max, grid_ms)
    _write_rate_cdf_csv(
        grid,
        analytic.simo_hit_rate(grid, p, diff, clamp=True),
        analytic.simo_hit_cdf(grid, p, diff),
        out,
    )


@analytic_group.command("halfspace")
@click.option("--tx", callback=_parse_vec, required=True, help="Transmitter x,y,z (um).")
@click.option("--rx-center", callback=_parse_vec, required=True, help="Receiver center x,y,z (um).")
@click.option("--rr", type=float, required=True, help="Receiver radius (um).")
@click.option("--plane-x", type=float, required=True,
              help="x position of the reflecting plane (normal +x).")
@_with_grid_options
def analytic_halfspace(tx, rx_center, rr, plane_x, d_coeff, t_max, grid_ms, out):
    """Half-space bounded by one reflecting plane (mirror-image model)."""
    try:
        p = HalfSpaceParams(
            tx,
            AbsorbingSphere(rx_center, rr),
            Plane(vec3(plane_x, 0, 0), vec3(1, 0, 0)),
            DiffusionParams(d_coeff),
        )
    except (McDiffError, ValueError) as exc:
        _fail(2, str(exc))
    grid = _grid(t_max, grid_ms)
    _write_rate_cdf_csv(
        grid,
        analytic.halfspace_hit_rate(grid, p, clamp=True),
        analytic.halfspace_hit_cdf(grid, p),
        out,
    )


@analytic_group.command("twoplane")
@click.option("--tx", callback=_parse_vec, required=True, help="Transmitter x,y,z (um).")
@click.option("--rx-center", callback=_parse_vec, required=True, help="Receiver center x,y,z (um).")
@click.option("--rr", type=float, required=True, help="Receiver radius (um).")
@click.option("--plane-x1", type=float, required=True, help="x of lower plane (normal +x).")
@click.option("--plane-x2", type=float, required=True, help="x of upper plane (normal -x).")
@click.option("--kprime", type=int, default=11, show_default=True,
              help="Retained image receivers.")
@_with_grid_options
def analytic_twoplane(tx, rx_center, rr, plane_x1, plane_x2, kprime, d_coeff,
                      t_max, grid_ms, out):
    """Slab between two parallel reflecting planes (truncated image series)."""
    try:
        p = TwoPlaneParams(
            tx,
            AbsorbingSphere(rx_center, rr),
            Plane(vec3(plane_x1, 0, 0), vec3(1, 0, 0)),
            Plane(vec3(plane_x2, 0, 0), vec3(-1, 0, 0)),
            kprime,
            DiffusionParams(d_coeff),
        )
    except (McDiffError, ValueError) as exc:
        _fail(2, str(exc))
    grid = _grid(t_max, grid_ms)
    _write_rate_cdf_csv(
        grid,
        analytic.two_plane_hit_rate(grid, p, clamp=True),
        analytic.two_plane_hit_cdf_approx(grid, p),
        out,
    )


def _scale_config(desk_scale, paper_scale, molecules, dt, reps, t_total, bin_width, seed):
    if desk_scale and paper_scale:
        raise click.UsageError("choose one of --desk-scale / --paper-scale")
    cfg = experiments.paper_scale_config(seed) if paper_scale else experiments.desk_scale_config(seed)
    kwargs = dict(
        D=cfg.D,
        dt=cfg.dt if dt is None else dt,
        T_total=cfg.T_total if t_total is None else t_total,
        n_molecules=cfg.n_molecules if molecules is None else molecules,
        n_reps=cfg.n_reps if reps is None else reps,
        seed=seed,
        bin_width=cfg.bin_width if bin_width is None else bin_width,
    )
    return montecarlo.SimConfig(**kwargs)


def _load_topology(topology, topology_file, rr, d, kprime) -> TopologySpec:
    if (topology is None) == (topology_file is None):
        raise click.UsageError("provide exactly one of --topology / --topology-file")
    if topology is not None:
        return paper_topology(topology, r_r=rr, d=d, kprime=kprime)
    path = Path(topology_file)
    if not path.exists():
        _fail(2, f"topology file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        _fail(2, f"cannot parse {path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    return TopologySpec.from_dict(data)


def _variant_label(spec: TopologySpec) -> str:
    if spec.model == "twoplane":
        return f"{spec.name}_k{spec.kprime}"
    if spec.name in ("t0", "t1"):
        return f"{spec.name}_rr{spec.r_r_um:g}"
    if spec.name in ("t2", "t3"):
        plane_x = spec.reflectors[0]["point_um"][0]
        d = spec.rx_center_um[0] - spec.r_r_um - plane_x
        return f"{spec.name}_d{d:g}"
    return spec.name


_sim_options = [
    click.option("--desk-scale", is_flag=True, help="Fast defaults (1e5 molecules, dt 1e-4, 10 reps)."),
    click.option("--paper-scale", is_flag=True, help="Full-accuracy defaults (1e6 molecules, dt 1e-5, 100 reps)."),
    click.option("--molecules", type=int, default=None, help="Molecules per replication."),
    click.option("--dt", type=float, default=None, help="Time step (s)."),
    click.option("--reps", type=int, default=None, help="Replications."),
    click.option("--t-total", type=float, default=None, help="Simulated duration (s)."),
    click.option("--bin-width", type=float, default=None, help="Histogram bin width (s)."),
    click.option("--seed", type=int, default=1, show_default=True, help="Base RNG seed."),
    click.option("--out-dir", type=click.Path(file_okay=False), default=".",
                 show_default=True, help="Output directory."),
]


def _with_sim_options(f):
    for opt in reversed(_sim_options):
        f = opt(f)
    return f


@main.command("simulate")
@click.option("--topology", type=str, default=None,
              help=f"Built-in topology: {', '.join(experiments.TOPOLOGY_IDS)}.")
@click.option("--topology-file", type=str, default=None, help="Topology JSON file.")
@click.option("--rr", type=float, default=None, help="Receiver radius variant (um).")
@click.option("--d", type=float, default=None, help="Surface-receiver gap variant (um).")
@click.option("--kprime", type=int, default=None, help="Two-plane image count (analytic echo only).")
@_with_sim_options
def simulate_cmd(topology, topology_file, rr, d, kprime, desk_scale, paper_scale,
                 molecules, dt, reps, t_total, bin_width, seed, out_dir):
    """Run the particle simulator; write histogram CSV and a run manifest."""
    t0 = time.monotonic()
    try:
        spec = _load_topology(topology, topology_file, rr, d, kprime)
        cfg = _scale_config(desk_scale, paper_scale, molecules, dt, reps, t_total,
                            bin_width, seed)
        env, _model = experiments.build_topology(spec, D=cfg.D)
    except (McDiffError, ValueError) as exc:
        _fail(2, str(exc))
    try:
        hist = montecarlo.simulate(env, cfg)
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 3
        _fail(3, f"simulation failed: {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label = _variant_label(spec)

    lines = ["t_bin_end_seconds," + ",".join(
        f"count_receiver_{i}" for i in range(hist.n_receivers)
    ) + ",cumulative_fraction_receiver_0"]
    cum = 0
    for b in range(hist.n_bins):
        cum += int(hist.counts[0, b])
        t_end = (b + 1) * hist.bin_width
        row = [repr(float(t_end))] + [str(int(hist.counts[i, b])) for i in range(hist.n_receivers)]
        row.append(repr(float(cum) / max(1, hist.n_emitted)))
        lines.append(",".join(row))
    (out / f"histogram_{label}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest = _manifest(
        "simulate",
        {
            "topology": spec.to_dict(),
            "sim": {
                "D_um2_per_s": cfg.D, "dt_s": cfg.dt, "T_total_s": cfg.T_total,
                "n_molecules": cfg.n_molecules, "n_reps": cfg.n_reps,
                "bin_width_s": cfg.bin_width,
            },
            "n_emitted": hist.n_emitted,
            "n_absorbed": [int(x) for x in hist.n_absorbed],
            "n_survived": hist.n_survived,
        },
        seed,
        time.monotonic() - t0,
    )
    (out / f"manifest_{label}.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    click.echo(f"wrote {out / f'histogram_{label}.csv'}")


@main.command("experiment")
@click.argument("topology_id", required=False)
@click.option("--all", "run_all", is_flag=True, help="Run every benchmark variant.")
@click.option("--rr", type=float, default=None, help="Receiver radius variant (um).")
@click.option("--d", type=float, default=None, help="Surface-receiver gap variant (um).")
@click.option("--kprime", type=int, default=None, help="Two-plane image count.")
@_with_sim_options
def experiment_cmd(topology_id, run_all, rr, d, kprime, desk_scale, paper_scale,
                   molecules, dt, reps, t_total, bin_width, seed, out_dir):
    """Compare the analytic model with simulation for a benchmark topology."""
    t_start = time.monotonic()
    if run_all == (topology_id is not None):
        raise click.UsageError("provide a topology id or --all")
    try:
        if run_all:
            specs = experiments.paper_variants()
        else:
            specs = [paper_topology(topology_id, r_r=rr, d=d, kprime=kprime)]
        cfg = _scale_config(desk_scale, paper_scale, molecules, dt, reps, t_total,
                            bin_width, seed)
    except (McDiffError, ValueError) as exc:
        _fail(2, str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        try:
            report = experiments.run_experiment(spec, cfg)
        except Exception as exc:  # noqa: BLE001 - surfaced as exit code 3
            _fail(3, f"experiment {spec.name} failed: {exc}")
        label = _variant_label(spec)
        (out / f"report_{label}.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out / f"curves_{label}.csv").write_text(report.curves_csv(), encoding="utf-8")
        click.echo(f"{label}: rmse={report.rmse:.6f}")
    manifest = _manifest(
        "experiment",
        {
            "variants": [_variant_label(s) for s in specs],
            "sim": {
                "D_um2_per_s": cfg.D, "dt_s": cfg.dt, "T_total_s": cfg.T_total,
                "n_molecules": cfg.n_molecules, "n_reps": cfg.n_reps,
                "bin_width_s": cfg.bin_width,
            },
        },
        seed,
        time.monotonic() - t_start,
    )
    (out / "manifest_experiment.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


if __name__ == "__main__":
    main()
