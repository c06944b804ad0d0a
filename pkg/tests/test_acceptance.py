"""Acceptance gate: every top-level requirement, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.  The
optional full-accuracy spot check only runs when MCDIFF_PAPER_SCALE=1.

Known red: the large-time limit check demands agreement with the asymptote
to 1e-9 at t = 1e9 s, but the closed form still sits ~4e-6 away from its
asymptote there for any parameters at these length scales (the erfc
argument is ~1e-5, and the residual scales as its first power).  The check
is kept at its stated tolerance rather than loosened; see the notes ledger.
"""

import json
import math
import os
import time

import numba
import numpy as np
import pytest
from scipy.integrate import quad

from mcdiff import analytic, montecarlo
from mcdiff.analytic import DiffusionParams, SisoParams
from mcdiff.experiments import (
    GRID_STEP,
    PAPER_D,
    TopologySpec,
    build_topology,
    desk_scale_config,
    paper_scale_config,
    paper_topology,
    rmse,
    run_experiment,
)
from mcdiff.geometry import AbsorbingSphere, mirror_sphere, vec3

D = DiffusionParams(PAPER_D)
CHECK_GRID = 0.1 * np.arange(1, 21)  # 20 points over (0, 2] s

_reports = {}


def cached_report(spec: TopologySpec, jump_cap=None):
    key = (json.dumps(spec.to_dict(), sort_keys=True), jump_cap)
    if key not in _reports:
        _reports[key] = run_experiment(spec, desk_scale_config(), jump_cap=jump_cap)
    return _reports[key]


def announce(name, ok, detail, t0, budget_s):
    dt = time.monotonic() - t0
    status = "PASS" if ok and dt < budget_s else "FAIL"
    print(f"ACCEPTANCE {name}: {status} ({detail}; {dt:.1f}s < {budget_s:.0f}s)")
    assert ok, f"{name}: {detail}"
    assert dt < budget_s, f"{name}: runtime {dt:.1f}s exceeds {budget_s}s"


def quad_matches_cdf(rate_fn, cdf_fn):
    """Max |integral of rate - cdf| over the 20-point check grid."""
    worst = 0.0
    total = 0.0
    lo = 0.0
    for t in CHECK_GRID:
        part, _ = quad(rate_fn, lo, t, limit=200)
        total += part
        lo = t
        worst = max(worst, abs(total - float(cdf_fn(t))))
    return worst


class TestAnalyticSelfConsistency:
    def test_rate_integrates_to_cdf_all_models(self):
        t0 = time.monotonic()
        cases = {}

        siso = SisoParams(10 * math.sqrt(2), 5.0, D)
        cases["siso"] = (
            lambda t: float(analytic.siso_hit_rate(t, siso)),
            lambda t: analytic.siso_hit_cdf(t, siso),
        )

        pair_i = analytic.SimoPairParams(5.0, 5.0, 10 * math.sqrt(2), 10 * math.sqrt(2), math.pi / 2)
        pair_j = analytic.SimoPairParams(5.0, 5.0, 22.0, 10.0, 0.0)
        for label, pair in (("simo_i", pair_i), ("simo_j", pair_j)):
            cases[label] = (
                lambda t, p=pair: float(analytic.simo_hit_rate(t, p, D)),
                lambda t, p=pair: analytic.simo_hit_cdf(t, p, D, clamp=False),
            )

        geoms = {
            "halfspace_t0": ((0, 0, 10), 5.0, 0.0),
            "halfspace_t1": ((10, 0, 10), 5.0, 0.0),
            "halfspace_t2": ((20, 0, 0), 5.0, 4.0),
            "halfspace_t3": ((20, 0, 5), 5.0, 2.0),
        }
        for label, (tx, rr, plane_x) in geoms.items():
            p = analytic.HalfSpaceParams(
                vec3(*tx), AbsorbingSphere(vec3(10, 0, 0), rr),
                analytic.Plane(vec3(plane_x, 0, 0), vec3(1, 0, 0)), D,
            )
            cases[label] = (
                lambda t, p=p: float(analytic.halfspace_hit_rate(t, p)),
                lambda t, p=p: analytic.halfspace_hit_cdf(t, p, clamp=False),
            )

        for k in (3, 5, 11):
            p = analytic.TwoPlaneParams(
                vec3(10, 0, 10), AbsorbingSphere(vec3(10, 0, 0), 5.0),
                analytic.Plane(vec3(2, 0, 0), vec3(1, 0, 0)),
                analytic.Plane(vec3(18, 0, 0), vec3(-1, 0, 0)), k, D,
            )
            cases[f"twoplane_k{k}"] = (
                lambda t, p=p: float(analytic.two_plane_hit_rate(t, p)),
                lambda t, p=p: analytic.two_plane_hit_cdf_approx(t, p, clamp=False),
            )

        worst = {label: quad_matches_cdf(r, c) for label, (r, c) in cases.items()}
        bad = {k: v for k, v in worst.items() if v > 1e-5}
        announce(
            "analytic-self-consistency",
            not bad,
            f"max |quad(rate) - cdf| = {max(worst.values()):.2e} over {len(cases)} models",
            t0, 10.0,
        )


class TestLimits:
    def test_large_time_limit_hits_asymptote(self):
        t0 = time.monotonic()
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            r0 = rng.uniform(6.0, 60.0)
            r_r = rng.uniform(0.5, r0 - 1.0)
            dd = DiffusionParams(rng.uniform(10.0, 500.0))
            p = SisoParams(r0, r_r, dd)
            dev = abs(float(analytic.siso_hit_cdf(1e9, p)) - r_r / r0)
            worst = max(worst, dev)
        announce(
            "large-time-limit",
            worst <= 1e-9,
            f"max |cdf(1e9 s) - r_r/r0| = {worst:.2e}, tolerance 1e-9",
            t0, 10.0,
        )

    def test_cdfs_monotone_and_bounded(self):
        t0 = time.monotonic()
        grid = GRID_STEP * np.arange(0, 2001)
        curves = {
            "siso": analytic.siso_hit_cdf(grid, SisoParams(10.0, 5.0, D)),
            "simo": analytic.simo_hit_cdf(
                grid,
                analytic.SimoPairParams(5.0, 5.0, 10 * math.sqrt(2), 10 * math.sqrt(2), math.pi / 2),
                D,
            ),
            "halfspace": analytic.halfspace_hit_cdf(
                grid,
                analytic.HalfSpaceParams(
                    vec3(20, 0, 5), AbsorbingSphere(vec3(10, 0, 0), 5.0),
                    analytic.Plane(vec3(2, 0, 0), vec3(1, 0, 0)), D,
                ),
            ),
            "twoplane": analytic.two_plane_hit_cdf_approx(
                grid,
                analytic.TwoPlaneParams(
                    vec3(10, 0, 10), AbsorbingSphere(vec3(10, 0, 0), 5.0),
                    analytic.Plane(vec3(2, 0, 0), vec3(1, 0, 0)),
                    analytic.Plane(vec3(18, 0, 0), vec3(-1, 0, 0)), 11, D,
                ),
            ),
        }
        ok = all(
            np.all(c >= 0.0) and np.all(c <= 1.0) and np.all(np.diff(c) >= -1e-12)
            for c in curves.values()
        )
        announce(
            "cdf-monotone-bounded",
            ok,
            f"{len(curves)} models on a 1 ms grid",
            t0, 10.0,
        )


class TestSimulatorVsAnalytic:
    def test_unbounded_oracle(self):
        t0 = time.monotonic()
        spec = TopologySpec("t0free", (0, 0, 10), (10, 0, 0), 5.0, (), "siso")
        report = cached_report(spec)
        announce(
            "unbounded-oracle",
            report.rmse <= 0.01,
            f"rmse={report.rmse:.4f} <= 0.01",
            t0, 120.0,
        )

    def test_halfspace_all_variants(self):
        t0 = time.monotonic()
        results = {}
        for rr in (3.0, 5.0, 8.0):
            for name in ("t0", "t1"):
                spec = paper_topology(name, r_r=rr)
                results[f"{name}_rr{rr:g}"] = cached_report(spec).rmse
        for dd in (1.0, 3.0, 5.0):
            for name in ("t2", "t3"):
                spec = paper_topology(name, d=dd)
                results[f"{name}_d{dd:g}"] = cached_report(spec).rmse
        bad = {k: v for k, v in results.items() if v > 0.03}
        worst = max(results, key=results.get)
        announce(
            "halfspace-reproduction",
            not bad,
            f"12 variants, worst {worst} rmse={results[worst]:.4f} <= 0.03",
            t0, 1200.0,
        )

    def test_mirror_image_equivalence(self):
        # half-space hit fraction equals the combined fraction of the real
        # receiver plus its mirror image in free space (same sampling scale)
        t0 = time.monotonic()
        spec = paper_topology("t2", d=3.0)
        half = cached_report(spec)
        frac_half = float(half.simulated_cdf_mean[-1])

        env, _ = build_topology(spec)
        rx = env.receivers[0]
        rx_im = mirror_sphere(rx, env.reflectors[0])
        free_env = montecarlo.Environment(
            tx=env.tx, reflectors=(), receivers=(rx, rx_im)
        )
        hist = montecarlo.simulate(free_env, desk_scale_config())
        frac_free = (
            montecarlo.cumulative_fraction(hist, 0, 2.0)
            + montecarlo.cumulative_fraction(hist, 1, 2.0)
        )
        n = hist.n_emitted
        se = math.sqrt(
            frac_half * (1 - frac_half) / n + frac_free * (1 - frac_free) / n
        )
        diff = abs(frac_half - frac_free)
        announce(
            "mirror-image-equivalence",
            diff <= 3 * se,
            f"|{frac_half:.5f} - {frac_free:.5f}| = {diff:.5f} <= 3*SE = {3 * se:.5f}",
            t0, 300.0,
        )

    def test_finite_surface(self):
        t0 = time.monotonic()
        results = {
            name: cached_report(paper_topology(name)).rmse
            for name in ("t4", "t2finite")
        }
        ok = all(v <= 0.03 for v in results.values())
        announce(
            "finite-surface",
            ok,
            ", ".join(f"{k} rmse={v:.4f}" for k, v in results.items()) + " <= 0.03",
            t0, 300.0,
        )

    def test_two_plane_series(self):
        t0 = time.monotonic()
        env, _ = build_topology(paper_topology("twoplane"))
        hist = montecarlo.simulate(env, desk_scale_config())
        grid, sim_mean, _ = montecarlo.cumulative_curves(hist, 0)
        results = {}
        for k in (3, 5, 11):
            _, model = build_topology(paper_topology("twoplane", kprime=k))
            results[k] = rmse(np.asarray(model.cdf(grid)), sim_mean)
        ok = all(v <= 0.03 for v in results.values())
        announce(
            "two-plane-series",
            ok,
            ", ".join(f"K'={k} rmse={v:.4f}" for k, v in results.items()) + " <= 0.03",
            t0, 300.0,
        )


class TestDeterminism:
    def test_thread_count_invariance(self):
        t0 = time.monotonic()
        spec = paper_topology("t0")
        cfg = montecarlo.SimConfig(
            D=PAPER_D, dt=1e-4, T_total=0.2, n_molecules=5000, n_reps=3,
            seed=11, bin_width=1e-3,
        )
        available = numba.get_num_threads()
        payloads = []
        for n in sorted({1, min(2, available), available}):
            numba.set_num_threads(n)
            try:
                payloads.append(run_experiment(spec, cfg).to_json().encode())
            finally:
                numba.set_num_threads(available)
        ok = all(p == payloads[0] for p in payloads)
        announce(
            "determinism",
            ok,
            f"bit-identical reports across thread counts (max {available} on this host)",
            t0, 120.0,
        )


@pytest.mark.skipif(
    os.environ.get("MCDIFF_PAPER_SCALE") != "1",
    reason="full-accuracy spot check; set MCDIFF_PAPER_SCALE=1 to run",
)
class TestFullScaleSpotCheck:
    def test_side_mirror_small_receiver(self):
        t0 = time.monotonic()
        report = run_experiment(paper_topology("t1", r_r=3.0), paper_scale_config())
        ok = 0.00105 <= report.rmse <= 0.00315
        announce(
            "full-scale-spot-check",
            ok,
            f"rmse={report.rmse:.4f} within [0.0011, 0.0032]",
            t0, 86400.0,
        )
