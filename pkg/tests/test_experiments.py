import json
import math

import numpy as np
import pytest

from mcdiff.errors import LengthMismatch, SpecInvalid
from mcdiff.experiments import (
    PAPER_D,
    TOPOLOGY_IDS,
    SimConfig,
    TopologySpec,
    build_topology,
    desk_scale_config,
    paper_scale_config,
    paper_topology,
    paper_variants,
    rmse,
    run_experiment,
)
from mcdiff.geometry import Plane, Rect


def tiny_config(**overrides):
    base = dict(
        D=PAPER_D, dt=1e-4, T_total=0.2, n_molecules=500, n_reps=2, seed=3,
        bin_width=1e-3,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestRmse:
    def test_identical_series(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_constant_offset(self):
        assert rmse([0.0, 0.0], [0.1, 0.1]) == pytest.approx(0.1)

    def test_mixed(self):
        # mean of squares (0.01 + 0.04) / 2 = 0.025
        assert rmse([1.0, 2.0], [1.1, 2.2]) == pytest.approx(math.sqrt(0.025))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            rmse([1.0, 2.0], [1.0])


class TestTopologyRegistry:
    def test_all_ids_buildable(self):
        for name in TOPOLOGY_IDS:
            env, model = build_topology(paper_topology(name))
            assert len(env.receivers) == 1

    def test_edge_topology_distance(self):
        spec = paper_topology("t0")
        env, _ = build_topology(spec)
        r0 = float(np.linalg.norm(env.tx - env.receivers[0].center))
        assert r0 == pytest.approx(10 * math.sqrt(2))

    def test_eclipse_plane_position(self):
        spec = paper_topology("t2", d=1.0)
        env, _ = build_topology(spec)
        plane = env.reflectors[0]
        assert isinstance(plane, Plane)
        assert plane.point[0] == pytest.approx(4.0)
        # gap between plane and sphere surface is exactly d
        assert env.receivers[0].center[0] - env.receivers[0].radius - plane.point[0] == pytest.approx(1.0)

    def test_finite_layer_is_rect(self):
        env, _ = build_topology(paper_topology("t4"))
        rect = env.reflectors[0]
        assert isinstance(rect, Rect)
        assert rect.half_u == rect.half_v == 20.0

    def test_twoplane_slab(self):
        env, model = build_topology(paper_topology("twoplane", kprime=3))
        xs = sorted(p.point[0] for p in env.reflectors)
        assert xs == [2.0, 18.0]
        assert model.name == "twoplane"

    def test_variant_count(self):
        assert len(paper_variants()) == 17

    def test_unknown_id(self):
        with pytest.raises(SpecInvalid) as err:
            paper_topology("nope")
        for name in TOPOLOGY_IDS:
            assert name in str(err.value)


class TestTopologySpecSerialization:
    def test_round_trip(self):
        spec = paper_topology("t2finite")
        clone = TopologySpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert clone == spec

    def test_missing_field(self):
        with pytest.raises(SpecInvalid):
            TopologySpec.from_dict({"name": "x"})

    def test_bad_reflector(self):
        spec = paper_topology("t0")
        d = spec.to_dict()
        d["reflectors"][0]["type"] = "cylinder"
        with pytest.raises(SpecInvalid):
            build_topology(TopologySpec.from_dict(d))


class TestConfigs:
    def test_desk_scale(self):
        cfg = desk_scale_config(seed=9)
        assert cfg.n_molecules == 100_000
        assert cfg.dt == 1e-4
        assert cfg.n_reps == 10
        assert cfg.seed == 9

    def test_paper_scale(self):
        cfg = paper_scale_config()
        assert cfg.n_molecules == 1_000_000
        assert cfg.dt == 1e-5
        assert cfg.n_reps == 100


class TestRunExperiment:
    def test_report_contents(self):
        report = run_experiment(paper_topology("t0"), tiny_config())
        assert report.grid.shape == (200,)
        assert report.analytic_cdf.shape == report.simulated_cdf_mean.shape
        assert 0.0 <= report.rmse <= 1.0
        assert report.n_emitted == 1000
        assert report.n_absorbed + report.n_survived == report.n_emitted

    def test_report_deterministic(self):
        a = run_experiment(paper_topology("t0"), tiny_config())
        b = run_experiment(paper_topology("t0"), tiny_config())
        assert a.to_json() == b.to_json()
        assert a.curves_csv() == b.curves_csv()

    def test_json_round_trips(self):
        report = run_experiment(paper_topology("t0"), tiny_config())
        payload = json.loads(report.to_json())
        assert payload["rmse"] == report.rmse
        assert payload["topology"]["name"] == "t0"
        assert len(payload["grid_s"]) == 200

    def test_csv_header(self):
        report = run_experiment(paper_topology("t0"), tiny_config())
        lines = report.curves_csv().splitlines()
        assert lines[0] == "t_seconds,analytic_cdf,simulated_cdf_mean,simulated_cdf_stderr"
        assert len(lines) == 201
