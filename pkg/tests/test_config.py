import math

import pytest

from geoflow.config import (
    eval_number,
    load_config,
    load_preset,
    parse_config,
    preset_names,
    resolve_config,
)
from geoflow.errors import ConfigError


def _doc(**extra):
    doc = {
        "manifold": {"name": "sphere", "parameters": {"R": 1.0}},
        "endpoints": {"p": ["pi/8", "pi/8"], "q": ["3*pi/4", "2*pi/3"]},
    }
    doc.update(extra)
    return doc


class TestNumbers:
    @pytest.mark.parametrize("text,value", [
        ("pi", math.pi), ("3*pi/4", 0.75 * math.pi), ("-pi/2", -math.pi / 2),
        ("2**3", 8.0), ("1e-3", 1e-3), ("e", math.e), ("(1+2)*pi", 3 * math.pi),
    ])
    def test_expressions(self, text, value):
        assert eval_number(text) == pytest.approx(value, rel=1e-15)

    def test_plain_numbers(self):
        assert eval_number(3) == 3.0 and eval_number(0.25) == 0.25

    @pytest.mark.parametrize("bad", ["__import__('os')", "tau", "1/0", "pi(", "[1]", True, None])
    def test_rejected(self, bad):
        with pytest.raises(ConfigError):
            eval_number(bad)


class TestParse:
    def test_minimal(self):
        cfg = parse_config(_doc())
        assert cfg.name == "sphere" and cfg.method == "pde"
        assert cfg.p == pytest.approx((math.pi / 8, math.pi / 8))
        assert cfg.pde.D == 16 and cfg.gd.D == 7
        assert cfg.build_manifold().params["R"] == 1.0

    def test_build_manifold_override(self):
        assert parse_config(_doc()).build_manifold(R=0.5).params["R"] == 0.5

    @pytest.mark.parametrize("extra", [
        {"colour": "red"},
        {"pde": {"D": 7, "alpah": 4.0}},
        {"gd": {"iters": 5}},
        {"endpoints": {"p": [1, 1], "q": [2, 2], "r": [0, 0]}},
    ])
    def test_unknown_keys(self, extra):
        with pytest.raises(ConfigError, match="unknown|alpah|colour|iters|r"):
            parse_config(_doc(**extra))

    @pytest.mark.parametrize("extra", [
        {"method": "newton"},
        {"pde": {"D": 0}},
        {"pde": {"alpha": -1.0}},
        {"pde": {"integrator": "euler"}},
        {"gd": {"D": 7, "N": 5}},
        {"endpoints": {"p": [1.0], "q": [2.0]}},
        {"endpoints": {"p": [1.0, 0.0], "q": [2.0]}},
        {"manifold": {"name": "torus", "parameters": {"a": 1.0, "b": 2.0}}},
        {"manifold": {"name": "klein"}},
        {"init": {"kind": "waypoints"}},
        {"sweep": {"parameter": "beta", "values": [1]}},
        {"sweep": {"parameter": "alpha", "values": [0.0]}},
        {"schedule": {"epochs": 3, "shrink": 1.5}},
        {"seed": "x"},
    ])
    def test_invalid_values(self, extra):
        with pytest.raises(ConfigError):
            parse_config(_doc(**extra))

    def test_missing_tables(self):
        with pytest.raises(ConfigError):
            parse_config({"endpoints": {"p": [0, 0], "q": [1, 1]}})
        with pytest.raises(ConfigError):
            parse_config({"manifold": {"name": "euclidean"}})

    def test_arc_units_only_on_sphere(self):
        doc = {"manifold": {"name": "euclidean", "dim": 2},
               "endpoints": {"p": [0, 0], "q": [1, 1]},
               "sweep": {"parameter": "alpha", "values": [1], "endpoint_units": "arc"}}
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_with_method_and_fixed_step(self):
        cfg = parse_config(_doc()).with_method("both").with_fixed_step(1e-3)
        assert cfg.method == "both"
        assert cfg.pde.integrator == "rk4" and cfg.pde.dtau == 1e-3
        with pytest.raises(ConfigError):
            cfg.with_method("nope")
        with pytest.raises(ConfigError):
            cfg.with_fixed_step(-1.0)


class TestSchedule:
    def test_geometric_walk(self):
        cfg = parse_config(_doc(schedule={"start": [1.0, 1.0], "epochs": 3, "shrink": 0.5}))
        q = cfg.q
        starts = cfg.schedule.starts
        assert len(starts) == 3
        assert starts[0] == pytest.approx((1.0, 1.0))
        assert starts[2] == pytest.approx(tuple(qi + (1.0 - qi) * 0.25 for qi in q))

    def test_default_start_is_p(self):
        cfg = parse_config(_doc(schedule={"epochs": 2}))
        assert cfg.schedule.starts[0] == pytest.approx(cfg.p)

    def test_explicit_starts(self):
        cfg = parse_config(_doc(schedule={"starts": [[1, 1], ["pi/3", 0]]}))
        assert cfg.schedule.starts[1] == pytest.approx((math.pi / 3, 0.0))

    def test_empty_schedule(self):
        assert parse_config(_doc(schedule={"starts": []})).schedule.starts == ()

    def test_conflicting_forms(self):
        with pytest.raises(ConfigError):
            parse_config(_doc(schedule={"starts": [[1, 1]], "epochs": 2}))


class TestFiles:
    def test_all_presets_load(self):
        names = preset_names()
        assert {"sphere", "torus", "eggbox", "bench", "sweep_alpha", "sweep_radius",
                "repeat"} <= set(names)
        for name in names:
            load_preset(name)

    def test_bench_preset_surfaces(self):
        cfg = load_preset("bench")
        assert [s.name for s in cfg.surfaces] == ["sphere", "torus", "eggbox"]
        assert [s.opt_in for s in cfg.surfaces] == [False, False, True]

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="available"):
            resolve_config("preset:nothing")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[manifold\nname = 1\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_round_trip_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[manifold]\nname = "torus"\nparameters = { a = 5, b = 3 }\n'
                        '[endpoints]\np = [0, 0]\nq = ["5*pi/4", "5*pi/4"]\n'
                        '[pde]\nD = 11\n')
        cfg = resolve_config(path)
        assert cfg.name == "torus" and cfg.pde.D == 11
        assert cfg.q == pytest.approx((1.25 * math.pi, 1.25 * math.pi))
