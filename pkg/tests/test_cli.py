import csv
import json
import math

import numpy as np
import pytest

from geoflow import cli

SPHERE_LENGTH = 2.3303552  # great-circle distance for the default sphere endpoints


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


EUCLID_REPEAT = """
name = "flat3"
[manifold]
name = "euclidean"
dim = 3
[endpoints]
p = [0.0, 0.0, 0.0]
q = [1.0, 2.0, 2.0]
[pde]
D = 6
[schedule]
random = 100
spread = 2.0
"""


class TestSolve:
    def test_default_sphere(self, tmp_path):
        out = tmp_path / "sphere.csv"
        assert cli.main(["solve", "--out", str(out)]) == 0
        (row,) = _rows(out)
        assert list(row) == list(cli.RESULT_COLUMNS)
        assert row["method"] == "pde" and row["D"] == "7" and row["N"] == "8"
        assert abs(float(row["length"]) - 2.33) <= 0.01
        assert row["converged"] == "true"
        doc = json.loads((tmp_path / "sphere.sphere.pde.json").read_text())
        assert doc["D"] == 7 and len(doc["coefficients"]) == 2
        assert len(doc["coefficients"][0]) == 8
        assert doc["length"] == pytest.approx(float(row["length"]), rel=1e-15)

    def test_coefficients_reproduce_endpoints(self, tmp_path):
        out = tmp_path / "s.csv"
        cli.main(["solve", "--out", str(out)])
        doc = json.loads((tmp_path / "s.sphere.pde.json").read_text())
        c = np.array(doc["coefficients"])
        ends = np.polynomial.chebyshev.chebval(np.array([-1.0, 1.0]), c.T)
        np.testing.assert_allclose(ends[:, 0], [math.pi / 8, math.pi / 8], atol=1e-12)
        np.testing.assert_allclose(ends[:, 1], [3 * math.pi / 4, 2 * math.pi / 3], atol=1e-12)

    def test_euclidean_exact(self, tmp_path):
        out = tmp_path / "e.csv"
        assert cli.main(["solve", "--config", "preset:euclidean", "--out", str(out)]) == 0
        assert abs(float(_rows(out)[0]["length"]) - math.sqrt(2)) < 1e-8

    def test_torus_both_methods_agree(self, tmp_path):
        out = tmp_path / "t.csv"
        assert cli.main(["solve", "--config", "preset:torus", "--method", "both",
                         "--out", str(out)]) == 0
        pde, gd = _rows(out)
        assert (pde["method"], gd["method"]) == ("pde", "gd")
        assert gd["N"] == "15"
        assert abs(float(pde["length"]) - float(gd["length"])) < 1e-3 * float(pde["length"])
        assert (tmp_path / "t.torus.gd.json").exists()

    def test_stdout(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["solve", "--config", "preset:euclidean"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(cli.RESULT_COLUMNS) and len(lines) == 2
        assert (tmp_path / "euclidean.pde.json").exists()

    def test_fixed_step_is_bit_identical(self, tmp_path):
        texts = []
        for k in range(2):
            out = tmp_path / f"r{k}.csv"
            assert cli.main(["solve", "--fixed-step", "1e-4", "--out", str(out)]) == 0
            row = _rows(out)[0]
            row.pop("wall_time_ms")
            texts.append((row, (tmp_path / f"r{k}.sphere.pde.json").read_text()))
        assert texts[0] == texts[1]

    @pytest.mark.perf
    def test_heat_flow_faster_than_descent(self, tmp_path):
        out = tmp_path / "b.csv"
        cli.main(["solve", "--method", "both", "--out", str(out)])
        pde, gd = _rows(out)
        assert float(pde["wall_time_ms"]) < float(gd["wall_time_ms"])
        assert float(pde["wall_time_ms"]) < 1000.0


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert cli.main(["solve", "--config", str(tmp_path / "nope.toml")]) == 1

    def test_unknown_key(self, tmp_path):
        path = _write(tmp_path, "bad.toml",
                      '[manifold]\nname = "sphere"\n[endpoints]\np = [1, 1]\nq = [2, 2]\n'
                      '[pde]\nDD = 4\n')
        assert cli.main(["solve", "--config", path]) == 1

    def test_unknown_preset(self):
        assert cli.main(["bench", "--config", "preset:missing"]) == 1

    def test_bad_fixed_step(self):
        assert cli.main(["solve", "--fixed-step", "-1"]) == 1

    def test_verb_needs_its_table(self, tmp_path):
        assert cli.main(["sweep-alpha", "--config", "preset:sphere",
                         "--out", str(tmp_path / "x.csv")]) == 1
        assert cli.main(["repeat", "--config", "preset:sphere",
                         "--out", str(tmp_path / "x.csv")]) == 1

    def test_solver_failure(self, tmp_path):
        path = _write(tmp_path, "pole.toml",
                      '[manifold]\nname = "sphere"\n[endpoints]\np = [0.5, 0.0]\n'
                      'q = [-0.5, 0.0]\n[pde]\nD = 4\n')
        assert cli.main(["solve", "--config", path, "--out", str(tmp_path / "o.csv")]) == 2

    def test_argparse_rejects_unknown_verb(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["optimize"])
        assert info.value.code == 2


class TestBench:
    def test_default_rows(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert cli.main(["bench", "--out", str(out)]) == 0
        rows = _rows(out)
        assert [(r["surface"], r["method"]) for r in rows] == [
            ("sphere", "pde"), ("sphere", "gd"), ("torus", "pde"), ("torus", "gd")]
        assert all(r["error"] == "" and r["converged"] == "true" for r in rows)
        assert abs(float(rows[0]["length"]) - 2.33) <= 0.01
        assert abs(float(rows[2]["length"]) - 16.5) <= 0.1

    def test_empty_surface_list(self, tmp_path):
        path = _write(tmp_path, "empty.toml", 'name = "none"\nsurfaces = []\n')
        out = tmp_path / "b.csv"
        assert cli.main(["bench", "--config", path, "--out", str(out)]) == 0
        assert out.read_text() == ",".join(cli.BENCH_COLUMNS) + "\n"

    def test_failed_row_is_recorded(self, tmp_path):
        path = _write(tmp_path, "fail.toml", """
[[surfaces]]
name = "flat"
manifold = { name = "euclidean", dim = 2 }
endpoints = { p = [0, 0], q = [1, 1] }
pde = { D = 4 }
[[surfaces]]
name = "pole"
manifold = { name = "sphere" }
endpoints = { p = [0.5, 0.0], q = [-0.5, 0.0] }
pde = { D = 4 }
""")
        out = tmp_path / "b.csv"
        assert cli.main(["bench", "--config", path, "--out", str(out)]) == 2
        ok, bad = _rows(out)
        assert ok["error"] == "" and bad["surface"] == "pole"
        assert bad["converged"] == "false" and bad["length"] == "" and bad["error"]


class TestSweeps:
    def test_alpha_on_flat_line(self, tmp_path):
        out = tmp_path / "a.csv"
        assert cli.main(["sweep-alpha", "--config", "preset:sweep_alpha_euclidean",
                         "--out", str(out)]) == 0
        rates = _rows(tmp_path / "a.rates.csv")
        assert [float(r["alpha"]) for r in rates] == [1.0, 2.0, 4.0]
        for r in rates:
            # a sin(pi s) bump loses energy at 2 alpha pi^2
            expected = 2 * float(r["alpha"]) * math.pi**2
            assert abs(float(r["rate"]) - expected) <= 0.02 * expected
            assert r["fit_ok"] == "true"
        trace = _rows(out)
        assert {float(r["alpha"]) for r in trace} == {1.0, 2.0, 4.0}

    def test_single_alpha(self, tmp_path):
        path = _write(tmp_path, "one.toml", """
[manifold]
name = "euclidean"
dim = 1
[endpoints]
p = [0.0]
q = [0.0]
[pde]
D = 12
[init]
kind = "sine"
[sweep]
parameter = "alpha"
values = [3.0]
""")
        out = tmp_path / "one.csv"
        assert cli.main(["sweep-alpha", "--config", path, "--out", str(out)]) == 0
        assert len(_rows(tmp_path / "one.rates.csv")) == 1

    def test_radius_default(self, tmp_path):
        out = tmp_path / "r.csv"
        assert cli.main(["sweep-radius", "--out", str(out)]) == 0
        rows = _rows(out)
        assert [float(r["R"]) for r in rows] == [1.0, 0.75, 0.5]
        rates = [float(r["rate"]) for r in rows]
        assert rates[0] > rates[1] > rates[2]
        assert _rows(tmp_path / "r.traces.csv")

    def test_single_radius(self, tmp_path):
        path = _write(tmp_path, "r1.toml", """
[manifold]
name = "sphere"
[endpoints]
p = [-0.5, -0.5]
q = [0.5, 0.5]
[pde]
D = 10
[sweep]
parameter = "R"
values = [2.0]
endpoint_units = "arc"
""")
        out = tmp_path / "r1.csv"
        assert cli.main(["sweep-radius", "--config", path, "--out", str(out)]) == 0
        (row,) = _rows(out)
        # arc endpoints keep the straight chord length fixed as R changes
        assert float(row["length"]) == pytest.approx(math.sqrt(2), rel=0.05)


class TestRepeat:
    def test_flat_schedule_exact(self, tmp_path):
        path = _write(tmp_path, "flat.toml", EUCLID_REPEAT)
        out = tmp_path / "rep.csv"
        assert cli.main(["repeat", "--config", path, "--seed", "7", "--out", str(out)]) == 0
        rows = _rows(out)
        assert len(rows) == 100
        q = np.array([1.0, 2.0, 2.0])
        for r in rows:
            start = np.array([float(v) for v in r["start"].split()])
            assert abs(float(r["length"]) - np.linalg.norm(q - start)) < 1e-8

    def test_seed_changes_starts(self, tmp_path):
        path = _write(tmp_path, "flat.toml", EUCLID_REPEAT.replace("random = 100", "random = 3"))
        starts = []
        for seed in (1, 1, 2):
            out = tmp_path / f"s{seed}.csv"
            cli.main(["repeat", "--config", path, "--seed", str(seed), "--out", str(out)])
            starts.append([r["start"] for r in _rows(out)])
        assert starts[0] == starts[1] != starts[2]

    def test_empty_schedule(self, tmp_path):
        path = _write(tmp_path, "empty.toml",
                      EUCLID_REPEAT.replace("random = 100\nspread = 2.0", "starts = []"))
        out = tmp_path / "e.csv"
        assert cli.main(["repeat", "--config", path, "--out", str(out)]) == 0
        assert out.read_text() == ",".join(cli.REPEAT_COLUMNS) + "\n"

    def test_warm_start_reduces_work(self, tmp_path):
        out = tmp_path / "w.csv"
        assert cli.main(["repeat", "--out", str(out)]) == 0
        its = [int(r["iterations"]) for r in _rows(out)]
        assert len(its) == 20
        assert np.mean(its[10:]) < np.mean(its[:10])
        assert all(r["converged"] == "true" for r in _rows(out))


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--version"])
    assert info.value.code == 0
    assert "geoflow" in capsys.readouterr().out
