"""Command-line interface: file formats, exit codes, determinism."""

import json

import numpy as np
import pytest

from gofsuite import Histogram, spread_out, make_null_model
from gofsuite.cli import (
    EXIT_CONFIG,
    EXIT_ESTIMATION,
    EXIT_UNREADABLE,
    main,
    read_data_file,
    read_report,
    write_histogram_file,
)


@pytest.fixture
def uniform_data(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "u.txt"
    path.write_text("\n".join(f"{v:.12g}" for v in rng.random(200)) + "\n")
    return path


class TestDataFiles:
    def test_raw_roundtrip(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("1.5\n2.5\n-3\n")
        assert np.allclose(read_data_file(path), [1.5, 2.5, -3.0])

    def test_histogram_roundtrip(self, tmp_path):
        h = Histogram(np.linspace(0, 1, 6), np.array([3, 1, 4, 1, 5]))
        path = tmp_path / "h.csv"
        write_histogram_file(path, h)
        back = read_data_file(path)
        assert isinstance(back, Histogram)
        assert np.allclose(back.edges, h.edges)
        assert np.allclose(back.counts, h.counts)

    def test_histogram_header_detection(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("edges,counts\n0,5\n0.5,5\n1,\n")
        h = read_data_file(path)
        assert isinstance(h, Histogram)
        assert h.n == 10

    def test_missing_trailing_edge_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("edges,counts\n0,5\n1,5\n")
        with pytest.raises(ValueError):
            read_data_file(path)


class TestCmdTest:
    def test_runs_and_writes_json_report(self, uniform_data, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["test", "--data", str(uniform_data), "--null", "uniform",
                     "--params", "0,1", "--B", "200", "--seed", "11",
                     "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "RC:" in printed and "KS:" in printed
        report = read_report(out)
        assert report.seed == 11
        assert 0 <= report.rc_pvalue <= 1

    def test_deterministic_outputs(self, uniform_data, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            code = main(["test", "--data", str(uniform_data), "--null",
                         "uniform", "--params", "0,1", "--B", "150",
                         "--seed", "7", "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_csv_report_roundtrip(self, uniform_data, tmp_path):
        jout = tmp_path / "r.json"
        cout = tmp_path / "r.csv"
        for out, fmt in ((jout, "json"), (cout, "csv")):
            main(["test", "--data", str(uniform_data), "--null", "uniform",
                  "--params", "0,1", "--B", "150", "--seed", "3",
                  "--out", str(out), "--format", fmt])
        assert read_report(jout) == read_report(cout)

    def test_uniform_data_against_normal_null_rejects(self, tmp_path, capsys):
        # Uniform draws are grossly non-normal at n=1000.  B must comfortably
        # exceed the method count for rc to resolve below 0.01 (the adjusted
        # p-value cannot drop below the simulated share of zero minima).
        rng = np.random.default_rng(42)
        path = tmp_path / "u1000.txt"
        path.write_text("\n".join(f"{v:.12g}" for v in rng.random(1000)) + "\n")
        code = main(["test", "--data", str(path), "--null", "normal",
                     "--params", "0,1", "--estimate", "--B", "1000",
                     "--methods", "ks,ad,cdm,w,zk,za,zc", "--seed", "13"])
        assert code == 0
        rc = float([ln for ln in capsys.readouterr().out.splitlines()
                    if ln.startswith("RC:")][0].split()[1])
        assert rc < 0.01

    def test_histogram_equivalent_to_spread_raw(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.random(300)
        counts, edges = np.histogram(x, bins=15, range=(0, 1))
        h = Histogram(edges, counts)
        hpath = tmp_path / "h.csv"
        write_histogram_file(hpath, h)
        model = make_null_model("uniform", [0, 1])
        spread = spread_out(h, model)
        rpath = tmp_path / "r.txt"
        rpath.write_text("\n".join(f"{v:.17g}" for v in spread) + "\n")
        outs = []
        for data, name in ((hpath, "h.json"), (rpath, "r.json")):
            out = tmp_path / name
            code = main(["test", "--data", str(data), "--null", "uniform",
                         "--params", "0,1", "--B", "150", "--seed", "5",
                         "--out", str(out)])
            assert code == 0
            outs.append(read_report(out))
        assert outs[0].rc_pvalue == outs[1].rc_pvalue
        assert outs[0].per_method_pvalues == outs[1].per_method_pvalues

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["test", "--data", str(tmp_path / "nope.txt"),
                     "--null", "uniform", "--params", "0,1"]) == EXIT_UNREADABLE

    def test_garbage_file_exit_2(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("hello\nworld\n")
        assert main(["test", "--data", str(path), "--null", "uniform",
                     "--params", "0,1"]) == EXIT_UNREADABLE

    def test_estimation_failure_exit_3(self, tmp_path):
        path = tmp_path / "const.txt"
        path.write_text("\n".join(["2.0"] * 50) + "\n")
        assert main(["test", "--data", str(path), "--null", "normal",
                     "--params", "0,1", "--estimate", "--seed", "1",
                     "--B", "100"]) == EXIT_ESTIMATION

    def test_bad_config_exit_4(self, uniform_data):
        assert main(["test", "--data", str(uniform_data), "--null", "cauchy",
                     "--params", "0,1"]) == EXIT_CONFIG
        assert main(["test", "--data", str(uniform_data), "--null", "normal",
                     "--params", "0,-1"]) == EXIT_CONFIG

    def test_method_names_case_insensitive(self, uniform_data, capsys):
        code = main(["test", "--data", str(uniform_data), "--null", "uniform",
                     "--params", "0,1", "--methods", "ks,ad,cdm", "--B", "150",
                     "--seed", "2"])
        assert code == 0
        out = capsys.readouterr().out
        assert "CdM:" in out

    def test_seed_printed_when_drawn(self, uniform_data, capsys):
        code = main(["test", "--data", str(uniform_data), "--null", "uniform",
                     "--params", "0,1", "--B", "120"])
        assert code == 0
        assert "seed:" in capsys.readouterr().out


class TestCmdType1:
    def test_grid_csv_shape(self, tmp_path, capsys):
        spec = {
            "cases": [
                {"family": "uniform", "params": [0, 1], "estimate": False,
                 "n": 30},
                {"family": "normal", "params": [0, 1], "estimate": True,
                 "n": 30},
            ],
            "B": 120, "reps": 10, "alphas": [0.01, 0.05, 0.10],
            "methods": ["KS", "AD"], "seed": 1,
        }
        spath = tmp_path / "spec.json"
        spath.write_text(json.dumps(spec))
        code = main(["type1", "--spec", str(spath), "--out", str(tmp_path),
                     "--threads", "1"])
        assert code == 0
        lines = (tmp_path / "type1.csv").read_text().splitlines()
        assert len(lines) == 3  # header + one row per case
        assert lines[0] == "distribution,parameters,sample_size,alpha_0.01,alpha_0.05,alpha_0.1"

    def test_malformed_spec_exit_4_with_line(self, tmp_path, capsys):
        spath = tmp_path / "spec.json"
        spath.write_text('{"cases": [\n  {"family" "uniform"}\n]}')
        code = main(["type1", "--spec", str(spath), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG
        assert "line 2" in capsys.readouterr().err


class TestCmdPower:
    def _spec(self, tmp_path, cases):
        spec = {"cases": cases, "B": 120, "reps": 10, "alphas": [0.05],
                "methods": ["KS", "AD"], "seed": 2}
        spath = tmp_path / "power.json"
        spath.write_text(json.dumps(spec))
        return spath

    def test_power_outputs(self, tmp_path):
        cases = [
            {"name": "beta_sweep",
             "null": {"family": "uniform", "params": [0, 1]},
             "alternative": {"family": "beta", "params": [1, None]},
             "grid": [1.5, 3.0], "n": 50},
            {"name": "linear_sweep",
             "null": {"family": "uniform", "params": [0, 1]},
             "alternative": {"family": "linear", "params": [None]},
             "grid": [0.5, 1.0], "n": 50},
        ]
        code = main(["power", "--spec", str(self._spec(tmp_path, cases)),
                     "--out", str(tmp_path), "--threads", "1"])
        assert code == 0
        power_lines = (tmp_path / "power.csv").read_text().splitlines()
        # header + 2 cases x 2 grid x 3 methods (RC, KS, AD) x 1 alpha
        assert len(power_lines) == 1 + 2 * 2 * 3
        assert (tmp_path / "summary.csv").exists()

    def test_empty_grid_exit_4(self, tmp_path):
        cases = [{"name": "empty",
                  "null": {"family": "uniform", "params": [0, 1]},
                  "alternative": {"family": "beta", "params": [1, None]},
                  "grid": [], "n": 50}]
        code = main(["power", "--spec", str(self._spec(tmp_path, cases)),
                     "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_plots_written(self, tmp_path):
        cases = [
            {"name": "one",
             "null": {"family": "uniform", "params": [0, 1]},
             "alternative": {"family": "beta", "params": [1, None]},
             "grid": [2.0], "n": 40},
            {"name": "two",
             "null": {"family": "uniform", "params": [0, 1]},
             "alternative": {"family": "linear", "params": [None]},
             "grid": [1.0], "n": 40},
        ]
        code = main(["power", "--spec", str(self._spec(tmp_path, cases)),
                     "--out", str(tmp_path), "--plots", "--threads", "1"])
        assert code == 0
        assert (tmp_path / "power_one.svg").exists()
        assert (tmp_path / "power_two.svg").exists()


class TestCmdDemo:
    def test_demo_outputs(self, tmp_path, capsys):
        code = main(["demo", "--obs", "60", "--groups", "5", "--reps", "80",
                     "--seed", "4", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "demo_minima.csv").exists()
        assert (tmp_path / "demo_curve.csv").exists()
        out = capsys.readouterr().out
        assert "raw min-p mean" in out

    def test_bad_groups_exit_4(self, tmp_path):
        assert main(["demo", "--groups", "1", "--reps", "10",
                     "--out", str(tmp_path)]) == EXIT_CONFIG
