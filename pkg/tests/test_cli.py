import csv
import io
import json
import os
import subprocess
import sys
import textwrap
from pathlib import Path

import pytest

from chebmin import cli
from chebmin.bench import CSV_COLUMNS
from chebmin.errors import PlanInfeasible

SRC = str(Path(cli.__file__).resolve().parents[1])


def _main(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _rows(path: Path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


PLAN_ARGS = ["plan", "--n", 1, "--m", 3, "--lam", 1, "--eps", 0.1, "--A1", 2, "--A2", 2,
             "--delta", 0.5, "--alpha", 0.05]


class TestPlan:
    def test_example(self, capsys):
        code, out, _ = _main(PLAN_ARGS, capsys)
        assert code == cli.EXIT_OK
        d = json.loads(out)
        assert d["d_formula"] == 46
        assert d["d"] == 69
        assert d["beta"] == pytest.approx(0.7924812503605781)

    def test_writes_file(self, tmp_path, capsys):
        target = tmp_path / "plan.json"
        code, out, _ = _main(PLAN_ARGS + ["--out", target], capsys)
        assert code == 0 and json.loads(target.read_text()) == json.loads(out)

    def test_clamp_warning(self, capsys):
        code, out, err = _main(["plan", "--n", 1, "--eps", 0.9, "--A1", 0.01, "--A2", 0.01],
                               capsys)
        assert code == 0 and json.loads(out)["d"] == 2
        assert "raised to 2" in err

    def test_constants_from_kappa(self, capsys):
        code, out, _ = _main(["plan", "--n", 1, "--eps", 0.5, "--kappa", 1, "--C-nm", 1],
                             capsys)
        assert code == 0 and json.loads(out)["A1"] == pytest.approx(8.0908, abs=1e-3)

    def test_infeasible(self, capsys, monkeypatch):
        def boom(*a, **k):
            raise PlanInfeasible("sample inequality violated: 1 < 2", "samples")
        monkeypatch.setattr(cli.planner, "plan", boom)
        code, _, err = _main(PLAN_ARGS, capsys)
        assert code == cli.EXIT_PLAN and "samples" in err

    def test_missing_constants(self, capsys):
        code, _, err = _main(["plan", "--n", 2], capsys)
        assert code == cli.EXIT_USAGE and "A1" in err

    def test_missing_dimension(self, capsys):
        assert _main(["plan", "--A1", 1, "--A2", 1], capsys)[0] == cli.EXIT_USAGE


class TestConfigErrors:
    def test_malformed_json(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"eps": 0.1,\n "A1": }')
        code, _, err = _main(["plan", "--config", cfg, "--n", 1], capsys)
        assert code == cli.EXIT_USAGE
        assert "c.json:2:" in err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"epsilon": 0.1}')
        code, _, err = _main(["plan", "--config", cfg, "--n", 1], capsys)
        assert code == cli.EXIT_USAGE and "epsilon" in err

    @pytest.mark.parametrize("body", ['{"eps": -1}', '{"alpha": 1.5}', '{"seed": 1.5}',
                                      '{"polish": "yes"}', '{"domain": [[1, 0]]}', "[1, 2]"])
    def test_invalid_values(self, tmp_path, capsys, body):
        cfg = tmp_path / "c.json"
        cfg.write_text(body)
        code, _, _ = _main(["run", "--config", cfg, "--benchmark", "deuflhard2d"], capsys)
        assert code == cli.EXIT_USAGE

    def test_unknown_flag(self, capsys):
        assert _main(["plan", "--bogus"], capsys)[0] == cli.EXIT_USAGE

    def test_no_subcommand(self, capsys):
        assert _main([], capsys)[0] == cli.EXIT_USAGE

    def test_unknown_benchmark(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--benchmark", "nope", "--degree", 4, "--out", tmp_path], capsys)
        assert code == cli.EXIT_USAGE

    def test_two_sources(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--benchmark", "deuflhard2d", "--expression", "x1",
                            "--degree", 2, "--out", tmp_path], capsys)
        assert code == cli.EXIT_USAGE

    def test_unknown_suite(self, capsys):
        assert _main(["bench", "nope"], capsys)[0] == cli.EXIT_USAGE

    def test_bad_degrees(self, capsys):
        assert _main(["bench", "deuflhard2d", "--degrees", "a,b"], capsys)[0] == cli.EXIT_USAGE


class TestRun:
    def test_deuflhard(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--benchmark", "deuflhard2d", "--degree", 18, "--polish",
                            "--out", tmp_path], capsys)
        assert code == 0
        rows = _rows(tmp_path / "minimizers.csv")
        assert len(rows) >= 6
        assert all(float(r["polish_grad_inf"]) <= 1e-6 for r in rows)
        cap = _rows(tmp_path / "capture.csv")
        assert int(cap[0]["captured"]) == 6 and int(cap[0]["total"]) == 6
        doc = json.loads((tmp_path / "result.json").read_text())
        assert doc["status"] == "Complete"
        assert doc["config"]["degree"] == 18
        assert "out" not in doc["config"]

    def test_dejong_capture_table(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--benchmark", "dejong5", "--degree", 20, "--out", tmp_path],
                           capsys)
        assert code == 0
        cap = _rows(tmp_path / "capture.csv")[0]
        assert int(cap["total"]) == 25 and float(cap["threshold"]) == 0.5
        assert int(cap["captured"]) == 25

    def test_zero_oracle(self, tmp_path, capsys):
        code, _, err = _main(["run", "--expression", "0*x1", "--dim", 2, "--degree", 4,
                              "--out", tmp_path], capsys)
        assert code == cli.EXIT_NONFINITE and "FailNonFinite" in err
        assert (tmp_path / "result.json").exists()

    def test_zero_oracle_adaptive(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--expression", "0*x1", "--dim", 2, "--mode", "adaptive",
                            "--eps", 0.01, "--out", tmp_path], capsys)
        assert code == cli.EXIT_NONFINITE

    def test_budget(self, tmp_path, capsys):
        code, _, err = _main(["run", "--benchmark", "holder_table2", "--degree", 12,
                              "--budget", 2, "--out", tmp_path], capsys)
        assert code == cli.EXIT_BUDGET and "BudgetExceeded" in err

    def test_round_limit(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--benchmark", "holder_table2", "--mode", "adaptive",
                            "--tol", 1e-9, "--eps", 0.01, "--out", tmp_path], capsys)
        assert code == cli.EXIT_BUDGET

    def test_planned_run(self, tmp_path, capsys):
        code, _, _ = _main(["run", "--expression", "(x1-0.2)**2 + (x2+0.1)**2", "--dim", 2,
                            "--eps", 0.5, "--A1", 1e-3, "--A2", 1e-3, "--samples", 400,
                            "--out", tmp_path], capsys)
        assert code == 0
        doc = json.loads((tmp_path / "result.json").read_text())
        assert doc["plan"]["forced"] is False
        assert doc["minimizers"] == [pytest.approx([0.2, -0.1], abs=1e-8)]

    def test_byte_identical_reruns(self, tmp_path, capsys):
        outs = []
        for name in ("a", "b"):
            target = tmp_path / name
            args = ["run", "--benchmark", "trefethen", "--degree", 10, "--sampling", "iid",
                    "--seed", 5, "--out", target]
            assert _main(args, capsys)[0] == 0
            outs.append({f: (target / f).read_bytes()
                         for f in ("result.json", "minimizers.csv", "capture.csv")})
        assert outs[0] == outs[1]

    def test_atomic_outputs(self, tmp_path, capsys):
        _main(["run", "--benchmark", "deuflhard2d", "--degree", 8, "--out", tmp_path], capsys)
        assert not [p for p in os.listdir(tmp_path) if p.startswith(".")]

    def test_atomic_write_keeps_old_file_on_failure(self, tmp_path, monkeypatch):
        target = tmp_path / "x.txt"
        target.write_text("old")

        def fail(*a, **k):
            raise OSError("disk full")
        monkeypatch.setattr(cli.os, "replace", fail)
        with pytest.raises(OSError):
            cli.atomic_write(target, "new")
        assert target.read_text() == "old"
        assert os.listdir(tmp_path) == ["x.txt"]

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"benchmark": "deuflhard2d", "degree": 8,
                                   "out": str(tmp_path / "o")}))
        assert _main(["run", "--config", cfg, "--degree", 10], capsys)[0] == 0
        doc = json.loads((tmp_path / "o" / "result.json").read_text())
        assert doc["plan"]["d"] == 10

    def test_subprocess_oracle(self, tmp_path, capsys):
        child = tmp_path / "child.py"
        child.write_text(textwrap.dedent("""
            import sys
            for line in sys.stdin:
                x, y, eta = map(float, line.split())
                print((x - 1.0) ** 2 + (y - 2.0) ** 2, flush=True)
        """))
        cmd = f"{sys.executable} {child}"
        code, _, _ = _main(["run", "--command", cmd, "--domain", "[[0, 2], [0, 4]]",
                            "--degree", 2, "--out", tmp_path / "o"], capsys)
        assert code == 0
        rows = _rows(tmp_path / "o" / "minimizers.csv")
        assert len(rows) == 1
        assert float(rows[0]["x1"]) == pytest.approx(1.0, abs=1e-8)
        assert float(rows[0]["x2"]) == pytest.approx(2.0, abs=1e-8)


class TestBench:
    def test_deuflhard(self, tmp_path, capsys):
        target = tmp_path / "t.csv"
        code, out, _ = _main(["bench", "deuflhard2d", "--degrees", "8,18", "--out", target],
                             capsys)
        assert code == 0 and out == target.read_text()
        rows = list(csv.DictReader(io.StringIO(out)))
        assert tuple(rows[0].keys()) == CSV_COLUMNS
        assert [int(r["degree"]) for r in rows] == [8, 18]
        assert int(rows[1]["captured"]) == 6

    def test_module_entry_point(self):
        env = dict(os.environ, PYTHONPATH=SRC)
        r = subprocess.run([sys.executable, "-m", "chebmin"] + [str(a) for a in PLAN_ARGS],
                           capture_output=True, text=True, env=env, timeout=120)
        assert r.returncode == 0 and json.loads(r.stdout)["d"] == 69
        r = subprocess.run([sys.executable, "-m", "chebmin", "plan", "--nope"],
                           capture_output=True, text=True, env=env, timeout=120)
        assert r.returncode == 64
