"""End-to-end command line flows in a temp directory."""

import json

import pytest

from netopt.cli import main
from netopt.trace import RunTrace


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def coop_file(tmp_path):
    path = tmp_path / "coop.json"
    rc = run_cli(
        "generate", "coop", "--seed", "2", "--agents", "4", "--rho", "4.0",
        "--out", str(path),
    )
    assert rc == 0
    return path


class TestGenerate:
    def test_writes_loadable_problem(self, coop_file, capsys):
        from netopt.serialize import load_problem

        problem = load_problem(coop_file)
        assert problem.n_agents == 4

    def test_fingerprint_printed(self, tmp_path, capsys):
        out = tmp_path / "m.json"
        run_cli("generate", "mhe", "--agents", "3", "--horizon", "3",
                "--meas-dim", "2", "--out", str(out))
        assert "fingerprint" in capsys.readouterr().out

    def test_bad_family_exits_nonzero(self, tmp_path):
        with pytest.raises(SystemExit):
            run_cli("generate", "sudoku", "--out", str(tmp_path / "x.json"))


class TestOracle:
    def test_solves_and_writes_json(self, coop_file, tmp_path, capsys):
        out = tmp_path / "sol.json"
        rc = run_cli("oracle", "--problem", str(coop_file), "--out", str(out))
        assert rc == 0
        assert "objective" in capsys.readouterr().out
        payload = json.loads(out.read_text())
        assert payload["status"] == "optimal"
        assert len(payload["blocks"]) == 4

    def test_missing_file_is_an_error(self, tmp_path, capsys):
        rc = run_cli("oracle", "--problem", str(tmp_path / "nope.json"))
        assert rc == 2
        assert "error:" in capsys.readouterr().err


class TestRun:
    def test_full_run_with_artifacts(self, coop_file, tmp_path, capsys):
        trace_p = tmp_path / "t.csv"
        summary_p = tmp_path / "s.json"
        rc = run_cli(
            "run", "gauss_seidel", "--problem", str(coop_file),
            "--eps", "1e-6", "--trace", str(trace_p), "--summary", str(summary_p),
        )
        assert rc == 0
        assert "Converged" in capsys.readouterr().out
        trace = RunTrace.load(trace_p)
        assert len(trace.rows) >= 1
        summary = json.loads(summary_p.read_text())
        assert summary["oracle_ok"] is True

    def test_incompatible_algorithm_errors(self, coop_file, capsys):
        rc = run_cli("run", "dgp1", "--problem", str(coop_file))
        assert rc == 2
        assert "cannot run" in capsys.readouterr().err

    def test_dcx_run_with_named_graph(self, tmp_path, capsys):
        prob = tmp_path / "m.json"
        run_cli("generate", "mhe", "--seed", "3", "--agents", "3", "--horizon", "2",
                "--meas-dim", "2", "--out", str(prob))
        rc = run_cli(
            "run", "dgp2", "--problem", str(prob), "--graph", "complete",
            "--stop", "oracle", "--eps", "1e-2", "--max-iter", "20000",
        )
        assert rc == 0
        assert "Converged" in capsys.readouterr().out


class TestCompare:
    def test_ranks_two_summaries(self, coop_file, tmp_path, capsys):
        paths = []
        for alg in ("jacobi", "gauss_seidel"):
            s = tmp_path / f"{alg}.json"
            run_cli("run", alg, "--problem", str(coop_file), "--eps", "1e-6",
                    "--summary", str(s))
            paths.append(str(s))
        capsys.readouterr()
        rc = run_cli("compare", *paths, "--expected", "gauss_seidel,jacobi")
        out = capsys.readouterr().out
        assert rc == 0
        assert "by iterations:" in out
        assert "gauss_seidel" in out

    def test_single_summary_rejected(self, coop_file, tmp_path, capsys):
        s = tmp_path / "one.json"
        run_cli("run", "jacobi", "--problem", str(coop_file), "--eps", "1e-4",
                "--summary", str(s))
        rc = run_cli("compare", str(s))
        assert rc == 2
        assert "at least two" in capsys.readouterr().err


class TestBench:
    def test_invalid_table_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            run_cli("bench", "7")
