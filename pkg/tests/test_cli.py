import json
import math
import os

import pytest

from hypermatch.cli import main
from hypermatch.hypergraph import gen_complete, read_hypergraph, write_hypergraph


@pytest.fixture()
def k6_path(tmp_path):
    path = tmp_path / "k6.khg"
    write_hypergraph(gen_complete(6, 3), str(path))
    return str(path)


def run(args):
    return main(args)


class TestSubcommands:
    def test_gen_complete_and_reload(self, tmp_path):
        out = tmp_path / "g"
        assert run(["gen", "--n", "6", "--k", "3", "--complete", "--out", str(out)]) == 0
        G = read_hypergraph(str(out / "graph.khg"))
        assert G.num_edges == 20
        report = json.loads((out / "gen_report.json").read_text())
        assert report["graph_digest"] == G.digest()
        assert "config_digest" in report["_provenance"]

    def test_gen_random_requires_seed(self, tmp_path):
        code = run(["gen", "--n", "9", "--k", "3", "--density", "0.9", "--d", "2",
                    "--gamma", "0.2", "--out", str(tmp_path)])
        assert code == 1

    def test_count_k6(self, k6_path, tmp_path, capsys):
        assert run(["count", "--graph", k6_path, "--out", str(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out.strip().splitlines()[-1]) == {"value": "10"}
        payload = json.loads((tmp_path / "count.json").read_text())
        assert payload["value"] == "10"

    def test_count_with_entropy_comparison(self, k6_path, tmp_path):
        assert run(["count", "--graph", k6_path, "--d", "2", "--gamma", "0.3",
                    "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "count.json").read_text())["entropy_comparison"]
        for field in ("n", "k", "d", "gamma", "ln_phi", "h_solver", "residual",
                      "residual_per_n", "s_count_check"):
            assert field in report
        assert report["residual_per_n"] == pytest.approx(0.28290, abs=1e-4)

    def test_entropy_k6(self, k6_path, tmp_path):
        assert run(["entropy", "--graph", k6_path, "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "entropy_report.json").read_text())
        assert report["converged"]
        assert report["entropy"] == pytest.approx(2 * math.log(10), abs=1e-8)
        assert (tmp_path / "weights.wts").exists()

    def test_degrees_profile(self, k6_path, tmp_path):
        assert run(["degrees", "--graph", k6_path, "--out", str(tmp_path),
                    "--d", "1", "--gamma", "0.1"]) == 0
        report = json.loads((tmp_path / "degrees.json").read_text())
        assert report["min_degrees"] == [20, 10, 4]
        assert report["profile_nonincreasing"] and report["dirac"]

    def test_marginals(self, k6_path, tmp_path):
        assert run(["marginals", "--graph", k6_path, "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "marginals_report.json").read_text())
        assert report["marginal_inequality_ok"] and report["solver_dominance_ok"]

    def test_greedy_writes_trajectories(self, k6_path, tmp_path):
        assert run(["greedy", "--graph", k6_path, "--seed", "3", "--trials", "2",
                    "--out", str(tmp_path)]) == 0
        assert (tmp_path / "trajectory_0000.csv").exists()
        assert (tmp_path / "trajectory_0001.meta.json").exists()
        report = json.loads((tmp_path / "greedy_report.json").read_text())
        assert report["trials"] == 2

    def test_greedy_jobs_match_serial(self, k6_path, tmp_path):
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        assert run(["greedy", "--graph", k6_path, "--seed", "3", "--trials", "3",
                    "--out", str(serial)]) == 0
        assert run(["greedy", "--graph", k6_path, "--seed", "3", "--trials", "3",
                    "--jobs", "2", "--out", str(parallel)]) == 0
        for name in sorted(os.listdir(serial)):
            assert (serial / name).read_bytes() == (parallel / name).read_bytes()

    def test_anneal_auto(self, k6_path, tmp_path):
        code = run(["anneal", "--graph", k6_path, "--seed", "4", "--d", "1",
                    "--gamma", "0.5", "--epsilon", "0.9", "--trials", "400",
                    "--auto", "--out", str(tmp_path)])
        assert code == 0
        report = json.loads((tmp_path / "anneal_report.json").read_text())
        assert report["termination"] in ("no-high-weight-edge", "search-exhausted")
        assert (tmp_path / "anneal_trace.csv").exists()

    def test_bound_k6(self, k6_path, tmp_path):
        assert run(["bound", "--graph", k6_path, "--d", "2", "--gamma", "0.3",
                    "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "bound_report.json").read_text())
        cert = report["certificate"]
        assert cert["bound"] == pytest.approx(2 * math.log(10), abs=1e-9)
        assert cert["solver_clears_bound"] and cert["pullback_clears_bound"]
        assert cert["lemma_check"]
        assert report["matching_count_bound"]["p"] == pytest.approx(1.0)


class TestErrors:
    def test_unknown_flag_emits_json(self, capsys):
        assert run(["count", "--bogus", "x"]) == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "usage"

    def test_missing_file(self, tmp_path, capsys):
        assert run(["count", "--graph", str(tmp_path / "absent.khg")]) == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "missing-file"

    def test_parse_error_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.khg"
        bad.write_text("3 6\n0 1\n")
        assert run(["count", "--graph", str(bad)]) == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "ParseError" and ":2:" in err["message"]

    def test_unknown_suite(self, capsys):
        assert run(["verify", "--suite", "bogus"]) == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "InvalidArgumentError"

    def test_bad_tolerance_rejected(self, tmp_path, capsys):
        bad = tmp_path / "k4.khg"
        write_hypergraph(gen_complete(4, 2), str(bad))
        assert run(["entropy", "--graph", str(bad), "--tol", "-1", "--out",
                    str(tmp_path)]) == 1
