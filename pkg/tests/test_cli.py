"""Command line: outputs, formats, exit codes and seeding."""

from fractions import Fraction as F

import pytest

from core import cli
from core.montecarlo import SimEstimate
from core.report import ScenarioReport, read_csv_rows


@pytest.fixture
def paths(fixture_dir):
    def p(name):
        return str(fixture_dir / name)
    return p


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCheck:
    def test_overlap(self, capsys, paths):
        code, out, _ = run(capsys, "check", paths("overlap_graph.json"), paths("overlap_attack.json"))
        assert code == cli.EXIT_OK
        rows = {r["item"]: r for r in read_csv_rows(out)}
        assert rows["profitable"]["value"] == "true"
        assert rows["profitable"]["lhs_exact"] == "4"
        assert rows["profitable"]["rhs_exact"] == "7/2"
        assert rows["feasible[s1]"]["rhs_exact"] == "7/3"
        assert rows["stable"]["value"] == "true"

    def test_infeasible_attack_is_reported_not_raised(self, capsys, paths):
        code, out, _ = run(capsys, "check", paths("overlap_graph.json"), paths("overlap_attack_short.json"))
        assert code == cli.EXIT_OK
        rows = {r["item"]: r for r in read_csv_rows(out)}
        assert rows["feasible"]["value"] == "false"
        assert rows["stable"]["value"] == ""

    def test_unprofitable(self, capsys, paths):
        code, out, _ = run(capsys, "check", paths("unprofitable_graph.json"),
                           paths("single_service_attack.json"))
        assert code == cli.EXIT_OK
        rows = {r["item"]: r for r in read_csv_rows(out)}
        assert rows["profitable"]["value"] == "false"


class TestSlash:
    @pytest.mark.parametrize("mechanism, expected", [
        ("marginal", {"v1": "5/6", "v2": "4/3", "v3": "1/4"}),
        ("max", {"v1": "14/15", "v2": "7/5", "v3": "7/20"}),
        ("additive", {"v1": "5/6", "v2": "3/2", "v3": "1/4"}),
    ])
    def test_exact_columns(self, capsys, paths, mechanism, expected):
        code, out, _ = run(capsys, "slash", paths("overlap_graph.json"), paths("overlap_attack.json"),
                           "--mechanism", mechanism)
        assert code == cli.EXIT_OK
        assert {r["operator_id"]: r["psi_exact"] for r in read_csv_rows(out)} == expected
        assert out.startswith("# total=")

    def test_minimal_single_service(self, capsys, paths):
        code, out, _ = run(capsys, "slash", paths("overlap_graph.json"), paths("overlap_attack_s2.json"),
                           "--mechanism", "minimal")
        assert code == cli.EXIT_OK
        rows = {r["operator_id"]: r for r in read_csv_rows(out)}
        assert rows["v2"]["psi_exact"] == "9/20"
        assert rows["v3"]["factor_exact"] == "3/10"
        assert "lp_optimum=0.75" in out

    def test_json_is_lossless(self, capsys, paths):
        code, out, _ = run(capsys, "--format", "json", "slash", paths("overlap_graph.json"),
                           paths("overlap_attack.json"), "--mechanism", "max")
        assert code == cli.EXIT_OK
        rep = ScenarioReport.from_json(out)
        assert {r["operator_id"]: r["psi"] for r in rep.rows}["v2"] == F(7, 5)

    def test_format_after_subcommand(self, capsys, paths):
        code, out, _ = run(capsys, "slash", paths("overlap_graph.json"), paths("overlap_attack.json"),
                           "--format", "table")
        assert code == cli.EXIT_OK
        assert out.startswith("slash: overlap_graph+overlap_attack")
        assert "0.833" in out

    def test_infeasible_attack_exits_2(self, capsys, paths):
        code, out, err = run(capsys, "slash", paths("overlap_graph.json"),
                             paths("overlap_attack_short.json"), "--mechanism", "max")
        assert code == cli.EXIT_PRECONDITION
        assert out == ""
        assert "error[infeasible-attack]" in err

    def test_missing_file_exits_2(self, capsys, paths, tmp_path):
        code, _, err = run(capsys, "slash", str(tmp_path / "nope.json"), paths("overlap_attack.json"))
        assert code == cli.EXIT_PRECONDITION
        assert "error[io-error]" in err

    def test_parse_error_exits_2(self, capsys, paths, tmp_path):
        bad = tmp_path / "g.json"
        bad.write_text("{ nope")
        code, _, err = run(capsys, "check", str(bad), paths("overlap_attack.json"))
        assert code == cli.EXIT_PRECONDITION
        assert "error[parse-error]" in err

    def test_unknown_mechanism_is_usage(self, paths):
        with pytest.raises(SystemExit) as exc:
            cli.main(["slash", paths("overlap_graph.json"), paths("overlap_attack.json"),
                      "--mechanism", "quadratic"])
        assert exc.value.code == cli.EXIT_USAGE


class TestBestResponse:
    def test_full_participation(self, capsys, paths):
        code, out, _ = run(capsys, "best-response", paths("overlap_graph.json"),
                           paths("overlap_attack.json"), "v2")
        assert code == cli.EXIT_OK
        (row,) = read_csv_rows(out)
        assert float(row["x_star"]) == pytest.approx(1.5)
        assert row["regime"] == "full"

    def test_sweep(self, capsys, paths):
        code, out, _ = run(capsys, "best-response", paths("overlap_graph.json"),
                           paths("overlap_attack.json"), "v1", "--sharing", "pooled", "--sweep", "11")
        assert code == cli.EXIT_OK
        rows = read_csv_rows(out)
        assert len(rows) == 11
        assert float(rows[-1]["utility"]) == pytest.approx(4 / 3.5 - 14 / 15)

    def test_unknown_operator_exits_2(self, capsys, paths):
        code, _, err = run(capsys, "best-response", paths("overlap_graph.json"),
                           paths("overlap_attack.json"), "v0")
        assert code == cli.EXIT_PRECONDITION
        assert "error[unknown-operator]" in err


class TestEnumerate:
    def test_rows_are_profitable(self, capsys, paths):
        code, out, _ = run(capsys, "enumerate", paths("overlap_graph.json"), "--max-services", "2")
        assert code == cli.EXIT_OK
        rows = read_csv_rows(out)
        assert rows
        assert all(float(r["profit"]) > float(r["stake"]) for r in rows)
        assert any(r["services"] == "s1 s2" and r["attackers"] == "v1 v2 v3" for r in rows)


class TestSbm:
    def test_single_point(self, capsys, paths):
        code, out, _ = run(capsys, "sbm", paths("sbm_two_block.json"), "--stake", "3", "--sybils", "2")
        assert code == cli.EXIT_OK
        (row,) = read_csv_rows(out)
        assert float(row["p"]) == pytest.approx(0.47576, abs=1e-4)
        assert float(row["p_prime"]) == pytest.approx(0.51626, abs=1e-4)
        assert row["k_star"] == "2"
        assert "# block 0: mu=18" in out

    def test_sweep(self, capsys, paths):
        code, out, _ = run(capsys, "sbm", paths("sbm_er.json"), "--sweep",
                           "--x-range", "50:60:3", "--k-range", "1:2")
        assert code == cli.EXIT_OK
        rows = read_csv_rows(out)
        assert len(rows) == 6
        assert all(r["er_dominated"] == "true" for r in rows if r["k"] == "2")

    def test_bad_range_is_usage(self, capsys, paths):
        code, _, _ = run(capsys, "sbm", paths("sbm_er.json"), "--sweep", "--x-range", "1:2")
        assert code == cli.EXIT_USAGE


class TestMonteCarlo:
    ARGS = ("--replications", "2000", "--stake", "3", "--sybils", "2")

    def test_deterministic_under_seed(self, capsys, paths):
        first = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS, "--seed", "7")
        second = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS, "--seed", "7")
        assert first[0] == cli.EXIT_OK
        assert first[1] == second[1]
        assert first[1].startswith("# seed=7 replications=2000")

    def test_seed_from_environment(self, capsys, paths, monkeypatch):
        explicit = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS, "--seed", "11")
        monkeypatch.setenv(cli.SEED_ENV, "11")
        from_env = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS)
        assert explicit[1] == from_env[1]

    def test_bad_seed_environment(self, capsys, paths, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV, "forty-two")
        code, _, _ = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS)
        assert code == cli.EXIT_USAGE

    def test_rows(self, capsys, paths):
        code, out, _ = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS)
        rows = read_csv_rows(out)
        names = [r["estimator"] for r in rows]
        assert names[:2] == ["clearance[b=0,y=3]", "clearance[b=1,y=3]"]
        assert "success[x=3,k=2]" in names
        assert names[-1] == "neighbors[b=1]"
        assert all(r["ok"] == "true" for r in rows)

    def test_far_estimate_exits_3(self, capsys, paths, monkeypatch):
        def off(config):
            return SimEstimate("success[rigged]", 0.9, 0.001, config.replications, 0.5, 0.5)
        monkeypatch.setattr(cli, "estimate_success", off)
        code, out, _ = run(capsys, "montecarlo", paths("sbm_two_block.json"), *self.ARGS)
        assert code == cli.EXIT_STATISTICAL
        assert any(r["ok"] == "false" for r in read_csv_rows(out))

    def test_tiny_runs_are_not_judged(self, capsys, paths, monkeypatch):
        def off(config):
            return SimEstimate("success[rigged]", 1.0, 0.0, config.replications, 0.5, 0.5)
        monkeypatch.setattr(cli, "estimate_success", off)
        code, _, _ = run(capsys, "montecarlo", paths("sbm_two_block.json"), "--replications", "1")
        assert code == cli.EXIT_OK


class TestPaperExamples:
    def test_all_pass(self, capsys):
        code, out, _ = run(capsys, "paper-examples")
        assert code == cli.EXIT_OK
        rows = read_csv_rows(out)
        assert all(r["pass"] == "true" for r in rows)

    def test_group_filter(self, capsys):
        code, out, _ = run(capsys, "paper-examples", "--only", "sbm")
        assert code == cli.EXIT_OK
        assert {r["group"] for r in read_csv_rows(out)} == {"sbm"}

    def test_zero_tolerance_fails(self, capsys):
        code, out, _ = run(capsys, "--tolerance", "0", "paper-examples", "--only", "marginal")
        assert code == cli.EXIT_CHECK_FAILED
        assert "false" in out

    def test_unknown_check_is_usage(self, capsys):
        code, _, err = run(capsys, "paper-examples", "--only", "bogus")
        assert code == cli.EXIT_USAGE
        assert "Unknown check" in err

    def test_table_shows_verdict(self, capsys):
        code, out, _ = run(capsys, "paper-examples", "--only", "simple", "--format", "table")
        assert code == cli.EXIT_OK
        assert out.rstrip().endswith("PASS")

    def test_old_name_still_dispatches(self, capsys):
        code, out, _ = run(capsys, "reference-checks", "--only", "simple")
        assert code == cli.EXIT_OK
        assert {r["group"] for r in read_csv_rows(out)} == {"simple"}
