import json

import pytest
from click.testing import CliRunner

from dcpoly.cli import main
from dcpoly.poly import Polynomial


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args, stdin=None):
    return runner.invoke(main, args, input=stdin, catch_exceptions=False)


QUADRATIC = Polynomial(3, {(2, 0, 0): 8, (0, 2, 0): -2, (0, 0, 2): -8}).to_json()


class TestDecomposeCommand:
    def test_feasibility_round_trip(self, runner):
        result = invoke(runner, ["decompose", "--objective", "feasibility",
                                 "--cone", "dsos"], stdin=QUADRATIC)
        assert result.exit_code == 0
        payload = json.loads(result.output)
        f = Polynomial.from_json_dict(payload["f"])
        g = Polynomial.from_json_dict(payload["g"])
        h = Polynomial.from_json_dict(payload["h"])
        assert g - h == f

    def test_lambda_max_point_value(self, runner):
        result = invoke(runner, ["decompose", "--objective", "lmax-point",
                                 "--cone", "sos", "--point", "0,0,0"],
                        stdin=QUADRATIC)
        assert result.exit_code == 0
        assert abs(json.loads(result.output)["objective_value"] - 16.0) <= 1e-4

    def test_malformed_json_exits_2_with_parse_error(self, runner):
        result = invoke(runner, ["decompose"], stdin="{oops")
        assert result.exit_code == 2
        assert json.loads(result.stderr)["error"] == "parse"

    def test_missing_point_is_usage_error(self, runner):
        result = invoke(runner, ["decompose", "--objective", "lmax-point"],
                        stdin=QUADRATIC)
        assert result.exit_code == 2

    def test_unknown_flag_exits_2(self, runner):
        result = runner.invoke(main, ["decompose", "--no-such-flag"])
        assert result.exit_code == 2

    def test_output_file(self, runner, tmp_path):
        out = tmp_path / "dec.json"
        result = invoke(runner, ["decompose", "--objective", "feasibility",
                                 "--out", str(out)], stdin=QUADRATIC)
        assert result.exit_code == 0
        assert json.loads(out.read_text())["objective"] == "feasibility"


class TestCheckConvexity:
    def test_convex_input_exit_zero(self, runner):
        p = Polynomial(2, {(2, 0): 1, (0, 2): 1}).to_json()
        result = invoke(runner, ["check-convexity", "--cone", "dsos"], stdin=p)
        assert result.exit_code == 0
        assert json.loads(result.output)["feasible"] is True

    def test_nonconvex_input_exit_one(self, runner):
        p = Polynomial(2, {(4, 0): 1, (2, 2): -6, (0, 4): 1}).to_json()
        result = invoke(runner, ["check-convexity", "--cone", "sos"], stdin=p)
        assert result.exit_code == 1
        assert json.loads(result.output)["feasible"] is False


class TestConstructInterior:
    def test_summary_output(self, runner):
        result = invoke(runner, ["construct-interior", "--n", "2", "--degree", "4"])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["identity_exact"] is True
        assert payload["dd_margin"] == "2"

    def test_odd_degree_rejected(self, runner):
        result = invoke(runner, ["construct-interior", "--n", "2", "--degree", "3"])
        assert result.exit_code == 2


class TestIntegrateSphere:
    def test_even_monomial(self, runner):
        result = invoke(runner, ["integrate-sphere", "--exp", "2,2,0"])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["exact"] == "4/15*pi"
        assert abs(payload["normalized"] - 1 / 15) <= 1e-12

    def test_odd_monomial_is_zero(self, runner):
        result = invoke(runner, ["integrate-sphere", "--exp", "1,0"])
        payload = json.loads(result.output)
        assert payload["value"] == 0.0


class TestGenInstance:
    def test_deterministic_output(self, runner):
        args = ["gen-instance", "--n", "2", "--degree", "4", "--seed", "3"]
        a = invoke(runner, args)
        b = invoke(runner, args)
        assert a.exit_code == 0 and a.output == b.output

    def test_round_trip_canonical(self, runner):
        result = invoke(runner, ["gen-instance", "--n", "2", "--degree", "4",
                                 "--seed", "1"])
        text = result.output.strip()
        assert Polynomial.from_json(text).to_json() == text


class TestMinimize:
    def test_seeded_run_writes_jsonl(self, runner, tmp_path):
        out = tmp_path / "trace.jsonl"
        result = invoke(runner, ["minimize", "--n", "1", "--degree", "4",
                                 "--seed", "2", "--radius", "4",
                                 "--budget-s", "20", "--out", str(out)])
        assert result.exit_code == 0
        lines = out.read_text().strip().split("\n")
        records = [json.loads(line) for line in lines]
        f0_values = [r["f0"] for r in records]
        assert all(b <= a + 1e-5 for a, b in zip(f0_values, f0_values[1:]))
        summary = json.loads(result.stderr)
        assert summary["iterations"] == len(records)

    def test_multi_ccp_algorithm(self, runner):
        result = invoke(runner, ["minimize", "--algorithm", "multi-ccp",
                                 "--n", "1", "--degree", "4", "--seed", "2",
                                 "--radius", "4", "--budget-s", "20"])
        assert result.exit_code == 0

    def test_requires_source(self, runner):
        result = invoke(runner, ["minimize"])
        assert result.exit_code == 2


class TestBenchDecomp:
    def test_small_sweep_csv(self, runner):
        result = invoke(runner, ["bench-decomp", "--n", "2", "--degree", "4",
                                 "--seeds", "0,1", "--cone", "dsos",
                                 "--cone", "sos"])
        assert result.exit_code == 0
        lines = result.output.strip().split("\n")
        header = lines[0].split(",")
        assert header == ["experiment", "n", "degree", "cone", "seed",
                          "time_ms", "objective_value", "status"]
        assert len(lines) == 5  # 1 header + 2 seeds x 2 cones

    def test_empty_seed_list(self, runner):
        result = invoke(runner, ["bench-decomp", "--n", "2", "--degree", "4",
                                 "--seeds", ""])
        assert result.exit_code == 0
        assert len(result.output.strip().split("\n")) == 1

    def test_determinism_modulo_wall_time(self, runner):
        args = ["bench-decomp", "--n", "2", "--degree", "4", "--seeds", "0",
                "--cone", "dsos", "--format", "json"]
        a = json.loads(invoke(runner, args).output)
        b = json.loads(invoke(runner, args).output)
        for rec in a["records"] + b["records"]:
            rec.pop("time_ms")
        for agg in a["aggregates"] + b["aggregates"]:
            agg.pop("mean_time_ms")
        assert a == b


class TestBenchCcp:
    def test_two_arm_run(self, runner):
        result = invoke(runner, ["bench-ccp", "--n", "1", "--degree", "4",
                                 "--seeds", "0", "--budget-s", "20",
                                 "--radius", "4", "--arm", "feasibility",
                                 "--arm", "multi", "--format", "json"])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert {rec["arm"] for rec in payload["records"]} == {"feasibility", "multi"}
        for rec in payload["records"]:
            assert rec["status"] == "ok"
            assert rec["iterations"] >= 1

    def test_seed_range_syntax(self, runner):
        result = invoke(runner, ["bench-ccp", "--n", "1", "--degree", "4",
                                 "--seeds", "0..1", "--budget-s", "20",
                                 "--radius", "4", "--arm", "feasibility"])
        assert result.exit_code == 0
        assert len(result.output.strip().split("\n")) == 3


class TestScanFamily:
    def test_small_grid(self, runner):
        result = invoke(runner, ["scan-family", "--a-min", "0", "--a-max", "0",
                                 "--b-min", "-1", "--b-max", "0", "--step", "1"])
        assert result.exit_code == 0
        lines = result.output.strip().split("\n")
        assert lines[0] == "a,b,c,level"
        levels = dict()
        for line in lines[1:]:
            a, b, c, level = line.split(",")
            levels[(a, b)] = level
        assert levels[("0", "0")] == "dsos"

    def test_degenerate_grid_header_only(self, runner):
        result = invoke(runner, ["scan-family", "--a-min", "1", "--a-max", "0",
                                 "--b-min", "1", "--b-max", "0", "--step", "1"])
        assert result.exit_code == 0
        assert result.output.strip() == "a,b,c,level"
