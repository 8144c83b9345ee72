"""Subcommands, output formats and exit codes."""

import csv
import io
import json
import math

import pytest

from salvo_consensus.cli import CSV_COLUMNS, main, run
from salvo_consensus.engagement import initial_states, time_to_go

SMALL = """\
name: pair
graph:
  n: 2
  edges:
    - [1, 2, 1.0, 2.0]
interceptors:
  - {r0_m: 3000, theta0_deg: 0, gammaM0_deg: 5, V_M_mps: 500}
  - {r0_m: 3500, theta0_deg: 10, gammaM0_deg: 0, V_M_mps: 500}
target: {V_T_mps: 300, gammaT_deg: 90}
engagement: {dt_s: 0.002}
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "pair.scenario"
    path.write_text(SMALL)
    return str(path)


class TestPredict:
    def test_text(self):
        code, out = run(["predict", "cycle_table1"])
        assert code == 0
        assert "t_go(0) [s]: 33.3333 22.2" in out
        assert out.count("p (") == 3
        assert "consensus value [s]:" in out

    def test_json_routes_agree(self):
        code, out = run(["predict", "star_table4", "--json"])
        doc = json.loads(out)
        assert code == 0 and len(doc["null_vectors"]) == 3
        ref = doc["null_vectors"]["generic-nullspace"]
        for p in doc["null_vectors"].values():
            assert p == pytest.approx(ref, rel=1e-8)
        num = sum(a * b for a, b in zip(ref, doc["t_go0_s"]))
        assert doc["consensus_value_s"] == pytest.approx(num / sum(ref), rel=1e-12)

    def test_override_changes_prediction(self):
        base = json.loads(run(["predict", "cycle_table1", "--json"])[1])["consensus_value_s"]
        moved = json.loads(run(["predict", "cycle_table1", "--json", "--override", "w:1:2:ij=-1"])[1])
        assert moved["consensus_value_s"] != base


class TestMargin:
    def test_report_fields(self):
        code, out = run(["margin", "cycle_table1", "--edge", "1", "2", "--direction", "ij"])
        assert code == 0
        for key in ("phase crossovers", "|M(j w_pc)|", "effective gain margin", "minimum admissible weight"):
            assert key in out
        assert "w_12 = 7" in out

    def test_direction_swaps_weight(self):
        _, out = run(["margin", "cycle_table1", "--edge", "1", "2", "--direction", "ji"])
        assert "e_21 (w_21 = 0.3)" in out

    def test_unit_cycle_value(self, tmp_path):
        text = SMALL.replace("n: 2", "n: 5").replace(
            "    - [1, 2, 1.0, 2.0]\n",
            "".join(f"    - [{a}, {b}, 1, 1]\n" for a, b in [(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)]),
        ).replace(
            "interceptors:\n",
            "interceptors:\n" + "  - {r0_m: 3000, theta0_deg: 0, gammaM0_deg: 0, V_M_mps: 500}\n" * 3,
        )
        path = tmp_path / "unit.scenario"
        path.write_text(text)
        code, out = run(["margin", str(path), "--edge", "1", "2"])
        assert code == 0
        assert "effective gain margin: 2.500000" in out
        assert "minimum admissible weight: -1.500000" in out

    def test_unknown_edge_is_input_error(self):
        assert run(["margin", "cycle_table1", "--edge", "1", "3"])[0] == 2

    def test_unstable_nominal_is_analysis_failure(self):
        code, out = run(["margin", "cycle_table1_neg", "--edge", "2", "3", "--override", "w:1:2:ij=-12"])
        assert code == 1 and "not stable" in out


class TestNyquist:
    def test_csv(self):
        code, out = run(["nyquist", "cycle_table1", "--edge", "1", "2", "--points", "5", "--include-zero"])
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and rows[0] == ["omega", "re", "im"] and len(rows) == 7
        assert float(rows[1][0]) == 0.0 and float(rows[1][2]) == 0.0 and float(rows[1][1]) < 0

    def test_to_file(self, tmp_path):
        path = tmp_path / "ny.csv"
        code, out = run(["nyquist", "star_table4", "--edge", "1", "5", "--output", str(path)])
        assert code == 0 and out == ""
        assert len(path.read_text().splitlines()) == 401

    def test_bad_grid(self):
        assert run(["nyquist", "cycle_table1", "--edge", "1", "2", "--omega-min", "0"])[0] == 2


class TestSimulate:
    def test_summary_and_csv(self, small, tmp_path):
        path = tmp_path / "run.csv"
        code, out = run(["simulate", small, "--output", str(path), "--stride", "50"])
        assert code == 0
        assert "status: intercepted" in out and "salvo success: yes" in out
        assert "saturation count:" in out and "spread [s]:" in out
        rows = list(csv.DictReader(path.open()))
        assert list(rows[0].keys()) == CSV_COLUMNS
        assert {r["i"] for r in rows} == {"1", "2"}
        assert float(rows[0]["r"]) == 3000.0

    def test_byte_identical_reruns(self, small, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["simulate", small, "--output", str(a), "--stride", "25"])
        run(["simulate", small, "--output", str(b), "--stride", "25"])
        assert a.read_bytes() == b.read_bytes()

    def test_initial_time_to_go_column(self, small, tmp_path):
        from salvo_consensus.scenario import load_scenario

        path = tmp_path / "run.csv"
        run(["simulate", small, "--output", str(path), "--stride", "100000"])
        first = [r for r in csv.DictReader(path.open()) if float(r["t"]) == 0.0]
        states, tgt = initial_states(load_scenario(small))
        for row, s in zip(first, states):
            assert float(row["t_go"]) == pytest.approx(time_to_go(s, tgt), rel=1e-8)

    def test_overshoot_override_diverges(self, capsys):
        code, out = run(["simulate", "cycle_table1", "--override", "w:1:2:ij=-12", "--stride", "1000"])
        assert code == 1
        assert "status: diverged" in out
        assert "SalvoDivergedError" in out

    def test_csv_to_stdout_moves_summary_to_stderr(self, small, capsys):
        code, out = run(["simulate", small, "--output", "-", "--stride", "500"])
        assert code == 0 and out.startswith(",".join(CSV_COLUMNS))
        assert "status: intercepted" in capsys.readouterr().err

    def test_bad_dt(self, small):
        assert run(["simulate", small, "--dt", "-1"])[0] == 2


class TestCheck:
    @pytest.mark.parametrize("name", ["cycle_table1", "star_table4"])
    def test_all_pass(self, name):
        code, out = run(["check", name])
        lines = [l for l in out.splitlines() if l.startswith("[")]
        assert code == 0
        assert len(lines) == 9 and all(l.startswith("[PASS]") for l in lines)
        assert "9/9 checks passed" in out

    def test_failure_exit(self):
        code, out = run(["check", "cycle_table1", "--override", "w:1:2:ij=-12"])
        assert code == 1 and "[FAIL] nominal protocol stable" in out


class TestInputErrors:
    def test_missing_scenario(self):
        assert run(["predict", "no_such_thing"])[0] == 2

    def test_invalid_scenario(self, tmp_path):
        path = tmp_path / "bad.scenario"
        path.write_text(SMALL.replace("V_T_mps: 300", "V_T_mps: 600"))
        assert run(["predict", str(path)])[0] == 2

    def test_bad_override(self):
        assert run(["predict", "cycle_table1", "--override", "w:1:2=3"])[0] == 2
        assert run(["predict", "cycle_table1", "--override", "w:1:3:ij=3"])[0] == 2

    def test_bad_subcommand(self):
        assert main(["fly", "cycle_table1"]) == 2

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "salvo-consensus" in capsys.readouterr().out


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "salvo_consensus", "predict", "cycle_table1", "--json"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert math.isfinite(json.loads(res.stdout)["consensus_value_s"])
