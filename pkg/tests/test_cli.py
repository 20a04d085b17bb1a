import json

import pytest

from syncha.cli import main
from oracles import parse_trace


def invoke(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheck:
    def test_passing_model(self, capsys, models_dir):
        code, out, err = invoke(capsys, "check", str(models_dir / "watertank.pha"))
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "tank: PASS"
        assert any(l.startswith("tank: warning: fairness required") for l in lines)
        assert "burner: PASS" in lines

    def test_failing_model(self, capsys, fixtures_dir):
        code, out, err = invoke(capsys, "check", str(fixtures_dir / "nonmono.pha"))
        assert code == 1
        assert "box: FAIL (1 violation)" in out
        assert "NON_MONOTONE" in err
        assert "changes sign inside the invariant bounds [0, 300]" in err

    def test_no_closed_form_model(self, capsys, fixtures_dir):
        code, out, err = invoke(capsys, "check", str(fixtures_dir / "squared.pha"))
        assert code == 1
        assert "NO_CLOSED_FORM" in err

    def test_syntax_error_reports_position(self, capsys, fixtures_dir):
        code, out, err = invoke(capsys, "check", str(fixtures_dir / "disjunct.pha"))
        assert code == 2
        assert "error: line" in err
        assert "disjunction is not supported" in err

    def test_missing_file(self, capsys, tmp_path):
        code, out, err = invoke(capsys, "check", str(tmp_path / "ghost.pha"))
        assert code == 2
        assert err.startswith("error:")

    def test_bad_delta_is_a_usage_error(self, capsys, models_dir):
        with pytest.raises(SystemExit) as exc_info:
            main(["check", str(models_dir / "watertank.pha"), "--delta", "zero"])
        assert exc_info.value.code == 2
        assert "invalid tick length" in capsys.readouterr().err

    def test_nonpositive_delta_rejected(self, capsys, models_dir):
        with pytest.raises(SystemExit) as exc_info:
            main(["check", str(models_dir / "watertank.pha"), "--delta", "0"])
        assert exc_info.value.code == 2


class TestSimulate:
    def test_requires_automaton_choice_on_multi_model(self, capsys, models_dir):
        code, out, err = invoke(
            capsys, "simulate", str(models_dir / "watertank.pha"), "--ticks", "3"
        )
        assert code == 2
        assert "pick one with --automaton" in err

    def test_unknown_automaton_name(self, capsys, models_dir):
        code, out, err = invoke(
            capsys,
            "simulate", str(models_dir / "watertank.pha"),
            "--automaton", "pump", "--ticks", "1",
        )
        assert code == 2
        assert "no automaton 'pump'" in err

    def test_trace_to_stdout(self, capsys, models_dir):
        code, out, err = invoke(
            capsys,
            "simulate", str(models_dir / "thermostat.pha"), "--ticks", "5",
        )
        assert code == 0
        header, rows = parse_trace(out)
        assert header == ["tick", "time", "location", "x", "inputs", "outputs"]
        assert len(rows) == 5
        assert rows[0].location == "cooling"

    def test_trace_to_file_with_stimulus(self, capsys, models_dir, fixtures_dir, tmp_path):
        out_path = tmp_path / "trace.csv"
        code, out, err = invoke(
            capsys,
            "simulate", str(models_dir / "watertank.pha"),
            "--automaton", "tank",
            "--ticks", "10",
            "--stimulus", str(fixtures_dir / "on_at_5.csv"),
            "--out", str(out_path),
        )
        assert code == 0
        assert out == ""
        _, rows = parse_trace(out_path.read_text())
        assert [r.location for r in rows] == ["t1"] * 6 + ["t2"] * 4
        assert rows[6].inputs == ("ON",)

    def test_unknown_stimulus_events_warn(self, capsys, models_dir, tmp_path):
        stim = tmp_path / "weird.csv"
        stim.write_text("tick,events\n1,WARP\n")
        code, out, err = invoke(
            capsys,
            "simulate", str(models_dir / "thermostat.pha"),
            "--ticks", "2", "--stimulus", str(stim),
        )
        assert code == 0
        assert "unknown events, ignored: WARP" in err

    def test_stuck_run_exits_3(self, capsys, fixtures_dir):
        code, out, err = invoke(
            capsys, "simulate", str(fixtures_dir / "stuckling.pha"), "--ticks", "10"
        )
        assert code == 3
        assert "stuck at tick 6" in err

    def test_failing_model_exits_1(self, capsys, fixtures_dir):
        code, out, err = invoke(
            capsys, "simulate", str(fixtures_dir / "nonmono.pha"), "--ticks", "1"
        )
        assert code == 1
        assert "NON_MONOTONE" in err

    def test_engine_flag(self, capsys, models_dir):
        traces = []
        for engine in ("generic", "compiled"):
            code, out, err = invoke(
                capsys,
                "simulate", str(models_dir / "thermostat.pha"),
                "--ticks", "50", "--engine", engine,
            )
            assert code == 0
            traces.append(out)
        assert traces[0] == traces[1]


class TestComposeAndSimulate:
    def test_product_trace(self, capsys, models_dir):
        code, out, err = invoke(
            capsys,
            "compose-and-simulate", str(models_dir / "watertank.pha"),
            "--ticks", "4",
        )
        assert code == 0
        header, rows = parse_trace(out)
        assert header == ["tick", "time", "location", "x", "c", "inputs", "outputs"]
        assert all(r.location == "t1b1" for r in rows)
        assert "warning: fairness required" in err

    def test_gate_follows_the_train(self, capsys, models_dir):
        code, out, err = invoke(
            capsys,
            "compose-and-simulate", str(models_dir / "traingate.pha"),
            "--ticks", "2200",
        )
        assert code == 0
        _, rows = parse_trace(out)
        assert rows[0].location == "farup"
        assert rows[2084].outputs == ("CLOSE",)
        assert rows[2085].location == "neardown"


class TestCompile:
    def test_writes_sources_and_ir(self, capsys, models_dir, tmp_path):
        code, out, err = invoke(
            capsys,
            "compile", str(models_dir / "watertank.pha"),
            "--automaton", "burner",
            "--out", str(tmp_path),
            "--ticks", "777",
            "--emit-ir",
        )
        assert code == 0
        paths = out.splitlines()
        assert [p.rsplit("/", 1)[-1] for p in paths] == [
            "burner.c", "burner_main.c", "burner.ir.json",
        ]
        assert (tmp_path / "burner.c").exists()
        assert "long ticks = 777;" in (tmp_path / "burner_main.c").read_text()
        ir = json.loads((tmp_path / "burner.ir.json").read_text())
        assert ir["automaton"] == "burner"
        assert [loc["name"] for loc in ir["locations"]] == ["b1", "b2"]

    def test_all_automata_by_default(self, capsys, models_dir, tmp_path):
        code, out, err = invoke(
            capsys,
            "compile", str(models_dir / "watertank.pha"), "--out", str(tmp_path),
        )
        assert code == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["burner.c", "burner_main.c", "tank.c", "tank_main.c"]

    def test_rejects_failing_model(self, capsys, fixtures_dir, tmp_path):
        code, out, err = invoke(
            capsys,
            "compile", str(fixtures_dir / "squared.pha"), "--out", str(tmp_path),
        )
        assert code == 1
        assert list(tmp_path.iterdir()) == []


class TestBench:
    def test_reports_throughput_and_sizes(self, capsys, models_dir):
        code, out, err = invoke(
            capsys,
            "bench", str(models_dir / "thermostat.pha"), "--ticks", "2000",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("thermo: 2000 ticks in ")
        assert "ticks/s" in lines[0]
        assert lines[1].startswith("C source: ")
        assert lines[2].startswith("C binary: ")
