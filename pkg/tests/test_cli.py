"""Command-line surface: exit codes, replay fidelity, export determinism."""

import json
from pathlib import Path

import pytest

from simloop.cli import main
from simloop.llm import ModelConfig
from simloop.orchestrator import PipelineConfig, run_pipeline, save_ledger
from simloop.reference import controller_source

from conftest import make_playlist, reply_with_code


@pytest.fixture()
def gold_file(tmp_path):
    path = tmp_path / "gold.py"
    path.write_text(controller_source("gold"))
    return path


@pytest.fixture()
def naive_file(tmp_path):
    path = tmp_path / "naive.py"
    path.write_text(controller_source("naive"))
    return path


@pytest.fixture()
def small_ledger(tmp_path):
    playlist = make_playlist(tmp_path / "pl", [
        reply_with_code(controller_source("naive")),
        reply_with_code(controller_source("gold")),
    ])
    config = PipelineConfig(
        mode="CAEM", initiations_max=1, correction_depth=1,
        model=ModelConfig(mock_playlist=str(playlist)))
    ledger = run_pipeline(config)
    return save_ledger(ledger, tmp_path / "ledger")


class TestEvaluate:
    def test_gold_exits_zero(self, gold_file, capsys):
        code = main(["evaluate", "--code", str(gold_file), "--mode", "caem"])
        out = capsys.readouterr().out
        assert code == 0
        assert "Passed 7 of 7 test cases." in out

    def test_naive_exits_one(self, naive_file, capsys):
        code = main(["evaluate", "--code", str(naive_file), "--mode", "caem"])
        out = capsys.readouterr().out
        assert code == 1
        assert "Passed 2 of 7 test cases." in out

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code = main(["evaluate", "--code", str(tmp_path / "nope.py")])
        assert code == 2

    def test_tc_subset(self, naive_file, capsys):
        code = main(["evaluate", "--code", str(naive_file), "--tc", "TC6,TC7"])
        out = capsys.readouterr().out
        assert code == 0
        assert "Passed 2 of 2 test cases." in out

    def test_acc_mode(self, tmp_path, capsys):
        path = tmp_path / "acc.py"
        path.write_text(controller_source("acc_gold"))
        code = main(["evaluate", "--code", str(path), "--mode", "acc"])
        out = capsys.readouterr().out
        assert code == 0
        assert "Passed 3 of 3 test cases." in out


class TestRunAndLedgerCommands:
    def test_run_stats_report(self, tmp_path, capsys):
        playlist = make_playlist(tmp_path / "pl", [
            reply_with_code(controller_source("naive")),
            reply_with_code(controller_source("gold")),
        ])
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "mode": "CAEM",
            "initiations_max": 1,
            "correction_depth": 1,
            "model": {"mock_playlist": str(playlist)},
        }))
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(config_path), "--out", str(out_dir)]) == 0
        run_output = capsys.readouterr().out
        assert "gold reached: True" in run_output

        assert main(["stats", "--ledger", str(out_dir), "--json"]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["total_candidates"] == 2
        assert stats["successful_corrected"] == 1

        assert main(["report", "--ledger", str(out_dir), "--candidate", "C2"]) == 0
        assert "Passed 7 of 7 test cases." in capsys.readouterr().out

    def test_missing_config_exits_two(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_stats_on_missing_ledger_exits_two(self, tmp_path):
        assert main(["stats", "--ledger", str(tmp_path / "nope")]) == 2


class TestScenarioExport:
    def test_export_bit_exact(self, capsys):
        assert main(["scenario", "export", "--tc", "TC4"]) == 0
        first = capsys.readouterr().out
        assert main(["scenario", "export", "--tc", "TC4"]) == 0
        second = capsys.readouterr().out
        assert first == second
        assert first.startswith("scenario TC4\n")

    def test_unknown_tc_exits_two(self, capsys):
        assert main(["scenario", "export", "--tc", "TC99"]) == 2


class TestReplay:
    def test_replay_matches_stored_report_section(self, small_ledger, capsys):
        trace = small_ledger / "candidates" / "C1" / "traces" / "TC1.csv"
        assert main(["replay", "--trace", str(trace)]) == 1  # TC1 failed
        replay_out = capsys.readouterr().out
        stored = (small_ledger / "candidates" / "C1" / "report.txt").read_text()
        # the replayed section reproduces the stored lines byte for byte
        for line in replay_out.strip().splitlines():
            assert line in stored

    def test_replay_passing_trace_exits_zero(self, small_ledger, capsys):
        trace = small_ledger / "candidates" / "C2" / "traces" / "TC6.csv"
        assert main(["replay", "--trace", str(trace)]) == 0
        assert "passed: all acceptance criteria satisfied" in capsys.readouterr().out

    def test_replay_csv_metrics(self, small_ledger, capsys):
        trace = small_ledger / "candidates" / "C1" / "traces" / "TC1.csv"
        assert main(["replay", "--trace", str(trace), "--format", "csv"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "time,headway,ttc,ego_lane"
        assert len(out.splitlines()) > 100

    def test_corrupt_trace_exits_two(self, small_ledger, tmp_path, capsys):
        source = small_ledger / "candidates" / "C1" / "traces" / "TC1.csv"
        lines = source.read_text().splitlines()
        lines[5] = "not,a,valid,row"
        bad = tmp_path / "TC1.csv"
        bad.write_text("\n".join(lines))
        assert main(["replay", "--trace", str(bad)]) == 2
        assert "row 6" in capsys.readouterr().err


class TestUsage:
    def test_no_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
