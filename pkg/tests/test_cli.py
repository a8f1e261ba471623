import numpy as np
import pytest

import rflink
from rflink.cli import main

SCENARIO = str(rflink.default_scenario_path())


class TestExitCodes:
    def test_ok(self, tmp_path, capsys):
        assert main(["simulate", "--scenario", SCENARIO, "--out", str(tmp_path / "o")]) == 0

    def test_config_error_on_bad_scenario(self, tmp_path, capsys):
        bad = tmp_path / "bad.scenario"
        bad.write_text("[waveform]\nmodulation = 8psk\n")
        assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_config_error_on_bad_target(self, tmp_path, capsys):
        code = main(["tune", "--scenario", SCENARIO, "--target", "snr:3",
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_infeasible_target(self, tmp_path, capsys):
        code = main(["tune", "--scenario", SCENARIO, "--target", "mer:25",
                     "--max-packets", "20", "--out", str(tmp_path / "o")])
        assert code == 3

    def test_io_error_on_missing_scenario(self, tmp_path, capsys):
        code = main(["simulate", "--scenario", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
        assert code == 4


class TestDeterminism:
    def test_simulate_repeats_byte_identical(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert main(["simulate", "--scenario", SCENARIO, "--seed", "77",
                         "--out", str(tmp_path / name)]) == 0
        for fname in ("report.txt", "constellation.csv"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_sweep_worker_count_invariant(self, tmp_path, capsys):
        for name, workers in (("w1", "1"), ("w2", "2")):
            assert main(["sweep", "--scenario", SCENARIO, "--seed", "5", "--trials", "2",
                         "--workers", workers, "--bias-list", "31.25,125,500",
                         "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "w1" / "sweep.txt").read_bytes() == (tmp_path / "w2" / "sweep.txt").read_bytes()


class TestPipelineOutputs:
    def test_export_pwl_stages(self, tmp_path, capsys):
        for stage in ("tx", "post-lpf"):
            out = tmp_path / f"{stage}.pwl"
            assert main(["export-pwl", "--scenario", SCENARIO, "--stage", stage,
                         "--mode", "baseband_i", "--out", str(out)]) == 0
            lines = out.read_text().splitlines()
            assert lines[0] == "time,value"
            assert len(lines) > 1000

    def test_tune_writes_report(self, tmp_path, capsys):
        assert main(["tune", "--scenario", SCENARIO, "--target", "ber:1e-2",
                     "--min-bits", "4272", "--out", str(tmp_path / "t")]) == 0
        text = (tmp_path / "t" / "tune.txt").read_text()
        assert "chosen_bias_ua=31.25" in text

    def test_calibrate_round_trips_through_table_file(self, tmp_path, capsys):
        out = tmp_path / "table.csv"
        assert main(["calibrate", "--scenario", SCENARIO,
                     "--targets", "500:18.9,31.25:11.2", "--out", str(out)]) == 0
        from rflink import io as rfio
        table = rfio.load_lna_table(out)
        assert table.biases_ua == (31.25, 62.5, 125.0, 250.0, 500.0)
        # simulate with the regenerated table
        assert main(["simulate", "--scenario", SCENARIO, "--table", str(out),
                     "--out", str(tmp_path / "sim")]) == 0
