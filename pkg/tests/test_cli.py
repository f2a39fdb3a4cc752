import json

import pytest

from cli import EXIT_ASSERTION, EXIT_OK, EXIT_USAGE, _attach_negative_values, build_parser, load_run_config, run
from storage import RECORD_COLUMNS, read_records

REFERENCE_SWEEP = ["sweep-main", "--dim", "2", "--reference", "--t", "0.5,1,2", "--z", "-10,-50,-250"]


def test_negative_values_are_attached():
    argv = ["sweep-main", "--z", "-10,-50", "--t", "1", "--seed", "3"]
    assert _attach_negative_values(argv) == ["sweep-main", "--z=-10,-50", "--t", "1", "--seed", "3"]


class TestLoadRunConfig:
    def _load(self, argv):
        return load_run_config(build_parser().parse_args(_attach_negative_values(argv)))

    def test_flags(self):
        cfg = self._load(["sweep-zeno", "--seed", "4", "--k", "1,2,8", "--t", "-1,1", "--projection", "oblique"])
        assert cfg.sweep.seed == 4
        assert cfg.sweep.k_list == [1, 2, 8]
        assert cfg.sweep.t_grid == [-1.0, 1.0]
        assert cfg.sweep.projection_kind.value == "oblique"

    def test_complex_z(self):
        cfg = self._load(["sweep-main", "--z", "-50-10i,-100"])
        assert cfg.sweep.z_list == [complex(-50, -10), complex(-100)]

    def test_seed_from_environment(self, monkeypatch):
        monkeypatch.setenv("SEMIGROUP_LAB_SEED", "11")
        assert self._load(["verify"]).sweep.seed == 11
        assert self._load(["verify", "--seed", "2"]).sweep.seed == 2

    def test_config_file_below_flags(self, tmp_path, monkeypatch):
        monkeypatch.delenv("SEMIGROUP_LAB_SEED", raising=False)
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"sweep": {"seed": 5, "dim": 3}, "format": "json-lines"}))
        cfg = self._load(["verify", "--config", str(config), "--dim", "4"])
        assert cfg.sweep.seed == 5
        assert cfg.sweep.dim == 4
        assert cfg.format.value == "json-lines"

    def test_malformed_list(self):
        with pytest.raises(ValueError):
            self._load(["sweep-main", "--t", "1,,2"])


class TestRun:
    def test_counterexample(self, capsys):
        assert run(["counterexample"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "2.718281828" in out
        assert "[PASS] counterexample" in out

    def test_sweep_main_reference(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        assert run(REFERENCE_SWEEP + ["--out", str(out)]) == EXIT_OK
        rows = read_records(out)
        assert len(rows) == 9
        assert list(rows[0]) == RECORD_COLUMNS
        assert all(float(r["ratio"]) <= 1.0 for r in rows)
        assert "Records: 9" in capsys.readouterr().out

    def test_output_is_reproducible(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(REFERENCE_SWEEP + ["--out", str(a), "--threads", "1"]) == EXIT_OK
        assert run(REFERENCE_SWEEP + ["--out", str(b), "--threads", "4"]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_sweep_zeno(self, tmp_path, capsys):
        out = tmp_path / "zeno.jsonl"
        argv = ["sweep-zeno", "--reference", "--k", "1,16", "--t", "-1,1", "--out", str(out), "--format", "json-lines"]
        assert run(argv) == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 4 + 2
        assert "k=16: 6.250e-02" in capsys.readouterr().out

    def test_bound_constants(self, tmp_path, capsys):
        out = tmp_path / "bp.csv"
        assert run(["bound-constants", "--reference", "--out", str(out)]) == EXIT_OK
        assert "R=4 " in capsys.readouterr().out
        assert read_records(out)[0]["big_r"] == "4"

    def test_p_norm_flag(self, tmp_path):
        out = tmp_path / "bp.jsonl"
        argv = ["bound-constants", "--projection", "oblique", "--p-norm", "10", "--dim", "4",
                "--out", str(out), "--format", "json-lines"]
        assert run(argv) == EXIT_OK
        row = json.loads(out.read_text().splitlines()[0])
        assert row["norm_p"] == pytest.approx(10.0, rel=1e-8)

    def test_localize_spectrum(self, capsys):
        assert run(["localize-spectrum", "--dim", "6", "--instances", "2"]) == EXIT_OK
        assert "[PASS] spectrum_localization" in capsys.readouterr().out

    def test_verify_writes_records_and_reports(self, tmp_path):
        out = tmp_path / "verify.csv"
        assert run(["verify", "--seed", "3", "--dim", "3", "--out", str(out)]) == EXIT_OK
        assert read_records(out)
        reports = read_records(tmp_path / "verify.reports.csv")
        assert all(r["status"] != "failed" for r in reports)

    @pytest.mark.parametrize("argv", [
        [],
        ["plot"],
        ["sweep-main", "--bogus"],
        ["sweep-main", "--dim", "0"],
        ["sweep-main", "--k", "0"],
        ["sweep-main", "--z", "abc"],
        ["sweep-main", "--projection", "diagonal"],
    ])
    def test_usage_errors(self, argv):
        assert run(argv) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"sweep": {"bogus": 1}}))
        assert run(["verify", "--config", str(config)]) == EXIT_USAGE

    def test_unwritable_output(self, tmp_path):
        assert run(REFERENCE_SWEEP + ["--out", str(tmp_path / "missing" / "run.csv")]) == EXIT_USAGE

    def test_main_sweep_needs_positive_times(self):
        assert run(["sweep-main", "--reference", "--t", "0,1"]) == EXIT_USAGE

    def test_numerical_failure_exit_code(self, monkeypatch):
        import cli
        from errors import QuadratureError

        def broken(cfg):
            raise QuadratureError("forced")

        monkeypatch.setitem(cli.COMMANDS, cli.Subcommand.COUNTEREXAMPLE, broken)
        assert run(["counterexample"]) == EXIT_ASSERTION

    def test_help(self):
        assert run(["--help"]) == EXIT_OK

    def test_metrics_dump(self, capsys):
        assert run(["counterexample", "--metrics"]) == EXIT_OK
        stats = json.loads(capsys.readouterr().err)
        assert stats["counters"]["expm.expm.calls"] >= 4
