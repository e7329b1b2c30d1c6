"""
Tests for configuration, serialization and timing utilities
"""
import json
import logging
import math

import pytest

from hlmax.config import Config, QuadratureConfig, load_config_file
from hlmax.errors import ConfigurationError, ParseError
from hlmax.utils.io_utils import csv_text, dumps_report, emit, format_float, read_csv_rows, write_atomic
from hlmax.utils.logger import LoggerContext, setup_logger
from hlmax.utils.metrics import StageTimer, TimingCollector


class TestQuadratureConfig:
    def test_defaults(self):
        cfg = QuadratureConfig()
        assert cfg.validate() == []
        assert (cfg.mc_samples, cfg.master_seed, cfg.tail_tol) == (100_000, 42, 1e-10)

    @pytest.mark.parametrize("changes", [
        {"mc_samples": 999},
        {"rel_tol": 0.0},
        {"field_samples": 10},
        {"threads": 0},
        {"master_seed": -1},
    ])
    def test_invalid_values(self, changes):
        with pytest.raises(ConfigurationError):
            QuadratureConfig(**changes)

    def test_digest_ignores_threads(self):
        a = QuadratureConfig(threads=1)
        assert a.digest() == QuadratureConfig(threads=8).digest()
        assert a.digest() != a.with_changes(master_seed=7).digest()
        assert len(a.digest()) == 16

    def test_environment_defaults(self, monkeypatch):
        monkeypatch.setenv("HLMAX_SEED", "11")
        monkeypatch.setenv("HLMAX_THREADS", "3")
        monkeypatch.setenv("HLMAX_MC_SAMPLES", "5000")
        config = Config()
        cfg = config.quadrature(master_seed=None, mc_samples=2000)
        assert (cfg.master_seed, cfg.threads, cfg.mc_samples) == (11, 3, 2000)
        assert config.validate() == []

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"mc-samples": 5000, "space": "affine-left"}), encoding="utf-8")
        assert load_config_file(path) == {"mc_samples": 5000, "space": "affine-left"}

    def test_config_file_must_be_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config_file(path)


class TestSerialization:
    def test_format_float_round_trips(self):
        assert float(format_float(0.1 + 0.2)) == 0.1 + 0.2
        assert format_float(2.0) == "2.0"

    def test_csv_text(self):
        text = csv_text(("a", "b", "c"), [(1.5, True, "x,y")])
        assert text == 'a,b,c\n1.5,true,"x,y"\n'

    def test_read_csv_rows(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("p,value\n1,0.5\n", encoding="utf-8")
        assert read_csv_rows(path) == [{"p": "1", "value": "0.5"}]
        with pytest.raises(ParseError):
            read_csv_rows(tmp_path / "missing.csv")

    def test_report_floats_use_17_digits(self):
        text = dumps_report({"lhs": 0.1, "n": 3, "top": math.inf, "ok": True})
        data = json.loads(text)
        assert data == {"lhs": 0.1, "n": 3, "top": "inf", "ok": True}
        assert "0.10000000000000001" in text
        assert list(data) == ["lhs", "n", "top", "ok"]

    def test_report_whole_floats_stay_floats(self):
        assert isinstance(json.loads(dumps_report([2.0]))[0], float)

    def test_write_atomic(self, tmp_path):
        target = tmp_path / "nested" / "out.txt"
        write_atomic(target, "first")
        write_atomic(target, "second")
        assert target.read_text(encoding="utf-8") == "second"
        assert [p.name for p in target.parent.iterdir()] == ["out.txt"]

    def test_emit_to_stream(self, capsys):
        emit("hello\n", None)
        assert capsys.readouterr().out == "hello\n"


class TestTiming:
    def test_stage_timer_records(self):
        collector = TimingCollector()
        with StageTimer(collector, "check:a") as timer:
            pass
        collector.increment("checks_pass", 2)

        stats = collector.get_stats("check:a")
        assert stats["count"] == 1
        assert stats["total"] == pytest.approx(timer.elapsed_ms)
        assert collector.get_summary()["counters"] == {"checks_pass": 2}
        assert collector.slowest(1) == ["check:a"]

    def test_window_keeps_latest(self):
        collector = TimingCollector(window_size=3)
        for ms in (1.0, 2.0, 3.0, 4.0):
            collector.record("stage", ms)
        assert collector.get_stats("stage")["min"] == 2.0
        assert collector.get_stats("other") is None


def test_logger_context_restores_level():
    logger = setup_logger("hlmax.tests", level="WARNING")
    with LoggerContext(logger, "DEBUG") as scoped:
        assert scoped.level == logging.DEBUG
    assert logger.level == logging.WARNING
