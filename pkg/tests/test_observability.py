import json
import threading

import numpy as np
import pytest

from observability import (
    LogLevel,
    MetricsCollector,
    SpanTracer,
    StructuredLogger,
    coerce_field,
    configure_logging,
    get_logger,
    log_execution,
    track_metrics,
)
from workers import ordered_map


@pytest.fixture
def restore_logging(monkeypatch):
    monkeypatch.setenv("SEMIGROUP_LAB_LOG_LEVEL", "WARNING")
    yield
    configure_logging(LogLevel.WARNING, json_output=False)


class TestStructuredLogger:
    def test_json_lines_carry_context(self, capsys):
        logger = StructuredLogger("test.json", level=LogLevel.INFO, json_output=True)
        logger.bind(run="r1")
        logger.info("Bound constants computed", big_r=4.0)
        line = capsys.readouterr().err.strip().splitlines()[-1]
        data = json.loads(line)
        assert data["message"] == "Bound constants computed"
        assert data["level"] == "INFO"
        assert data["run"] == "r1"
        assert data["big_r"] == 4.0
        logger.unbind()
        logger.info("Unbound")
        assert "run" not in json.loads(capsys.readouterr().err.strip().splitlines()[-1])

    def test_key_value_format(self, capsys):
        logger = StructuredLogger("test.kv", level=LogLevel.INFO)
        logger.warning("Cell flagged", seed=3)
        err = capsys.readouterr().err
        assert "WARNING" in err and "Cell flagged" in err and "seed=3" in err

    def test_level_filters(self, capsys):
        logger = StructuredLogger("test.level", level=LogLevel.WARNING)
        logger.info("hidden")
        assert capsys.readouterr().err == ""
        assert not logger.is_enabled_for(LogLevel.DEBUG)

    def test_exception_fields(self, capsys):
        logger = StructuredLogger("test.exc", level=LogLevel.ERROR, json_output=True)
        try:
            raise RuntimeError("boom")
        except RuntimeError as e:
            logger.exception("Run aborted", e)
        data = json.loads(capsys.readouterr().err.strip())
        assert data["exception_type"] == "RuntimeError"
        assert data["exception_message"] == "boom"


def test_configure_logging_reaches_existing_loggers(restore_logging):
    logger = get_logger("test.configure")
    configure_logging(LogLevel.DEBUG, json_output=True)
    assert logger.is_enabled_for(LogLevel.DEBUG)
    assert logger.json_output


def test_env_level_applies_to_new_loggers(monkeypatch):
    monkeypatch.setenv("SEMIGROUP_LAB_LOG_LEVEL", "debug")
    assert StructuredLogger("test.env").is_enabled_for(LogLevel.DEBUG)
    monkeypatch.setenv("SEMIGROUP_LAB_LOG_LEVEL", "nonsense")
    assert not StructuredLogger("test.env2").is_enabled_for(LogLevel.INFO)


class TestMetricsCollector:
    def test_counters_gauges_timers(self):
        m = MetricsCollector()
        m.increment("cells")
        m.increment("cells", 2)
        m.increment("cells", tags={"kind": "oblique"})
        m.gauge("instances", 3)
        for ms in (1.0, 3.0, 2.0):
            m.timer("expm", ms)
        stats = m.get_stats()
        assert stats["counters"] == {"cells": 3, "cells[kind=oblique]": 1}
        assert stats["gauges"]["instances"] == 3
        assert stats["timers"]["expm"]["count"] == 3
        assert stats["timers"]["expm"]["min_ms"] == 1.0
        assert stats["timers"]["expm"]["max_ms"] == 3.0
        assert stats["timers"]["expm"]["avg_ms"] == 2.0
        stats["counters"]["cells"] = 0
        assert m.get_stats()["counters"]["cells"] == 3

    def test_thread_safe_increments(self):
        m = MetricsCollector()

        def bump():
            for _ in range(1000):
                m.increment("n")

        threads = [threading.Thread(target=bump) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert m.get_stats()["counters"]["n"] == 8000


def test_track_metrics_counts_calls_and_errors():
    m = MetricsCollector()

    @track_metrics(m, "op", timed=True)
    def maybe_fail(x):
        if x < 0:
            raise ValueError("negative")
        return x

    maybe_fail(1)
    with pytest.raises(ValueError):
        maybe_fail(-1)
    stats = m.get_stats()
    assert stats["counters"]["op.calls"] == 2
    assert stats["counters"]["op.error"] == 1
    assert stats["timers"]["op"]["count"] == 1


def test_log_execution_reraises(capsys):
    logger = StructuredLogger("test.exec", level=LogLevel.INFO)

    @log_execution(logger)
    def fails():
        raise KeyError("x")

    with pytest.raises(KeyError):
        fails()
    err = capsys.readouterr().err
    assert "fails failed" in err and "exception_type=KeyError" in err


def test_span_tracer_records_outcome():
    m = MetricsCollector()
    tracer = SpanTracer(StructuredLogger("test.span", level=LogLevel.ERROR), m)
    with tracer.trace("suite.ok") as ctx:
        assert ctx.trace_id
    with pytest.raises(RuntimeError):
        with tracer.trace("suite.bad"):
            raise RuntimeError("stop")
    counters = m.get_stats()["counters"]
    assert counters["trace.suite.ok.success"] == 1
    assert counters["trace.suite.bad.error"] == 1


class TestOrderedMap:
    def test_preserves_input_order(self):
        assert ordered_map(lambda x: x * x, range(50), max_workers=8) == [x * x for x in range(50)]

    def test_inline_when_single_worker(self):
        seen = []
        ordered_map(lambda x: seen.append(threading.current_thread().name), [1, 2], max_workers=1)
        assert set(seen) == {threading.current_thread().name}

    def test_exceptions_propagate(self):
        def f(x):
            if x == 3:
                raise ValueError("three")
            return x

        with pytest.raises(ValueError, match="three"):
            ordered_map(f, range(6), max_workers=4)


def test_coerce_field_renders_numerical_values():
    assert coerce_field(complex(-50, -10)) == "-50-10i"
    assert coerce_field(np.float64(0.25)) == 0.25
    assert coerce_field(np.int64(7)) == 7
    assert coerce_field(np.zeros((3, 3), dtype=complex)) == "<complex128 3x3>"
    assert coerce_field(None) is None


def test_nested_spans_share_trace():
    tracer = SpanTracer(StructuredLogger("test.nested", level=LogLevel.ERROR), MetricsCollector())
    with tracer.trace("verify.pipeline") as outer:
        with tracer.trace("verify.zeno") as inner:
            assert tracer.current() is inner
        assert tracer.current() is outer
    assert inner.trace_id == outer.trace_id
    assert inner.parent_span_id == outer.span_id
    assert tracer.current() is None
