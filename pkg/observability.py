"""
Semigroup Lab Logging & Observability
Structured logging, metrics collection, and span tracing for sweeps and suites.

Logs go to stderr: stdout is reserved for the CLI's human-readable summary.
"""
import functools
import json
import logging
import os
import sys
import threading
import time
import traceback
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional

import numpy as np

LOG_LEVEL_ENV = "SEMIGROUP_LAB_LOG_LEVEL"
TEXT_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


# ============================================================================
# Log Levels & Configuration
# ============================================================================

class LogLevel(str, Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"

    @property
    def numeric(self) -> int:
        return logging.getLevelName(self.value)

    @classmethod
    def from_env(cls) -> 'LogLevel':
        """Level named by SEMIGROUP_LAB_LOG_LEVEL; WARNING when unset or unknown."""
        raw = os.getenv(LOG_LEVEL_ENV, cls.WARNING.value).upper()
        return cls.__members__.get(raw, cls.WARNING)


def coerce_field(value: Any) -> Any:
    """Turn numerical values into something both formatters can print."""
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        sign = "+" if z.imag >= 0 else "-"
        return f"{z.real:.6g}{sign}{abs(z.imag):.6g}i"
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return f"<{value.dtype} {'x'.join(map(str, value.shape))}>"
    return str(value)


# ============================================================================
# Structured Logger
# ============================================================================

class StructuredLogger:
    """
    Logger taking keyword context on every call.

    Plain-text output by default; JSON lines when `json_output` is set.
    Fields bound with `bind` are attached to every later line.
    """

    def __init__(self, name: str, level: Optional[LogLevel] = None, json_output: bool = False):
        self.name = name
        self.json_output = json_output
        self.logger = logging.getLogger(name)
        self.logger.propagate = False
        self._bound: Dict[str, Any] = {}
        self.configure(level or LogLevel.from_env(), json_output)

    def configure(self, level: LogLevel, json_output: bool):
        """(Re)install the stderr handler with the given level and format."""
        self.json_output = json_output
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(FieldFormatter(json_output))
        self.logger.handlers = [handler]
        self.logger.setLevel(level.numeric)

    def bind(self, **fields):
        self._bound.update(fields)

    def unbind(self):
        self._bound.clear()

    def is_enabled_for(self, level: LogLevel) -> bool:
        return self.logger.isEnabledFor(level.numeric)

    def log(self, level: LogLevel, message: str, **fields):
        if not self.is_enabled_for(level):
            return
        payload = {k: coerce_field(v) for k, v in {**self._bound, **fields}.items()}
        payload["timestamp"] = datetime.now(timezone.utc).isoformat()
        self.logger.log(level.numeric, message, extra={"fields": payload})

    def debug(self, message: str, **fields):
        self.log(LogLevel.DEBUG, message, **fields)

    def info(self, message: str, **fields):
        self.log(LogLevel.INFO, message, **fields)

    def warning(self, message: str, **fields):
        self.log(LogLevel.WARNING, message, **fields)

    def error(self, message: str, **fields):
        self.log(LogLevel.ERROR, message, **fields)

    def exception(self, message: str, exc: Exception, **fields):
        self.log(
            LogLevel.ERROR,
            message,
            exception_type=type(exc).__name__,
            exception_message=str(exc),
            traceback=traceback.format_exc(),
            **fields,
        )


class FieldFormatter(logging.Formatter):
    """Renders the structured fields as one JSON object or as trailing key=value pairs."""

    _TEXT_HIDDEN = ("timestamp", "traceback")

    def __init__(self, json_output: bool):
        super().__init__(None if json_output else TEXT_FORMAT)
        self.json_output = json_output

    def format(self, record: logging.LogRecord) -> str:
        fields = getattr(record, "fields", {})
        if self.json_output:
            return json.dumps(
                {"level": record.levelname, "logger": record.name, "message": record.getMessage(), **fields},
                default=str,
            )
        line = super().format(record)
        pairs = " ".join(f"{k}={v}" for k, v in fields.items() if k not in self._TEXT_HIDDEN)
        return f"{line} | {pairs}" if pairs else line


# ============================================================================
# Metrics Collector
# ============================================================================

@dataclass
class TimerStats:
    """Running summary of one timer; kernels are timed too often to keep every sample."""
    count: int = 0
    total_ms: float = 0.0
    min_ms: float = float("inf")
    max_ms: float = 0.0

    def add(self, duration_ms: float):
        self.count += 1
        self.total_ms += duration_ms
        self.min_ms = min(self.min_ms, duration_ms)
        self.max_ms = max(self.max_ms, duration_ms)

    def to_dict(self) -> Dict[str, float]:
        return {
            "count": self.count,
            "total_ms": self.total_ms,
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
            "avg_ms": self.total_ms / self.count,
        }


class MetricsCollector:
    """In-process counters, gauges and timers; safe to update from sweep worker threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counters: Dict[str, float] = {}
        self._gauges: Dict[str, float] = {}
        self._timers: Dict[str, TimerStats] = {}

    @staticmethod
    def key(name: str, tags: Optional[Dict] = None) -> str:
        if not tags:
            return name
        return f"{name}[{','.join(f'{k}={v}' for k, v in sorted(tags.items()))}]"

    def increment(self, name: str, value: float = 1, tags: Optional[Dict] = None):
        k = self.key(name, tags)
        with self._lock:
            self._counters[k] = self._counters.get(k, 0) + value

    def gauge(self, name: str, value: float, tags: Optional[Dict] = None):
        with self._lock:
            self._gauges[self.key(name, tags)] = value

    def timer(self, name: str, duration_ms: float, tags: Optional[Dict] = None):
        k = self.key(name, tags)
        with self._lock:
            self._timers.setdefault(k, TimerStats()).add(duration_ms)

    def get_stats(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "counters": dict(self._counters),
                "gauges": dict(self._gauges),
                "timers": {k: t.to_dict() for k, t in self._timers.items()},
            }


# ============================================================================
# Span Tracing
# ============================================================================

@dataclass
class SpanContext:
    operation: str
    trace_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    span_id: str = field(default_factory=lambda: uuid.uuid4().hex[:8])
    parent_span_id: Optional[str] = None

    def child(self, operation: str) -> 'SpanContext':
        return SpanContext(operation, trace_id=self.trace_id, parent_span_id=self.span_id)


class SpanTracer:
    """
    Wraps suites and sweeps in logged, timed spans.

    Spans opened inside another span on the same thread share its trace id,
    so one `verify` run reads as a single trace in the logs.
    """

    def __init__(self, logger: StructuredLogger, metrics: MetricsCollector):
        self.logger = logger
        self.metrics = metrics
        self._local = threading.local()

    def _stack(self) -> List[SpanContext]:
        if not hasattr(self._local, "stack"):
            self._local.stack = []
        return self._local.stack

    def current(self) -> Optional[SpanContext]:
        stack = self._stack()
        return stack[-1] if stack else None

    @contextmanager
    def trace(self, operation: str, tags: Optional[Dict] = None) -> Iterator[SpanContext]:
        parent = self.current()
        ctx = parent.child(operation) if parent else SpanContext(operation)
        ids = {"trace_id": ctx.trace_id, "span_id": ctx.span_id, "parent_span_id": ctx.parent_span_id}
        self._stack().append(ctx)
        self.logger.debug(f"Span started: {operation}", **ids, **(tags or {}))
        start = time.perf_counter()
        outcome = "success"
        try:
            yield ctx
        except Exception as e:
            outcome = "error"
            self.logger.error(f"Span failed: {operation}", **ids, error=str(e), **(tags or {}))
            raise
        finally:
            self._stack().pop()
            duration_ms = (time.perf_counter() - start) * 1000
            self.metrics.timer(f"trace.{operation}", duration_ms)
            self.metrics.increment(f"trace.{operation}.{outcome}")
            if outcome == "success":
                self.logger.info(f"Span completed: {operation}", **ids, duration_ms=round(duration_ms, 2))


# ============================================================================
# Decorators
# ============================================================================

def log_execution(logger: Optional[StructuredLogger] = None):
    """Log start, duration and failure of a sweep-level function."""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            log = logger or get_logger(func.__module__)
            log.debug(f"{func.__name__} started")
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                log.exception(f"{func.__name__} failed", e, duration_ms=round((time.perf_counter() - start) * 1000, 2))
                raise
            log.info(f"{func.__name__} finished", duration_ms=round((time.perf_counter() - start) * 1000, 2))
            return result
        return wrapper
    return decorator


def track_metrics(metrics: MetricsCollector, operation: str, timed: bool = False):
    """Count calls and errors of a kernel; timing is opt-in."""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            metrics.increment(f"{operation}.calls")
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception:
                metrics.increment(f"{operation}.error")
                raise
            if timed:
                metrics.timer(operation, (time.perf_counter() - start) * 1000)
            return result
        return wrapper
    return decorator


# ============================================================================
# Global Instances
# ============================================================================

_loggers: Dict[str, StructuredLogger] = {}
_loggers_lock = threading.Lock()
_json_output = False

metrics = MetricsCollector()


def get_logger(name: str) -> StructuredLogger:
    """Get (or create) a named logger; all of them follow configure_logging."""
    with _loggers_lock:
        if name not in _loggers:
            _loggers[name] = StructuredLogger(name, json_output=_json_output)
        return _loggers[name]


def configure_logging(level: LogLevel, json_output: bool = False):
    """Apply level and format to every logger handed out so far, and to later ones."""
    global _json_output
    _json_output = json_output
    os.environ[LOG_LEVEL_ENV] = level.value
    with _loggers_lock:
        for logger in _loggers.values():
            logger.configure(level, json_output)


def get_metrics() -> MetricsCollector:
    return metrics


tracer = SpanTracer(get_logger("semigroup_lab"), metrics)


def get_tracer() -> SpanTracer:
    return tracer
