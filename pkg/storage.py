"""
Record and report writers.

CSV goes through pandas with every cell pre-rendered as text, so the bytes
on disk depend only on the values: floats with 17 significant digits, empty
cells for inapplicable columns, `\\n` line endings.
JSON lines carry the same cells as JSON numbers and nulls; a non-finite float
stays a string ("inf").
"""
import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from observability import get_logger
from reports import SuiteReport
from schemas import ExperimentRecord, OutputFormat

logger = get_logger("semigroup_lab.storage")

RECORD_COLUMNS = [
    "experiment", "seed", "dim", "projection_kind", "t", "re_z", "im_z", "k",
    "error", "bound", "ratio", "delta", "big_r", "wall_time_s",
]
REPORT_COLUMNS = ["name", "status", "checked", "failure_count", "max_ratio", "first_failure"]
TEXT_COLUMNS = frozenset({"experiment", "projection_kind", "name", "status", "first_failure"})
INT_COLUMNS = frozenset({"seed", "dim", "k", "checked", "failure_count", "m_samples"})


def format_float(value: Optional[float]) -> str:
    """17 significant digits; '' for None."""
    if value is None:
        return ""
    return f"{float(value):.17g}"


def record_row(rec: ExperimentRecord, timing: bool = False) -> Dict[str, str]:
    return {
        "experiment": rec.experiment,
        "seed": str(rec.seed),
        "dim": str(rec.dim),
        "projection_kind": rec.projection_kind,
        "t": format_float(rec.t),
        "re_z": format_float(rec.re_z),
        "im_z": format_float(rec.im_z),
        "k": "" if rec.k is None else str(rec.k),
        "error": format_float(rec.error),
        "bound": format_float(rec.bound),
        "ratio": format_float(rec.ratio),
        "delta": format_float(rec.delta),
        "big_r": format_float(rec.big_r),
        # timings vary run to run; only rendered on request
        "wall_time_s": format_float(rec.wall_time_s) if timing else "",
    }


def records_frame(records: Sequence[ExperimentRecord], timing: bool = False) -> pd.DataFrame:
    rows = [record_row(rec, timing) for rec in records]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS, dtype=str)


def json_cell(column: str, text: str) -> Union[None, str, int, float]:
    """A rendered cell as its JSON value: null, text, int or float."""
    if text == "":
        return None
    if column in TEXT_COLUMNS:
        return text
    if column in INT_COLUMNS:
        return int(text)
    value = float(text)
    return value if math.isfinite(value) else text


def _write_rows(path: Path, frame: pd.DataFrame, fmt: OutputFormat):
    path = Path(path)
    if fmt is OutputFormat.CSV:
        frame.to_csv(path, index=False, lineterminator="\n")
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in frame.to_dict(orient="records"):
            f.write(json.dumps({k: json_cell(k, v) for k, v in row.items()}) + "\n")


def write_records(
    path: Union[str, Path],
    records: Sequence[ExperimentRecord],
    fmt: OutputFormat = OutputFormat.CSV,
    timing: bool = False
) -> Path:
    """Write sweep records with the fixed column order; the header is always present."""
    path = Path(path)
    _write_rows(path, records_frame(records, timing), OutputFormat(fmt))
    logger.info("Records written", path=str(path), rows=len(records), format=OutputFormat(fmt).value)
    return path


def write_reports(
    path: Union[str, Path],
    reports: Sequence[SuiteReport],
    fmt: OutputFormat = OutputFormat.CSV
) -> Path:
    """One row per suite report."""
    path = Path(path)
    frame = pd.DataFrame([r.to_row() for r in reports], columns=REPORT_COLUMNS, dtype=str)
    _write_rows(path, frame, OutputFormat(fmt))
    logger.info("Reports written", path=str(path), rows=len(reports))
    return path


def reports_path_for(records_path: Union[str, Path]) -> Path:
    """Sibling file for reports: run.csv -> run.reports.csv."""
    records_path = Path(records_path)
    return records_path.with_name(f"{records_path.stem}.reports{records_path.suffix}")


def read_records(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Read a records CSV back as text rows (empty cells as '')."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return frame.to_dict(orient="records")


def write_bound_params(
    path: Union[str, Path],
    rows: Sequence[Dict[str, object]],
    fmt: OutputFormat = OutputFormat.CSV
) -> Path:
    """One row per instance: seed followed by every BoundParams field."""
    path = Path(path)
    columns = list(rows[0]) if rows else ["seed"]
    rendered = [
        {k: format_float(v) if isinstance(v, float) else ("" if v is None else str(v)) for k, v in row.items()}
        for row in rows
    ]
    _write_rows(path, pd.DataFrame(rendered, columns=columns, dtype=str), OutputFormat(fmt))
    logger.info("Bound constants written", path=str(path), rows=len(rows))
    return path
