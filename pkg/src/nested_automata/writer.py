"""Deterministic writers for trajectories, reports, speed tables and traces.

JSON documents are written UTF-8 with sorted keys, two-space indentation and
a trailing newline. CSV files have a fixed column order and '.' decimals.
Nothing time- or host-dependent is written, so identical inputs produce
byte-identical files.

Trajectory and report documents separate a ``metadata`` header (spec hash,
generator) from the ``payload`` that golden tests compare.
"""

import csv
import hashlib
import io
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Optional, Union

from . import __version__
from .automaton import Trajectory, VerificationReport
from .kinematics import SpeedRow
from .parser import encode_slice
from .propagation import TraceRow

logger = logging.getLogger(__name__)

GENERATOR = f"nested-automata {__version__}"
DETERMINISM_NOTE = "deterministic: payload depends only on the spec and options"

SPEED_COLUMNS = ("level", "shift_index", "raw_speed", "effective_speed", "flag")
TRACE_COLUMNS = ("step", "level0", "level1", "level2", "value")


def spec_hash(document: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON rendering of a spec document."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dumps_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(text: str, out: Optional[Union[str, Path]]) -> Optional[Path]:
    """Write text to ``out``; return None without writing when out is None."""
    if out is None:
        return None
    path = Path(out)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info("Wrote %s", path)
    return path


def metadata(spec_sha256: Optional[str], **extra: Any) -> dict[str, Any]:
    """Header kept apart from the payload; spec_sha256 is omitted when None."""
    header: dict[str, Any] = {"generator": GENERATOR, "determinism": DETERMINISM_NOTE}
    if spec_sha256 is not None:
        header["spec_sha256"] = spec_sha256
    header.update(extra)
    return header


def trajectory_document(
    trajectory: Trajectory, states: int, spec_sha256: str
) -> dict[str, Any]:
    """Trajectory as {"metadata": ..., "payload": {times, states, outputs}}."""
    times = trajectory.times
    payload: dict[str, Any] = {
        "times": times,
        "states": [encode_slice(trajectory.states[t], states) for t in times],
    }
    if any(o.size for o in trajectory.outputs.values()):
        payload["outputs"] = {
            str(t): trajectory.outputs[t].tolist() for t in sorted(trajectory.outputs)
        }
    return {"metadata": metadata(spec_sha256), "payload": payload}


def report_document(report: VerificationReport, spec_sha256: str) -> dict[str, Any]:
    return {"metadata": metadata(spec_sha256), "payload": report.to_dict()}


def _format_float(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value + 0.0:.12g}"


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def speed_table_csv(rows: Iterable[SpeedRow]) -> str:
    """CSV with columns level, shift_index, raw_speed, effective_speed, flag."""
    return render_csv(
        SPEED_COLUMNS,
        (
            (
                row.level,
                row.shift_index,
                _format_float(row.raw_speed),
                _format_float(row.effective_speed),
                row.flag,
            )
            for row in rows
        ),
    )


def trace_csv(rows: Iterable[TraceRow]) -> str:
    """CSV with columns step, level0, level1, level2, value."""
    return render_csv(
        TRACE_COLUMNS,
        ((row.step, row.level0, row.level1, row.level2, row.value) for row in rows),
    )
