"""File formats: confidence CSVs, selection lists, atomic JSON/text output."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .strategies import ENTROPY, ConfidenceMatrix

COST_COLUMNS = ("m", "nt")


class InputFormatError(ValidationError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ConfidenceTable:
    matrix: ConfidenceMatrix
    m: np.ndarray | None = None
    nt: np.ndarray | None = None

    @property
    def has_costs(self) -> bool:
        return self.m is not None and self.nt is not None


def format_float(value: float) -> str:
    """Shortest string that round-trips to the same double."""
    return repr(float(value))


def parse_confidence_csv(text: str, kind: str = ENTROPY) -> ConfidenceTable:
    """Parse ``id,task_0,...,task_{t-1}[,m,nt]``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputFormatError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "id":
        raise InputFormatError("header must start with 'id'", 1)
    tail = header[1:]
    cost_cols = [c for c in tail if c in COST_COLUMNS]
    task_cols = [c for c in tail if c not in COST_COLUMNS]
    if cost_cols and cost_cols != list(COST_COLUMNS):
        raise InputFormatError("cost columns must be 'm,nt' together", 1)
    if cost_cols and tail[-2:] != list(COST_COLUMNS):
        raise InputFormatError("cost columns must come after the task columns", 1)
    if not task_cols or task_cols != [f"task_{i}" for i in range(len(task_cols))]:
        raise InputFormatError("task columns must be task_0, task_1, ...", 1)

    ids, scores, m, nt = [], [], [], []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise InputFormatError(f"expected {len(header)} columns, got {len(row)}", lineno)
        try:
            example = int(row[0])
        except ValueError:
            raise InputFormatError(f"id {row[0]!r} is not an integer", lineno) from None
        if example in seen:
            raise InputFormatError(f"duplicate id {example}", lineno)
        seen.add(example)
        try:
            values = [float(v) for v in row[1:1 + len(task_cols)]]
        except ValueError:
            raise InputFormatError("confidence is not a decimal number", lineno) from None
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise InputFormatError("confidence outside [0, 1]", lineno)
        if cost_cols:
            try:
                mi, nti = int(row[-2]), int(row[-1])
            except ValueError:
                raise InputFormatError("m and nt must be integers", lineno) from None
            if mi < 1 or nti < 0:
                raise InputFormatError("need m >= 1 and nt >= 0", lineno)
            m.append(mi)
            nt.append(nti)
        ids.append(example)
        scores.append(values)
    matrix = ConfidenceMatrix(tuple(ids), np.asarray(scores, dtype=float).reshape(len(ids), len(task_cols)), kind)
    if cost_cols:
        return ConfidenceTable(matrix, np.asarray(m, dtype=int), np.asarray(nt, dtype=int))
    return ConfidenceTable(matrix)


def read_confidence_csv(path, kind: str = ENTROPY) -> ConfidenceTable:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_confidence_csv(text, kind)


def confidence_csv_text(matrix: ConfidenceMatrix, m=None, nt=None) -> str:
    header = ["id"] + [f"task_{i}" for i in range(matrix.n_tasks)]
    with_costs = m is not None and nt is not None
    if with_costs:
        header += list(COST_COLUMNS)
    lines = [",".join(header)]
    for r, example in enumerate(matrix.ids):
        cells = [str(example)] + [format_float(v) for v in matrix.scores[r]]
        if with_costs:
            cells += [str(int(m[r])), str(int(nt[r]))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def atomic_write(path, content: str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_confidence_csv(path, matrix: ConfidenceMatrix, m=None, nt=None) -> None:
    atomic_write(path, confidence_csv_text(matrix, m, nt))


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def selection_text(ids) -> str:
    return "".join(f"{int(i)}\n" for i in ids)


def read_selection(path) -> list:
    ids = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            ids.append(int(line))
        except ValueError:
            raise InputFormatError(f"{path}: id {line!r} is not an integer", lineno) from None
    return ids
