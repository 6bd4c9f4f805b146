"""Checkpoint documents, metric tables and labeled matrix grids."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import ParseError

METRIC_HEADER = ("variant", "seed", "acc1", "acc5", "map")


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _nested(a: np.ndarray) -> str:
    if a.ndim == 0:
        return _num(a)
    if a.ndim == 1:
        return "[" + ",".join(_num(x) for x in a) + "]"
    return "[" + ",".join(_nested(r) for r in a) + "]"


def save_checkpoint(path, state: Mapping[str, np.ndarray], config: Mapping | None = None,
                    loss_curve: Sequence[float] = ()) -> None:
    """Named parameter arrays written as nested JSON arrays with 17 significant digits."""
    parts = ['{"config": ' + json.dumps(dict(config or {}), sort_keys=True) + ",",
             '"loss_curve": [' + ",".join(_num(x) for x in loss_curve) + "],",
             '"params": {']
    items = sorted(state.items())
    for i, (name, arr) in enumerate(items):
        arr = np.asarray(arr, dtype=np.float64)
        sep = "," if i < len(items) - 1 else ""
        parts.append(f'{json.dumps(name)}: {{"shape": {list(arr.shape)}, "data": {_nested(arr)}}}{sep}')
    parts.append("}}")
    Path(path).write_text("\n".join(parts) + "\n")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict, list[float]]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    state = {}
    for name, entry in doc["params"].items():
        arr = np.asarray(entry["data"], dtype=np.float64)
        if list(arr.shape) != list(entry["shape"]):
            raise ParseError(f"{path}: parameter {name!r} has shape {arr.shape}, header says {entry['shape']}")
        state[name] = arr
    return state, doc.get("config", {}), [float(x) for x in doc.get("loss_curve", [])]


def metrics_table(rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_HEADER)
    for r in rows:
        w.writerow([r["variant"], int(r["seed"]), _num(r["acc1"]), _num(r["acc5"]), _num(r["map"])])
    return buf.getvalue()


def read_metrics_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != METRIC_HEADER:
            raise ParseError(f"{path}: header {header} != {list(METRIC_HEADER)}")
        return [{"variant": r[0], "seed": int(r[1]), "acc1": float(r[2]), "acc5": float(r[3]),
                 "map": float(r[4])} for r in reader]


def matrix_grid(matrix: np.ndarray, row_labels: Sequence[str], col_labels: Sequence[str]) -> str:
    """Delimited grid with a label column and a label header row."""
    matrix = np.asarray(matrix)
    if matrix.shape != (len(row_labels), len(col_labels)):
        raise ValueError("label counts do not match the matrix shape")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["", *col_labels])
    for label, row in zip(row_labels, matrix):
        w.writerow([label, *(_num(x) for x in row)])
    return buf.getvalue()


def read_matrix_grid(path) -> tuple[np.ndarray, list[str], list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty grid")
    cols = rows[0][1:]
    labels = [r[0] for r in rows[1:]]
    data = np.array([[float(x) for x in r[1:]] for r in rows[1:]]).reshape(len(labels), len(cols))
    return data, labels, cols
