"""CSV ingestion and JSON persistence of event logs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError, InconsistentEventError
from .events import EventLog, QuadraticEvent
from .linalg import Dataset

INTERCEPT_NAME = "(Intercept)"
EVENT_LOG_SCHEMA = "selinf.event_log/1"


def load_csv(path, response_column: str, intercept: bool = False) -> Dataset:
    """Read a headered numeric CSV; every non-response column becomes a covariate."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        seen = set()
        for h in header:
            if h in seen:
                raise InputError(f"{path}: duplicate column name {h!r} in header")
            seen.add(h)
        if response_column not in header:
            raise InputError(f"{path}: response column {response_column!r} not found in {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            values = []
            for col, cell in zip(header, row):
                try:
                    val = float(cell)
                except ValueError:
                    raise InputError(
                        f"{path}: non-numeric value {cell!r} at row {lineno}, column {col!r}"
                    ) from None
                if not math.isfinite(val):
                    raise InputError(f"{path}: non-finite value at row {lineno}, column {col!r}")
                values.append(val)
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    M = np.array(rows)
    r = header.index(response_column)
    covariates = [j for j in range(len(header)) if j != r]
    names = [header[j] for j in covariates]
    X = M[:, covariates]
    if intercept:
        if INTERCEPT_NAME in names:
            raise InputError(f"{path}: column {INTERCEPT_NAME!r} already present")
        X = np.column_stack([np.ones(len(rows)), X]) if covariates else np.ones((len(rows), 1))
        names = [INTERCEPT_NAME] + names
    return Dataset(M[:, r], X, tuple(names))


def write_csv(data: Dataset, path, response_name: str = "y", skip_intercept: bool = True) -> None:
    cols = [j for j, nm in enumerate(data.names) if not (skip_intercept and nm == INTERCEPT_NAME)]
    if response_name in [data.names[j] for j in cols]:
        raise InputError(f"response name {response_name!r} clashes with a covariate")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([response_name] + [data.names[j] for j in cols])
        for i in range(data.n):
            w.writerow([repr(float(data.y[i]))] + [repr(float(data.X[i, j])) for j in cols])


def json_float(x: float):
    """JSON-safe float: infinities become the strings "inf"/"-inf", NaN becomes null."""
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def event_log_to_dict(data: Dataset, log: EventLog, meta: Optional[dict] = None) -> dict:
    n = data.n
    rows, cols = np.tril_indices(n)
    return {
        "schema": EVENT_LOG_SCHEMA,
        "dataset_hash": data.content_hash(),
        "n": n,
        "columns": list(data.names),
        "selected": data.subset_names(log.selected),
        "selected_indices": list(log.selected),
        "trace": list(log.trace),
        "meta": meta or {},
        "events": [
            {"label": ev.label, "c": ev.c, "A_lower": ev.A[rows, cols].tolist()}
            for ev in log.events
        ],
    }


def event_log_from_dict(doc: dict, data: Dataset) -> EventLog:
    if doc.get("schema") != EVENT_LOG_SCHEMA:
        raise InputError(f"unsupported event log schema {doc.get('schema')!r}")
    if doc.get("dataset_hash") != data.content_hash():
        raise InconsistentEventError("event log was produced from a different dataset (hash mismatch); refusing")
    n = data.n
    rows, cols = np.tril_indices(n)
    events = []
    for k, item in enumerate(doc["events"]):
        lower = np.asarray(item["A_lower"], dtype=float)
        if lower.shape != rows.shape:
            raise InputError(f"event {k}: expected {rows.size} lower-triangle entries, got {lower.size}")
        A = np.zeros((n, n))
        A[rows, cols] = lower
        A[cols, rows] = lower
        events.append(QuadraticEvent(A, item["c"], item["label"]))
    return EventLog(events=events, selected=tuple(doc["selected_indices"]), trace=list(doc["trace"]))


def save_event_log(path, data: Dataset, log: EventLog, meta: Optional[dict] = None) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(event_log_to_dict(data, log, meta), fh)
        fh.write("\n")


def load_event_log(path, data: Dataset) -> EventLog:
    try:
        with Path(path).open(encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read event log {path}: {exc}") from exc
    return event_log_from_dict(doc, data)
