"""Run report records and their JSON / CSV serializations.

A report is a nested dict.  CSV output flattens it to dotted column names,
one row per report.  Cells hold the JSON encoding of each value (bare text
for plain strings), so both formats carry identical values.
"""
from __future__ import annotations

import csv
import io
import json
import statistics

SCHEMA = "qsv-report/1"
TIMING_KEYS = ("timing",)


def summarize_times(samples: list[float]) -> dict:
    return {"median": statistics.median(samples), "min": min(samples), "max": max(samples),
            "samples": len(samples)}


def flatten(record: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in record.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, v in flat.items():
        node = out
        *head, last = key.split(".")
        for h in head:
            node = node.setdefault(h, {})
        node[last] = v
    return out


def without_timing(record: dict) -> dict:
    """Drop wall-clock fields, leaving what must be identical across reruns."""
    return {k: v for k, v in flatten(record).items() if not k.startswith(TIMING_KEYS)}


def to_json(records: dict | list[dict]) -> str:
    return json.dumps(records, indent=2, sort_keys=True)


def _cell(v) -> str:
    """JSON text of ``v``; plain strings stay bare unless they would read back as JSON."""
    if isinstance(v, str):
        try:
            json.loads(v)
        except ValueError:
            return v
    return json.dumps(v)


def _uncell(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def to_csv(records: dict | list[dict]) -> str:
    rows = [flatten(r) for r in (records if isinstance(records, list) else [records])]
    columns: list[str] = []
    for r in rows:
        columns.extend(k for k in r if k not in columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) if c in r else "" for c in columns])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return [unflatten({k: _uncell(v) for k, v in zip(header, row) if v != ""}) for row in body]


def dump(records, fmt: str) -> str:
    if fmt == "json":
        return to_json(records)
    if fmt == "csv":
        return to_csv(records)
    raise ValueError(f"unknown report format {fmt!r}")
