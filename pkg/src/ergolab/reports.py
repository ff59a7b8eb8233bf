"""Atomic report artifacts: versioned JSON with a content hash, RFC-4180 CSV.

Reports carry no timestamps and serialize with sorted keys, so equal
(config, seed) runs produce byte-identical files. Non-finite floats are
written as strings ("-inf", "nan") to keep the JSON standard.
"""

import csv
import hashlib
import io
import json
import math
import os
import tempfile

import numpy as np

SCHEMA_VERSION = 1


def sanitize(obj):
    """Recursively coerce numpy scalars/arrays and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, separators=(",", ":"))


def content_hash(content) -> str:
    return hashlib.sha256(canonical_json(content).encode()).hexdigest()


def render_report(config: dict, content: dict) -> dict:
    content = sanitize(content)
    return {
        "schema": SCHEMA_VERSION,
        "config": sanitize(config),
        "content": content,
        "content-hash": content_hash(content),
    }


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode()


def csv_bytes(names, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([sanitize(v) for v in row])
    return buf.getvalue().encode()


def write_atomic(path: str, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial artifact."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, report: dict) -> None:
    write_atomic(path, report_bytes(report))


def write_csv(path: str, names, rows) -> None:
    write_atomic(path, csv_bytes(names, rows))
