"""Deterministic file output helpers.

All writers produce byte-identical files for identical inputs: floats are
formatted with 17 significant digits (round-trippable), JSON keys are
sorted, and nothing stamps wall-clock time into the output.
"""

from __future__ import annotations

import json
import os

import numpy as np

FLOAT_FMT = "%.17g"


def _ensure_dir(path: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def write_columns_csv(path: str, header, columns):
    """CSV from equal-length 1-D numeric columns."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    for c in cols:
        if len(c) != n:
            raise ValueError("columns must have equal length")
    _ensure_dir(path)
    data = np.column_stack(cols)
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        np.savetxt(f, data, fmt=FLOAT_FMT, delimiter=",")


def write_rows_csv(path: str, header, rows):
    """CSV from row tuples that may mix numbers and strings."""
    _ensure_dir(path)
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            parts = []
            for v in row:
                if isinstance(v, str):
                    parts.append(v)
                elif isinstance(v, (int, np.integer)):
                    parts.append(str(int(v)))
                else:
                    parts.append(FLOAT_FMT % float(v))
            f.write(",".join(parts) + "\n")


def write_json(path: str, obj):
    _ensure_dir(path)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def write_ndjson(path: str, records):
    _ensure_dir(path)
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def write_sidecar(data_path: str, config_sha256: str, master_seed: int,
                  code_version: str, extra: dict | None = None):
    """Provenance sidecar <file>.meta.json next to a data file."""
    meta = {
        "config_sha256": config_sha256,
        "master_seed": int(master_seed),
        "code_version": code_version,
    }
    if extra:
        meta.update(extra)
    write_json(data_path + ".meta.json", meta)
