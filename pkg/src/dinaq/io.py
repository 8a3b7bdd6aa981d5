"""File formats used by the command line: bit-matrix CSVs, traces,
flat config files, and run manifests.

Bit matrices are header-less comma-separated 0/1 integers, one row per
line, UTF-8 with LF line endings, so outputs are diffable and portable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def read_binary_matrix(path) -> np.ndarray:
    """Parse a header-less 0/1 CSV; errors carry the row/column location."""
    path = Path(path)
    rows: list[list[int]] = []
    width = None
    with open(path, encoding="utf-8") as handle:
        for row_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split(",")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise ValueError(
                    f"{path}: row {row_no} has {len(tokens)} fields, expected {width}"
                )
            parsed = []
            for col_no, token in enumerate(tokens, start=1):
                token = token.strip()
                if token not in ("0", "1"):
                    raise ValueError(
                        f"{path}: row {row_no}, column {col_no}: "
                        f"expected 0 or 1, got {token!r}"
                    )
                parsed.append(int(token))
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows, dtype=np.uint8)


def write_binary_matrix(path, matrix) -> None:
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in matrix:
            handle.write(",".join(str(int(v)) for v in row))
            handle.write("\n")


def write_run_trace(path, records) -> None:
    """Per-iteration trace: iteration index, subset ELBO, flattened Q bits."""
    first = records[0].q
    n_items, n_attributes = first.shape
    header = ["t", "elbo"] + [
        f"q{j + 1}_{k + 1}" for j in range(n_items) for k in range(n_attributes)
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for rec in records:
            bits = ",".join(str(int(v)) for v in rec.q.ravel())
            handle.write(f"{rec.t},{rec.elbo!r},{bits}\n")


def write_elbo_trace(path, values) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("t,elbo\n")
        for t, value in enumerate(values, start=1):
            handle.write(f"{t},{float(value)!r}\n")


def write_rates_csv(path, rates, permutations) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("dataset,rate,permutation\n")
        for i, (rate, perm) in enumerate(zip(rates, permutations), start=1):
            perm_txt = "-".join(str(p + 1) for p in perm)
            handle.write(f"{i},{float(rate)!r},{perm_txt}\n")


def read_config_file(path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file; ``#`` starts a comment."""
    path = Path(path)
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
