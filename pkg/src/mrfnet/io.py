"""Plain-text serialization of datasets, estimates and partitioned truths.

Data CSV: header ``x<col>`` per column, integer codes, LF line endings.
Estimate CSV: ``s,l,weight`` rows for the nonzero upper triangle, weights in
17 significant digits so they round-trip exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metrics import PartitionedTruth
from .model import Dataset, SymmetricNetwork


def write_dataset(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{c}" for c in data.columns])
        w.writerows(data.data.tolist())


def read_dataset(path, n_codes: int | None = None) -> Dataset:
    """Read a data CSV; ``n_codes`` defaults to ``max code + 1`` (at least 2)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    try:
        cols = tuple(int(h.lstrip("x")) for h in header)
        X = np.array([[int(v) for v in row] for row in body], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer entry ({exc})") from exc
    if X.ndim != 2 or X.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    if n_codes is None:
        n_codes = max(2, int(X.max()) + 1)
    return Dataset(X, n_codes, columns=cols)


def write_estimate(theta: SymmetricNetwork, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("s,l,weight\n")
        for (s, l), w in sorted(theta.entries.items()):
            fh.write(f"{s},{l},{w:.17g}\n")


def read_estimate(path, p: int) -> SymmetricNetwork:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["s", "l", "weight"]:
            raise ValueError(f"{path}: expected header s,l,weight")
        entries = {}
        for row in reader:
            s, l = sorted((int(row["s"]), int(row["l"])))
            entries[(s, l)] = float(row["weight"])
    return SymmetricNetwork(p, entries)


def truth_to_dict(truth: PartitionedTruth) -> dict:
    return {
        "p_total": truth.theta_full.p,
        "observed": list(truth.observed),
        "hidden": list(truth.hidden),
        "edges": [[s, l, float(w)] for (s, l), w in sorted(truth.theta_full.entries.items())],
    }


def truth_from_dict(raw: dict) -> PartitionedTruth:
    entries = {(int(s), int(l)): float(w) for s, l, w in raw["edges"]}
    return PartitionedTruth(SymmetricNetwork(int(raw["p_total"]), entries), raw["observed"], raw["hidden"])


def write_truth(truth: PartitionedTruth, path) -> None:
    Path(path).write_text(json.dumps(truth_to_dict(truth), indent=2) + "\n", encoding="utf-8")


def read_truth(path) -> PartitionedTruth:
    return truth_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
