"""File formats: input series, sample records, GP realizations, tables."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .sampler import SampleStore, record_fields


def read_series(path, column=None, header: bool = True, log: bool = False) -> np.ndarray:
    """Read one column of a delimited text file.

    ``column`` is a header name or a zero-based index; by default the column
    named ``y`` if present, else the first one.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise DataError(f"cannot read data file {p}: {exc}") from exc
    sample = text[:4096]
    try:
        dialect = csv.Sniffer().sniff(sample, delimiters=",\t; ")
        delimiter = dialect.delimiter
    except csv.Error:
        delimiter = ","
    rows = [r for r in csv.reader(text.splitlines(), delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"data file {p} is empty")
    idx = 0
    if header:
        names = [c.strip().strip('"') for c in rows[0]]
        rows = rows[1:]
        if column is None:
            idx = names.index("y") if "y" in names else 0
        elif isinstance(column, str) and not column.isdigit():
            if column not in names:
                raise DataError(f"column {column!r} not in header {names}")
            idx = names.index(column)
        else:
            idx = int(column)
    elif column is not None:
        idx = int(column)
    try:
        y = np.array([float(r[idx]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError(f"non-numeric or missing value in {p}: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise DataError(f"non-finite values in {p}")
    if log:
        if np.any(y <= 0):
            raise DataError("log transform requested but the series has non-positive values")
        y = np.log(y)
    return y


def write_series(path, y, header: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{header}\n")
        for v in y:
            fh.write(f"{float(v)!r}\n")


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_records(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_records(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def write_f(path, store: SampleStore) -> None:
    """One row per (chain, iteration, lag): ``chain,iteration,lag,f_1..f_n``."""
    with open(path, "w") as fh:
        for rec, f in zip(store.records, store.f):
            for k, row in enumerate(f):
                vals = ",".join(repr(float(v)) for v in row)
                fh.write(f"{rec['chain']},{rec['iteration']},{k + 1},{vals}\n")


def read_f(path, records, n_lags: int) -> list[np.ndarray]:
    rows = {}
    with open(path) as fh:
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) < 3:
                continue
            key = (int(parts[0]), int(parts[1]))
            rows.setdefault(key, {})[int(parts[2])] = np.array([float(v) for v in parts[3:]])
    out = []
    for rec in records:
        by_lag = rows.get((rec["chain"], rec["iteration"]))
        if by_lag is None or len(by_lag) != n_lags:
            raise DataError(f"GP realizations missing for chain {rec['chain']} iteration {rec['iteration']}")
        out.append(np.vstack([by_lag[l] for l in range(1, n_lags + 1)]))
    return out


def n_lags_from_records(records) -> int:
    return sum(1 for k in records[0] if k.startswith("kappa_"))


def load_store(record_paths, f_paths=None) -> SampleStore:
    stores = []
    f_paths = list(f_paths) if f_paths is not None else [None] * len(record_paths)
    for rp, fp in zip(record_paths, f_paths):
        recs = read_records(rp)
        if not recs:
            continue
        L = n_lags_from_records(recs)
        missing = set(record_fields(L)) - set(recs[0])
        if missing:
            raise DataError(f"{rp}: records lack fields {sorted(missing)}")
        f = read_f(fp, recs, L) if fp is not None and Path(fp).exists() else None
        stores.append(SampleStore(L, recs, f))
    if not stores:
        raise DataError("no sample records found")
    return SampleStore.merge(stores)


def write_table(path_or_fh, rows: list[dict], columns: list[str]) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])

    if hasattr(path_or_fh, "write"):
        emit(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="") as fh:
            emit(fh)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
