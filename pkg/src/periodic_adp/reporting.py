"""CSV and JSON writers for results, gains and the benchmark table."""

import csv
import json
import os

import numpy as np

from .fourier import FourierBasisSpec, FourierCoefficients
from .periodic_system import GainSchedule

TABLE_COLUMNS = ["trial", "controller", "N", "M", "s_f", "zeta", "resets", "stability",
                 "max_gain_error", "failed_stage"]


def _num(v):
    return repr(float(v))


def coefficient_header(N):
    cols = ["const"]
    for k in range(1, N + 1):
        cols += [f"cos{k}", f"sin{k}"]
    return cols


def write_coefficients_csv(coeffs, path, label="K", shape=None):
    """One row per output component; a leading comment records the basis."""
    N, T = coeffs.basis.N, coeffs.basis.period
    with open(path, "w", newline="") as fh:
        meta = f"# label={label} N={N} period={_num(T)}"
        if shape is not None:
            meta += f" rows={shape[0]} cols={shape[1]}"
        fh.write(meta + "\n")
        w = csv.writer(fh)
        w.writerow(["component"] + coefficient_header(N))
        for i, row in enumerate(coeffs.W):
            w.writerow([i] + [_num(v) for v in row])


def read_coefficients_csv(path):
    """Inverse of :func:`write_coefficients_csv`; returns ``(coeffs, meta)``."""
    with open(path) as fh:
        first = fh.readline().lstrip("#").split()
    meta = dict(item.split("=", 1) for item in first)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    spec = FourierBasisSpec.from_period(int(meta["N"]), float(meta["period"]))
    return FourierCoefficients(data[:, 1:], spec), meta


def read_gain_csv(path):
    coeffs, meta = read_coefficients_csv(path)
    return GainSchedule(coeffs, int(meta["rows"]), int(meta["cols"]))


def write_series_csv(path, header, columns):
    data = np.column_stack(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in data:
            w.writerow([_num(v) for v in row])


def write_gain_series(path, ts, kbar, kstar):
    nk = kbar.shape[1]
    header = ["t"] + [f"Kbar_{i + 1}" for i in range(nk)] + [f"Kstar_{i + 1}" for i in range(nk)]
    write_series_csv(path, header, [ts, kbar, kstar])


def write_table_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerow(rep.as_row())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
