"""Text serialization for records, states, joint spectra and results.

Writers return strings so callers control where and when files land.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .counting import CountRecord
from .errors import ValidationError
from .polarization import TwoQubitState
from .spectral import JointSpectrum, SpectralGrid

RECORD_COLUMNS = ("setting_id", "theta1_deg", "theta2_deg", "time_s", "counts")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def to_jsonable(obj):
    """Recursively convert numpy and dataclass values into plain JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


# count records

def records_to_csv(records: Sequence[CountRecord]) -> str:
    return _csv_text(
        RECORD_COLUMNS,
        ((r.setting_id, r.theta1, r.theta2, r.time_s, r.counts) for r in records),
    )


def records_from_csv(text: str) -> list[CountRecord]:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(RECORD_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValidationError(f"count CSV lacks columns {sorted(missing)}")
    out = []
    for row in reader:
        out.append(
            CountRecord(
                row["setting_id"],
                float(row["theta1_deg"]) if row["theta1_deg"] else math.nan,
                float(row["theta2_deg"]) if row["theta2_deg"] else math.nan,
                float(row["time_s"]),
                float(row["counts"]),
            )
        )
    return out


def records_to_json(records: Sequence[CountRecord]) -> str:
    return dumps({"records": [asdict(r) for r in records]})


def records_from_json(text: str) -> list[CountRecord]:
    data = json.loads(text)
    return [
        CountRecord(
            d["setting_id"],
            math.nan if d["theta1"] is None else d["theta1"],
            math.nan if d["theta2"] is None else d["theta2"],
            d["time_s"],
            d["counts"],
            d.get("expected_rate"),
        )
        for d in data["records"]
    ]


def load_records(path) -> list[CountRecord]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return records_from_json(text) if path.suffix == ".json" else records_from_csv(text)


# two-qubit states

def state_to_json(state: TwoQubitState, **metadata) -> str:
    m = state.matrix
    return dumps(
        {
            "basis": ["HH", "HV", "VH", "VV"],
            "matrix": [[[m[i, j].real, m[i, j].imag] for j in range(4)] for i in range(4)],
            "label": state.label,
            "kind": state.kind,
            "metadata": metadata,
        }
    )


def state_from_json(text: str) -> TwoQubitState:
    data = json.loads(text)
    arr = np.array(data["matrix"], dtype=float)
    if arr.shape != (4, 4, 2):
        raise ValidationError("state matrix must be 4x4 [re, im] pairs")
    return TwoQubitState(arr[..., 0] + 1j * arr[..., 1], data.get("label", ""))


def matrix_to_csv(m: np.ndarray) -> str:
    return _csv_text(["", "HH", "HV", "VH", "VV"], ([lab, *row] for lab, row in zip(["HH", "HV", "VH", "VV"], m)))


# joint spectra

def _grid_csv(values: np.ndarray, grid: SpectralGrid) -> str:
    rows = [["signal_nm", *grid.signal_nm], ["idler_nm", *grid.idler_nm]]
    rows += [list(r) for r in values]
    return _csv_text(None, rows)


def jsa_to_csv(j: JointSpectrum) -> dict[str, str]:
    """Three signal-major grids: JSA real part, imaginary part and JSI."""
    return {
        "jsa_real.csv": _grid_csv(j.amplitude.real, j.grid),
        "jsa_imag.csv": _grid_csv(j.amplitude.imag, j.grid),
        "jsi.csv": _grid_csv(j.intensity, j.grid),
    }


def grid_from_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0][0] != "signal_nm" or rows[1][0] != "idler_nm":
        raise ValidationError("grid CSV must start with signal_nm and idler_nm rows")
    s = np.array(rows[0][1:], dtype=float)
    i = np.array(rows[1][1:], dtype=float)
    values = np.array(rows[2:], dtype=float)
    if values.shape != (s.size, i.size):
        raise ValidationError("grid CSV matrix shape does not match its axes")
    return s, i, values


def jsa_from_csv(real_text: str, imag_text: str) -> JointSpectrum:
    s, i, re = grid_from_csv(real_text)
    _, _, im = grid_from_csv(imag_text)
    grid = SpectralGrid((s[0], s[-1]), s.size, (i[0], i[-1]), i.size)
    return JointSpectrum(grid, re + 1j * im, True)


def jsa_to_json(j: JointSpectrum, **metadata) -> str:
    g = j.grid
    return dumps(
        {
            "signal_nm": g.signal_nm,
            "idler_nm": g.idler_nm,
            "jsa_real": j.amplitude.real,
            "jsa_imag": j.amplitude.imag,
            "normalized": j.normalized,
            "order": "signal-major",
            "metadata": metadata,
        }
    )


def jsa_from_json(text: str) -> JointSpectrum:
    d = json.loads(text)
    s = np.array(d["signal_nm"])
    i = np.array(d["idler_nm"])
    grid = SpectralGrid((s[0], s[-1]), s.size, (i[0], i[-1]), i.size)
    amp = np.array(d["jsa_real"]) + 1j * np.array(d["jsa_imag"])
    return JointSpectrum(grid, amp, bool(d.get("normalized", True)))


def table_to_csv(columns: Sequence[str], rows) -> str:
    return _csv_text(columns, rows)


def table_to_json(columns: Sequence[str], rows) -> str:
    return dumps({"columns": list(columns), "rows": [list(r) for r in rows]})
