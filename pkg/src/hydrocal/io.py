"""Readers and writers for forcing, series and result files.

Timestamps are ISO-8601 hours in UTC (``2000-01-01T00:00Z``); floats are
written with their shortest round-tripping representation so that writing
what was read reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from hydrocal.errors import LengthMismatch, MissingForcing, NegativeFlow, ParseError
from hydrocal.grid import read_grid, write_grid
from hydrocal.model import PARAM_NAMES, Forcing, ParameterField

HOUR = np.timedelta64(1, "h")


def format_time(t) -> str:
    return str(np.datetime64(t, "h").astype("datetime64[m]")) + "Z"


def parse_time(text: str) -> np.datetime64:
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1]
    elif s.endswith("+00:00"):
        s = s[:-6]
    try:
        t = np.datetime64(s)
    except ValueError:
        raise ParseError(f"bad timestamp {text!r}") from None
    if t != t.astype("datetime64[h]"):
        raise ParseError(f"timestamp {text!r} is not on the hour")
    return t.astype("datetime64[h]")


def _num(v) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# gridded forcing
# ---------------------------------------------------------------------------


def write_stacked(path, stack: np.ndarray, start, cellsize: float = 1.0) -> None:
    """One line per hour: ``step,timestamp`` then the row-major grid."""
    stack = np.asarray(stack, dtype=float)
    nt, nr, nc = stack.shape
    start = np.datetime64(start, "h")
    with open(path, "w", newline="") as fh:
        fh.write(f"# nrows {nr}\n# ncols {nc}\n# cellsize_km {_num(cellsize)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "timestamp"] + [f"r{r}c{c}" for r in range(nr) for c in range(nc)])
        for k in range(nt):
            w.writerow([k, format_time(start + k * HOUR)] + [_num(v) for v in stack[k].ravel()])


def read_stacked(path):
    """Returns ``(stack, start, cellsize)``."""
    lines = Path(path).read_text().splitlines()
    meta = {}
    body = []
    for i, ln in enumerate(lines, start=1):
        if ln.startswith("#"):
            parts = ln[1:].split()
            if len(parts) != 2:
                raise ParseError("bad header line", line=i)
            meta[parts[0]] = parts[1]
        elif ln.strip():
            body.append((i, ln))
    try:
        nr, nc = int(meta["nrows"]), int(meta["ncols"])
        cellsize = float(meta.get("cellsize_km", 1.0))
    except (KeyError, ValueError):
        raise ParseError("stacked file needs '# nrows' and '# ncols' headers", field="nrows") from None
    rows = list(csv.reader([ln for _, ln in body]))
    if not rows or rows[0][:2] != ["step", "timestamp"]:
        raise ParseError("missing 'step,timestamp,...' header", line=body[0][0] if body else None)
    data = rows[1:]
    if not data:
        raise MissingForcing(f"{path}: no time steps")
    stack = np.empty((len(data), nr, nc))
    times = []
    for k, row in enumerate(data):
        lineno = body[k + 1][0]
        if len(row) != 2 + nr * nc:
            raise ParseError(f"expected {2 + nr * nc} columns", line=lineno)
        if int(row[0]) != k:
            raise ParseError(f"step index {row[0]} out of sequence", line=lineno, field="step")
        times.append(parse_time(row[1]))
        stack[k] = np.array([float(v) for v in row[2:]]).reshape(nr, nc)
    _check_hourly(times, path)
    return stack, times[0], cellsize


def _check_hourly(times, source):
    t = np.array(times, dtype="datetime64[h]")
    if t.size > 1 and np.any(np.diff(t) != HOUR):
        bad = int(np.flatnonzero(np.diff(t) != HOUR)[0])
        raise MissingForcing(f"{source}: gap or misalignment after {format_time(t[bad])}")


def grid_file_name(t) -> str:
    return np.datetime_as_string(np.datetime64(t, "h"), unit="h").replace("-", "").replace(":", "") + ".asc"


def write_hourly_dir(directory, stack, start, cellsize: float = 1.0) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    start = np.datetime64(start, "h")
    for k, grid in enumerate(np.asarray(stack, dtype=float)):
        write_grid(directory / grid_file_name(start + k * HOUR), grid, cellsize)


def read_hourly_dir(directory):
    """Per-hour grid files named ``YYYYMMDDTHH.asc``; returns ``(stack, start, cellsize)``."""
    files = sorted(Path(directory).glob("*.asc"))
    if not files:
        raise MissingForcing(f"{directory}: no grid files")
    times = []
    grids = []
    cellsize = None
    for f in files:
        stem = f.stem
        try:
            t = np.datetime64(f"{stem[0:4]}-{stem[4:6]}-{stem[6:8]}T{stem[9:11]}", "h")
        except ValueError:
            raise ParseError(f"file name {f.name!r} is not YYYYMMDDTHH.asc") from None
        values, cs, nodata = read_grid(f)
        values = np.asarray(values, dtype=float)
        if np.any(values == nodata):
            raise MissingForcing(f"{f.name}: nodata cells in forcing")
        times.append(t)
        grids.append(values)
        cellsize = cs
    _check_hourly(times, directory)
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise ParseError(f"{directory}: grids of differing shapes {sorted(shapes)}")
    return np.stack(grids), times[0], cellsize


def read_forcing_stack(path):
    """Either form: a directory of hourly grids or a stacked file."""
    p = Path(path)
    return read_hourly_dir(p) if p.is_dir() else read_stacked(p)


def load_forcing(rain_path, pet_path) -> Forcing:
    rain, t0, _ = read_forcing_stack(rain_path)
    pet, t1, _ = read_forcing_stack(pet_path)
    if t0 != t1 or rain.shape != pet.shape:
        raise LengthMismatch("rainfall and PET stacks do not cover the same hours and grid")
    return Forcing(rain, pet, t0)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


def write_discharge(path, q, start) -> None:
    start = np.datetime64(start, "h")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "discharge_m3s"])
        for k, v in enumerate(np.asarray(q, dtype=float)):
            w.writerow([format_time(start + k * HOUR), _num(v)])


def read_discharge(path):
    """Returns ``(q, start)``; rows must be contiguous hours."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["timestamp", "discharge_m3s"]:
        raise ParseError("expected header 'timestamp,discharge_m3s'", line=1)
    times, q = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError("expected 2 columns", line=i)
        times.append(parse_time(row[0]))
        try:
            q.append(float(row[1]))
        except ValueError:
            raise ParseError(f"bad discharge {row[1]!r}", line=i, field="discharge_m3s") from None
    if not q:
        raise LengthMismatch(f"{path}: empty discharge series")
    _check_hourly(times, path)
    q = np.array(q)
    if np.any(q < 0):
        raise NegativeFlow(f"{path}: negative discharge")
    return q, times[0]


def write_signatures(path, rows) -> None:
    """``rows``: iterable of ``(gauge, scope, event_id, signature, value, unit)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gauge", "scope", "event_id", "signature", "value", "unit"])
        for g, scope, eid, sig, val, unit in rows:
            w.writerow([g, scope, "" if eid is None else int(eid), sig, _num(val), unit])


def read_signatures(path):
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [
            (d["gauge"], d["scope"], None if d["event_id"] == "" else int(d["event_id"]), d["signature"],
             float(d["value"]), d["unit"])
            for d in r
        ]


def write_events(path, events, origin, gauge: str = "gauge") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gauge", "event_id", "start", "peak", "end", "merged_from"])
        for i, e in enumerate(events):
            s, p, t = e.timestamps(origin)
            w.writerow([gauge, i, format_time(s), format_time(p), format_time(t), e.merged_from])


def read_events(path, origin):
    """Returns ``[(gauge, event_id, FloodEvent)]`` with indices relative to ``origin``."""
    from hydrocal.segmentation import FloodEvent

    origin = np.datetime64(origin, "h")
    out = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            idx = [int((parse_time(d[k]) - origin) / HOUR) for k in ("start", "peak", "end")]
            out.append((d["gauge"], int(d["event_id"]), FloodEvent(*idx, merged_from=int(d["merged_from"]))))
    return out


def write_event_mask(path, mask, start) -> None:
    start = np.datetime64(start, "h")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "in_event"])
        for k, m in enumerate(np.asarray(mask, dtype=bool)):
            w.writerow([format_time(start + k * HOUR), int(m)])


def write_sobol(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["signature", "parameter", "first_order", "total_order"])
        for sig, par, s, t in rows:
            w.writerow([sig, par, _num(s), _num(t)])


def read_sobol(path):
    with open(path, newline="") as fh:
        return [(d["signature"], d["parameter"], float(d["first_order"]), float(d["total_order"]))
                for d in csv.DictReader(fh)]


ITERATE_FIELDS = ("iter", "J", "j_d", "j_c", "j_f", "J_reg", "grad_norm")


def write_iterates(path, log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITERATE_FIELDS)
        for d in log:
            w.writerow([int(d["iter"])] + [_num(d[k]) for k in ITERATE_FIELDS[1:]])


def read_iterates(path):
    with open(path, newline="") as fh:
        return [{k: (int(v) if k == "iter" else float(v)) for k, v in d.items()} for d in csv.DictReader(fh)]


def write_pareto(path, pareto, selected: int | None = None) -> None:
    k = pareto.thetas.shape[1]
    m = pareto.objectives.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["solution_id"] + [f"theta_{j + 1}" for j in range(k)] + [f"obj_{j + 1}" for j in range(m)]
                   + ["selected"])
        for i in range(len(pareto)):
            w.writerow([i] + [_num(v) for v in pareto.thetas[i]] + [_num(v) for v in pareto.objectives[i]]
                       + [int(i == selected)])


def read_pareto(path):
    """Returns ``(thetas, objectives, selected_index or None)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    ti = [i for i, h in enumerate(head) if h.startswith("theta_")]
    oi = [i for i, h in enumerate(head) if h.startswith("obj_")]
    thetas = np.array([[float(r[i]) for i in ti] for r in rows[1:]])
    objs = np.array([[float(r[i]) for i in oi] for r in rows[1:]])
    sel = [int(r[0]) for r in rows[1:] if r[-1] == "1"]
    return thetas, objs, (sel[0] if sel else None)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_parameters(directory, theta: ParameterField, cellsize: float) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in PARAM_NAMES:
        write_grid(directory / f"{name}.asc", theta[name], cellsize)


def read_parameters(directory) -> ParameterField:
    directory = Path(directory)
    grids = {}
    for name in PARAM_NAMES:
        values, _, _ = read_grid(directory / f"{name}.asc")
        grids[name] = np.asarray(values, dtype=float)
    return ParameterField.from_grids(**grids)
