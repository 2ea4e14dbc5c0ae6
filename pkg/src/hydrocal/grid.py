"""D8 drainage topology on a regular lattice.

Flow codes follow a fixed compass convention, 1 = N then clockwise::

    8 1 2
    7 . 3
    6 5 4

Row 0 is the northern edge of the raster. A cell whose code points off the
grid or into a nodata cell is a local outlet.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hydrocal.errors import CycleDetected, InactiveOutlet, InvalidCode, ParseError, ShapeMismatch

# (drow, dcol) for codes 1..8
D8_OFFSETS = {
    1: (-1, 0),
    2: (-1, 1),
    3: (0, 1),
    4: (1, 1),
    5: (1, 0),
    6: (1, -1),
    7: (0, -1),
    8: (-1, -1),
}

GRID_HEADER = ("ncols", "nrows", "cellsize_km", "nodata_value")


@dataclass(frozen=True)
class D8Raster:
    codes: np.ndarray
    cellsize: float = 1.0
    nodata: np.ndarray | None = None

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2 or codes.size == 0:
            raise ShapeMismatch("D8 raster must be a non-empty 2-D grid")
        object.__setattr__(self, "codes", codes.astype(np.int64))
        if self.nodata is None:
            object.__setattr__(self, "nodata", np.zeros(codes.shape, dtype=bool))
        else:
            mask = np.asarray(self.nodata, dtype=bool)
            if mask.shape != codes.shape:
                raise ShapeMismatch("nodata mask shape differs from code grid")
            object.__setattr__(self, "nodata", mask)
        if not self.cellsize > 0:
            raise ShapeMismatch("cellsize must be positive")

    @property
    def nrows(self) -> int:
        return self.codes.shape[0]

    @property
    def ncols(self) -> int:
        return self.codes.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape


@dataclass(frozen=True)
class DrainagePlan:
    """Validated flow topology.

    ``downstream`` and ``order`` use flat row-major cell indices; -1 marks a
    cell without a downstream neighbour (or an inactive cell).
    """

    shape: tuple[int, int]
    cellsize: float
    active: np.ndarray
    downstream: np.ndarray
    order: np.ndarray
    drained_area: np.ndarray

    @property
    def cell_area(self) -> float:
        return self.cellsize * self.cellsize

    @property
    def n_active(self) -> int:
        return int(self.order.size)

    def flat(self, cell) -> int:
        r, c = cell
        return int(r) * self.shape[1] + int(c)

    def cell(self, flat_index: int) -> tuple[int, int]:
        return divmod(int(flat_index), self.shape[1])

    def position(self) -> np.ndarray:
        """Map flat index -> position in topological order (-1 if inactive)."""
        pos = np.full(self.shape[0] * self.shape[1], -1, dtype=np.int64)
        pos[self.order] = np.arange(self.order.size)
        return pos

    def downstream_positions(self) -> np.ndarray:
        """Downstream links expressed as positions in topological order."""
        pos = self.position()
        down = self.downstream[self.order]
        return np.where(down >= 0, pos[np.maximum(down, 0)], -1)


@dataclass(frozen=True)
class Catchment:
    outlet: tuple[int, int]
    members: np.ndarray  # sorted flat indices
    gauge_id: str = "gauge"
    mask: np.ndarray = field(default=None, repr=False)

    @property
    def n_cells(self) -> int:
        return int(self.members.size)


def _target(r, c, code, shape):
    dr, dc = D8_OFFSETS[code]
    rr, cc = r + dr, c + dc
    if 0 <= rr < shape[0] and 0 <= cc < shape[1]:
        return rr, cc
    return None


def build_drainage_plan(d8: D8Raster) -> DrainagePlan:
    nrows, ncols = d8.shape
    ncell = nrows * ncols
    active = ~d8.nodata
    downstream = np.full(ncell, -1, dtype=np.int64)

    for r in range(nrows):
        for c in range(ncols):
            if not active[r, c]:
                continue
            code = int(d8.codes[r, c])
            if code not in D8_OFFSETS:
                raise InvalidCode(f"cell ({r}, {c}) carries flow code {code}, expected 1..8")
            tgt = _target(r, c, code, d8.shape)
            if tgt is not None and active[tgt]:
                downstream[r * ncols + c] = tgt[0] * ncols + tgt[1]

    # Kahn's algorithm; the heap makes ties resolve by row-major index.
    indeg = np.zeros(ncell, dtype=np.int64)
    for i in np.flatnonzero(active.ravel()):
        if downstream[i] >= 0:
            indeg[downstream[i]] += 1
    heap = [int(i) for i in np.flatnonzero(active.ravel()) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        j = downstream[i]
        if j >= 0:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, int(j))

    n_active = int(active.sum())
    if len(order) != n_active:
        stuck = sorted(set(np.flatnonzero(active.ravel()).tolist()) - set(order))
        cells = [divmod(i, ncols) for i in stuck[:5]]
        raise CycleDetected(f"flow codes form a loop through cells {cells}")

    order = np.asarray(order, dtype=np.int64)
    area = np.zeros(ncell)
    cell_area = d8.cellsize * d8.cellsize
    area[order] = cell_area
    for i in order:
        j = downstream[i]
        if j >= 0:
            area[j] += area[i]
    drained = np.where(active.ravel(), area, np.nan).reshape(d8.shape)

    return DrainagePlan(
        shape=d8.shape,
        cellsize=float(d8.cellsize),
        active=active,
        downstream=downstream,
        order=order,
        drained_area=drained,
    )


def topo_order(plan: DrainagePlan) -> list[tuple[int, int]]:
    return [plan.cell(i) for i in plan.order]


def delineate_catchment(plan: DrainagePlan, outlet, gauge_id: str = "gauge") -> Catchment:
    r, c = outlet
    if not (0 <= r < plan.shape[0] and 0 <= c < plan.shape[1]) or not plan.active[r, c]:
        raise InactiveOutlet(f"outlet {outlet} is not an active cell")
    target = plan.flat(outlet)
    inside = np.zeros(plan.downstream.size, dtype=bool)
    inside[target] = True
    # Downstream cells come later in topological order, so a reverse sweep
    # settles membership in one pass.
    for i in plan.order[::-1]:
        j = plan.downstream[i]
        if j >= 0 and inside[j]:
            inside[i] = True
    members = np.flatnonzero(inside)
    return Catchment(
        outlet=(int(r), int(c)),
        members=members,
        gauge_id=gauge_id,
        mask=inside.reshape(plan.shape),
    )


def _format_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _parse_number(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


def write_grid(path, values: np.ndarray, cellsize: float, nodata_value=-9999) -> None:
    """Write a grid in the plain-text raster format.

    Integer arrays are written as integers and float arrays with the
    shortest round-tripping representation, so read -> write is byte-stable.
    """
    values = np.asarray(values)
    nrows, ncols = values.shape
    lines = [
        f"ncols {ncols}",
        f"nrows {nrows}",
        f"cellsize_km {_format_value(float(cellsize))}",
        f"nodata_value {_format_value(nodata_value)}",
    ]
    as_int = np.issubdtype(values.dtype, np.integer)
    for row in values:
        if as_int:
            lines.append(" ".join(str(int(v)) for v in row))
        else:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid(path):
    """Read a plain-text raster; returns ``(values, cellsize, nodata_value)``."""
    text = Path(path).read_text().splitlines()
    header = {}
    for lineno, key in enumerate(GRID_HEADER, start=1):
        if lineno > len(text):
            raise ParseError("truncated header", line=lineno, field=key)
        parts = text[lineno - 1].split()
        if len(parts) != 2 or parts[0].lower() != key:
            raise ParseError(f"expected '{key} <value>'", line=lineno, field=key)
        try:
            header[key] = _parse_number(parts[1])
        except ValueError:
            raise ParseError(f"bad number {parts[1]!r}", line=lineno, field=key) from None
    ncols, nrows = header["ncols"], header["nrows"]
    if not isinstance(ncols, int) or not isinstance(nrows, int) or ncols <= 0 or nrows <= 0:
        raise ParseError("grid dimensions must be positive integers", line=1)
    rows = [ln.split() for ln in text[len(GRID_HEADER):] if ln.strip()]
    if len(rows) != nrows:
        raise ParseError(f"expected {nrows} data rows, found {len(rows)}")
    tokens = [t for row in rows for t in row]
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise ParseError(f"expected {ncols} values", line=len(GRID_HEADER) + i + 1)
    try:
        ints = [int(t) for t in tokens]
        values = np.asarray(ints, dtype=np.int64).reshape(nrows, ncols)
    except ValueError:
        values = np.asarray([float(t) for t in tokens]).reshape(nrows, ncols)
    return values, float(header["cellsize_km"]), header["nodata_value"]


def read_d8(path) -> D8Raster:
    codes, cellsize, nodata_value = read_grid(path)
    return D8Raster(codes=codes, cellsize=cellsize, nodata=codes == nodata_value)


def write_d8(path, d8: D8Raster, nodata_value: int = 0) -> None:
    codes = np.where(d8.nodata, nodata_value, d8.codes).astype(np.int64)
    write_grid(path, codes, d8.cellsize, nodata_value)
