"""BEV geometry: ego-frame poses, the square BEV grid, and box rasterization.

Frame convention: x forward, y left, yaw counter-clockwise from +x.

Grid indexing is row-major with the row axis along ego x and the column axis
along ego y; index (0, 0) is the cell at the (-x, -y) corner of the grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np


def normalize_angle(yaw: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.remainder(float(yaw), 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


class ObjectClass(enum.IntEnum):
    """Cell / object categories. The integer values double as label codes."""

    Background = 0
    Vehicle = 1
    Pedestrian = 2
    Bike = 3
    Others = 4

    @classmethod
    def parse(cls, name: str | int | ObjectClass) -> ObjectClass:
        if isinstance(name, cls):
            return name
        if isinstance(name, int):
            return cls(name)
        key = str(name).strip().lower()
        try:
            return _CLASS_ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown object class {name!r}") from None


# Detector taxonomies are finer than the predictor's; map common labels down.
_CLASS_ALIASES = {
    "background": ObjectClass.Background,
    "vehicle": ObjectClass.Vehicle,
    "car": ObjectClass.Vehicle,
    "truck": ObjectClass.Vehicle,
    "bus": ObjectClass.Vehicle,
    "pedestrian": ObjectClass.Pedestrian,
    "bike": ObjectClass.Bike,
    "cyclist": ObjectClass.Bike,
    "bicycle": ObjectClass.Bike,
    "others": ObjectClass.Others,
    "other": ObjectClass.Others,
}


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.yaw)):
            raise ValueError(f"non-finite pose {self}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))


def ego_transform(world_pose: Pose2, ego_pose: Pose2) -> Pose2:
    """Express a world-frame pose in the frame of ``ego_pose``."""
    dx = world_pose.x - ego_pose.x
    dy = world_pose.y - ego_pose.y
    c, s = math.cos(ego_pose.yaw), math.sin(ego_pose.yaw)
    return Pose2(c * dx + s * dy, -s * dx + c * dy, world_pose.yaw - ego_pose.yaw)


def ego_to_world(ego_relative: Pose2, ego_pose: Pose2) -> Pose2:
    """Inverse of :func:`ego_transform`."""
    c, s = math.cos(ego_pose.yaw), math.sin(ego_pose.yaw)
    return Pose2(
        ego_pose.x + c * ego_relative.x - s * ego_relative.y,
        ego_pose.y + s * ego_relative.x + c * ego_relative.y,
        ego_relative.yaw + ego_pose.yaw,
    )


@dataclass(frozen=True)
class GridSpec:
    """Square BEV grid centred on the ego vehicle.

    Args:
        cell_size: edge length of one cell in meters.
        half_extent: distance from the ego origin to the grid border in meters.
    """

    cell_size: float = 0.25
    half_extent: float = 32.0

    def __post_init__(self):
        if not (self.cell_size > 0 and self.half_extent > 0):
            raise ValueError("cell_size and half_extent must be positive")
        if not (math.isfinite(self.cell_size) and math.isfinite(self.half_extent)):
            raise ValueError("grid parameters must be finite")
        n = round(2.0 * self.half_extent / self.cell_size)
        span = 2.0 * self.half_extent
        if n < 1 or abs(n * self.cell_size - span) > 1e-9 * span:
            raise ValueError(
                f"2*half_extent={span} is not an integer multiple of cell_size={self.cell_size}"
            )

    @property
    def cells_per_side(self) -> int:
        return round(2.0 * self.half_extent / self.cell_size)

    @property
    def shape(self) -> tuple[int, int]:
        n = self.cells_per_side
        return n, n

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell-centre coordinates along either axis (same for x and y)."""
        return -self.half_extent + (np.arange(self.cells_per_side) + 0.5) * self.cell_size


class CellIndex(NamedTuple):
    row: int
    col: int


def cell_center(idx: CellIndex | tuple[int, int], grid: GridSpec) -> tuple[float, float]:
    row, col = idx
    n = grid.cells_per_side
    if not (0 <= row < n and 0 <= col < n):
        raise IndexError(f"cell {tuple(idx)} outside {n}x{n} grid")
    return (
        -grid.half_extent + (row + 0.5) * grid.cell_size,
        -grid.half_extent + (col + 0.5) * grid.cell_size,
    )


def point_to_cell(x: float, y: float, grid: GridSpec) -> CellIndex | None:
    """Quantize an ego-frame point; ``None`` when it falls outside the grid."""
    row = math.floor((x + grid.half_extent) / grid.cell_size)
    col = math.floor((y + grid.half_extent) / grid.cell_size)
    n = grid.cells_per_side
    if 0 <= row < n and 0 <= col < n:
        return CellIndex(row, col)
    return None


@dataclass(frozen=True)
class Obb3:
    center: tuple[float, float, float]
    size: tuple[float, float, float]  # length, width, height
    yaw: float = 0.0

    def __post_init__(self):
        vals = (*self.center, *self.size, self.yaw)
        if len(self.center) != 3 or len(self.size) != 3:
            raise ValueError("Obb3 needs a 3-vector center and size")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("Obb3 fields must be finite")
        if min(self.size) <= 0:
            raise ValueError(f"box sizes must be positive, got {self.size}")


@dataclass(frozen=True)
class ObbBev:
    center: tuple[float, float]
    size: tuple[float, float]  # length (along yaw), width
    yaw: float = 0.0

    def __post_init__(self):
        if min(self.size) <= 0:
            raise ValueError(f"box sizes must be positive, got {self.size}")


def project_to_bev(box: Obb3) -> ObbBev:
    return ObbBev(
        center=(box.center[0], box.center[1]),
        size=(box.size[0], box.size[1]),
        yaw=box.yaw,
    )


_EMPTY_CELLS = np.empty((0, 2), dtype=np.int64)
_EMPTY_CELLS.setflags(write=False)


_AXIS_SNAP = 1e-12


def box_axes(yaw: float) -> tuple[float, float]:
    """Unit length axis ``(cos, sin)`` of a box, canonical under half turns.

    A rectangle is unchanged by a rotation of pi, so the axis is flipped into
    the half-plane cos > 0 (or cos == 0, sin > 0). Components within 1e-12 of
    zero are snapped so that axis-aligned boxes test cell centres exactly.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    if abs(s) < _AXIS_SNAP:
        c, s = 1.0, 0.0
    elif abs(c) < _AXIS_SNAP:
        c, s = 0.0, 1.0
    elif c < 0:
        c, s = -c, -s
    return c, s


def rasterize(obb: ObbBev, grid: GridSpec) -> np.ndarray:
    """Cells whose centre lies in the closed rotated rectangle ``obb``.

    Returns an ``(N, 2)`` int array of ``(row, col)`` pairs in row-major
    order. Parts of the box outside the grid are clipped; the result may be
    empty.
    """
    cx, cy = obb.center
    hl, hw = 0.5 * obb.size[0], 0.5 * obb.size[1]
    c, s = box_axes(obb.yaw)
    ex = abs(hl * c) + abs(hw * s)
    ey = abs(hl * s) + abs(hw * c)

    h, cs, n = grid.half_extent, grid.cell_size, grid.cells_per_side
    # candidate window: every cell whose centre can lie within the box's axis-aligned hull
    r0 = max(0, math.floor((cx - ex + h) / cs - 0.5))
    r1 = min(n, math.ceil((cx + ex + h) / cs - 0.5) + 1)
    c0 = max(0, math.floor((cy - ey + h) / cs - 0.5))
    c1 = min(n, math.ceil((cy + ey + h) / cs - 0.5) + 1)
    if r0 >= r1 or c0 >= c1:
        return _EMPTY_CELLS

    centers = grid.centers
    dx = centers[r0:r1] - cx
    dy = centers[c0:c1] - cy
    # products on the 1-D axes, then one broadcast per rotated coordinate
    along = (dx * c)[:, None] + (dy * s)[None, :]
    across = (dy * c)[None, :] - (dx * s)[:, None]
    np.abs(along, out=along)
    np.abs(across, out=across)
    inside = along <= hl
    inside &= across <= hw
    rows, cols = np.nonzero(inside)
    if rows.size == 0:
        return _EMPTY_CELLS
    out = np.empty((rows.size, 2), dtype=np.int64)
    out[:, 0] = rows
    out[:, 0] += r0
    out[:, 1] = cols
    out[:, 1] += c0
    return out


# padded batch work above this many elements goes box by box instead
_BATCH_LIMIT = 2_000_000


def rasterize_many(obbs: list[ObbBev], grid: GridSpec) -> list[np.ndarray]:
    """:func:`rasterize` for many boxes in one vectorized pass.

    Uses the same candidate windows and the same per-cell arithmetic, so the
    result for each box is identical to calling :func:`rasterize` on it.
    """
    if not obbs:
        return []
    # trig through math, not numpy, so each box's axes match rasterize() bit for bit
    params = np.array([(*o.center, *o.size, *box_axes(o.yaw)) for o in obbs], dtype=float)
    cx, cy = params[:, 0], params[:, 1]
    hl, hw = 0.5 * params[:, 2], 0.5 * params[:, 3]
    c, s = params[:, 4], params[:, 5]
    ex = np.abs(hl * c) + np.abs(hw * s)
    ey = np.abs(hl * s) + np.abs(hw * c)

    h, cs, n = grid.half_extent, grid.cell_size, grid.cells_per_side
    r0 = np.maximum(0, np.floor((cx - ex + h) / cs - 0.5)).astype(np.int64)
    r1 = np.minimum(n, np.ceil((cx + ex + h) / cs - 0.5) + 1).astype(np.int64)
    c0 = np.maximum(0, np.floor((cy - ey + h) / cs - 0.5)).astype(np.int64)
    c1 = np.minimum(n, np.ceil((cy + ey + h) / cs - 0.5) + 1).astype(np.int64)
    nr = np.maximum(r1 - r0, 0)
    nc = np.maximum(c1 - c0, 0)
    wr, wc = int(nr.max()), int(nc.max())
    if wr == 0 or wc == 0:
        return [_EMPTY_CELLS] * len(obbs)
    if len(obbs) * wr * wc > _BATCH_LIMIT:
        return [rasterize(o, grid) for o in obbs]

    ri = r0[:, None] + np.arange(wr)[None, :]
    ci = c0[:, None] + np.arange(wc)[None, :]
    centers = grid.centers
    dx = centers[np.minimum(ri, n - 1)] - cx[:, None]
    dy = centers[np.minimum(ci, n - 1)] - cy[:, None]
    # padding outside a box's own window becomes inf/nan and fails both tests
    dx[ri >= r1[:, None]] = np.inf
    dy[ci >= c1[:, None]] = np.inf
    with np.errstate(invalid="ignore"):
        along = (dx * c[:, None])[:, :, None] + (dy * s[:, None])[:, None, :]
        across = (dy * c[:, None])[:, None, :] - (dx * s[:, None])[:, :, None]
        np.abs(along, out=along)
        np.abs(across, out=across)
        inside = along <= hl[:, None, None]
        inside &= across <= hw[:, None, None]

    b, i, j = np.nonzero(inside)
    cells = np.empty((b.size, 2), dtype=np.int64)
    cells[:, 0] = i + r0[b]
    cells[:, 1] = j + c0[b]
    ends = np.cumsum(np.bincount(b, minlength=len(obbs))).tolist()
    starts = [0, *ends[:-1]]
    return [cells[a:z] if z > a else _EMPTY_CELLS for a, z in zip(starts, ends)]


def cells_to_set(cells: np.ndarray) -> set[CellIndex]:
    return {CellIndex(int(r), int(c)) for r, c in cells}
