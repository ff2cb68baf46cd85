"""Bring detector boxes onto the predicted BEV grid."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError
from .geometry import GridSpec, Obb3, ObjectClass, project_to_bev, rasterize, rasterize_many
from .prediction import PredictedCellMap


class Provenance(str, enum.Enum):
    simulated = "simulated"
    injected = "injected"
    ingested = "ingested"


class Region(str, enum.Enum):
    FrontNear = "FrontNear"
    FrontFar = "FrontFar"
    Other = "Other"


@dataclass(frozen=True)
class Detection:
    detection_id: str
    object_class: ObjectClass
    box: Obb3
    confidence: float = 1.0
    provenance: Provenance = Provenance.simulated
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.object_class == ObjectClass.Background:
            raise ValueError("a detection cannot be Background")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class RegionConfig:
    """How detections are bucketed into front-near / front-far.

    ``front_cone_deg`` of ``None`` means the whole x > 0 half-plane is "front";
    otherwise the bearing from the LiDAR must be within half the cone angle.
    """

    near_distance: float = 8.0
    front_cone_deg: float | None = None
    lidar_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.near_distance) and self.near_distance > 0):
            raise ConfigError("near_distance must be positive")
        if self.front_cone_deg is not None and not 0 < self.front_cone_deg <= 360:
            raise ConfigError("front_cone_deg must be in (0, 360]")


def classify_region(x: float, y: float, config: RegionConfig = RegionConfig()) -> Region:
    dx = x - config.lidar_offset[0]
    dy = y - config.lidar_offset[1]
    if config.front_cone_deg is None:
        in_front = dx > 0
    else:
        in_front = abs(math.degrees(math.atan2(dy, dx))) <= 0.5 * config.front_cone_deg and dx > 0
    if not in_front:
        return Region.Other
    if math.hypot(dx, dy) <= config.near_distance:
        return Region.FrontNear
    return Region.FrontFar


@dataclass(frozen=True)
class AlignedDetection:
    detection: Detection
    footprint_cells: np.ndarray  # (N, 2) row/col pairs
    region: Region


def align_one(
    det: Detection, grid: GridSpec, config: RegionConfig = RegionConfig()
) -> AlignedDetection:
    cells = rasterize(project_to_bev(det.box), grid)
    return AlignedDetection(det, cells, classify_region(det.box.center[0], det.box.center[1], config))


def align(
    detections: list[Detection],
    cell_map: PredictedCellMap | GridSpec,
    config: RegionConfig = RegionConfig(),
) -> list[AlignedDetection]:
    """Rasterize each detection on the map's grid, keeping input order.

    Detections with an empty footprint are kept; the checker reports them as
    unverifiable.
    """
    grid = cell_map.grid if isinstance(cell_map, PredictedCellMap) else cell_map
    footprints = rasterize_many([project_to_bev(d.box) for d in detections], grid)
    return [
        AlignedDetection(d, cells, classify_region(d.box.center[0], d.box.center[1], config))
        for d, cells in zip(detections, footprints)
    ]
