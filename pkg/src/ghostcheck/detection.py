"""Cell-match counting: decide whether a detection is backed by the prediction.

For each detection, tally the predicted labels under its footprint. The
most frequent label stands for "what the motion history expects here". If it
is not compatible with the detected class, the detection is flagged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .alignment import AlignedDetection
from .geometry import ObjectClass
from .prediction import PredictedCellMap

# Earlier entries win count ties. Background first, so a tie flags.
TIE_PRECEDENCE = (
    ObjectClass.Background,
    ObjectClass.Others,
    ObjectClass.Vehicle,
    ObjectClass.Pedestrian,
    ObjectClass.Bike,
)


class Decision(str, enum.Enum):
    Benign = "Benign"
    Spoofed = "Spoofed"
    Unverifiable = "Unverifiable"


@dataclass(frozen=True)
class CmcsConfig:
    strict_majority: bool = False
    others_is_wildcard: bool = False


def compatible(detected: ObjectClass, predicted: ObjectClass, others_is_wildcard: bool = False) -> bool:
    """Whether a predicted cell label supports a detection of class ``detected``."""
    if predicted == ObjectClass.Background:
        return False
    if predicted == detected:
        return True
    return others_is_wildcard and predicted == ObjectClass.Others


@dataclass(frozen=True)
class Verdict:
    detection_id: str
    detected_class: ObjectClass
    decision: Decision
    plurality_class: ObjectClass
    class_counts: dict[ObjectClass, int]
    match_fraction: float

    @property
    def total_cells(self) -> int:
        return sum(self.class_counts.values())


def tally(cells: np.ndarray, cell_map: PredictedCellMap) -> np.ndarray:
    """Per-class counts of predicted labels over ``cells``, indexed by class code."""
    if len(cells) == 0:
        return np.zeros(len(ObjectClass), dtype=np.int64)
    labels = cell_map.labels[cells[:, 0], cells[:, 1]]
    return np.bincount(labels, minlength=len(ObjectClass))


def plurality(counts: np.ndarray) -> ObjectClass:
    best = max(counts)
    for cls in TIE_PRECEDENCE:
        if counts[cls] == best:
            return cls
    raise AssertionError("unreachable")


def cmcs(
    aligned: AlignedDetection, cell_map: PredictedCellMap, config: CmcsConfig = CmcsConfig()
) -> Verdict:
    det = aligned.detection
    counts = tally(aligned.footprint_cells, cell_map)
    total = int(counts.sum())
    top = plurality(counts)
    matched = sum(
        int(counts[c]) for c in ObjectClass if compatible(det.object_class, c, config.others_is_wildcard)
    )

    if total == 0:
        decision = Decision.Unverifiable
    elif config.strict_majority:
        decision = Decision.Benign if matched / total > 0.5 else Decision.Spoofed
    elif compatible(det.object_class, top, config.others_is_wildcard):
        decision = Decision.Benign
    else:
        decision = Decision.Spoofed

    return Verdict(
        detection_id=det.detection_id,
        detected_class=det.object_class,
        decision=decision,
        plurality_class=top,
        class_counts={c: int(counts[c]) for c in ObjectClass},
        match_fraction=int(counts[det.object_class]) / max(1, total),
    )


def check_frame(
    aligned: list[AlignedDetection],
    cell_map: PredictedCellMap,
    config: CmcsConfig = CmcsConfig(),
) -> list[Verdict]:
    return [cmcs(a, cell_map, config) for a in aligned]
