"""Line-delimited JSON frame logs and verdict files.

One JSON object per line. A frame log line carries one sensor frame of one
scene::

    {"schema_version": 1, "scene_id": "scene-0000", "frame_index": 0,
     "is_key_frame": false, "timestamp": 0.0,
     "ego_pose": {"x": 0.0, "y": 0.0, "yaw": 0.0},
     "ground_truth": [{"object_key": ..., "class": "Vehicle",
                       "pose": {"x":, "y":, "yaw":}, "size": {"l":, "w":, "h":}}],
     "detections": [{"detection_id": ..., "class": "Vehicle",
                     "box3d": {"cx":, "cy":, "cz":, "l":, "w":, "h":, "yaw":},
                     "confidence": 0.9, "provenance": "simulated"}],
     "attack": {"target_class": "Vehicle", "succeeded": true,
                "injected_ids": [...], "point_budget": 200}}

Ground-truth poses are world frame; detection boxes are ego frame. Fields
this module does not know about are carried through a read/write cycle.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from itertools import groupby
from typing import Any, Iterable, Iterator

from .alignment import Detection, Provenance, Region
from .detection import Decision, Verdict
from .errors import DataError
from .geometry import Obb3, ObjectClass, Pose2

SCHEMA_VERSION = 1


@dataclass
class GroundTruthRecord:
    object_key: str
    object_class: ObjectClass
    pose: Pose2
    size: tuple[float, float, float]
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class AttackRecord:
    target_class: ObjectClass
    succeeded: bool
    injected_ids: list[str]
    point_budget: int = 200
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class Frame:
    scene_id: str
    frame_index: int
    timestamp: float
    ego_pose: Pose2
    is_key_frame: bool = False
    ground_truth: list[GroundTruthRecord] = field(default_factory=list)
    detections: list[Detection] = field(default_factory=list)
    attack: AttackRecord | None = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class FrameLog:
    frames: list[Frame] = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def scenes(self) -> list[tuple[str, list[Frame]]]:
        """Frames grouped by consecutive ``scene_id``, in file order."""
        return [(sid, list(fr)) for sid, fr in groupby(self.frames, key=lambda f: f.scene_id)]

    @property
    def key_frames(self) -> list[Frame]:
        return [f for f in self.frames if f.is_key_frame]

    def validate(self, line_numbers: list[int] | None = None):
        """Check per-scene ordering; errors name the line (or 1-based frame position)."""
        last: dict[str, tuple[int, float]] = {}
        for i, f in enumerate(self.frames):
            line = line_numbers[i] if line_numbers else i + 1
            prev = last.get(f.scene_id)
            if prev is not None:
                if f.frame_index <= prev[0]:
                    raise DataError(f"frame_index {f.frame_index} not increasing in {f.scene_id}", line)
                if f.timestamp <= prev[1]:
                    raise DataError(f"timestamp {f.timestamp} not increasing in {f.scene_id}", line)
            last[f.scene_id] = (f.frame_index, f.timestamp)


# --- encoding -------------------------------------------------------------

def _pose(p: Pose2) -> dict:
    return {"x": p.x, "y": p.y, "yaw": p.yaw}


def detection_to_record(d: Detection) -> dict:
    (cx, cy, cz), (l, w, h) = d.box.center, d.box.size
    return {
        **d.extra,
        "detection_id": d.detection_id,
        "class": d.object_class.name,
        "box3d": {"cx": cx, "cy": cy, "cz": cz, "l": l, "w": w, "h": h, "yaw": d.box.yaw},
        "confidence": d.confidence,
        "provenance": d.provenance.value,
    }


def frame_to_record(f: Frame) -> dict:
    rec = {
        **f.extra,
        "schema_version": SCHEMA_VERSION,
        "scene_id": f.scene_id,
        "frame_index": f.frame_index,
        "is_key_frame": f.is_key_frame,
        "timestamp": f.timestamp,
        "ego_pose": _pose(f.ego_pose),
        "ground_truth": [
            {
                **g.extra,
                "object_key": g.object_key,
                "class": g.object_class.name,
                "pose": _pose(g.pose),
                "size": {"l": g.size[0], "w": g.size[1], "h": g.size[2]},
            }
            for g in f.ground_truth
        ],
        "detections": [detection_to_record(d) for d in f.detections],
    }
    if f.attack is not None:
        a = f.attack
        rec["attack"] = {
            **a.extra,
            "target_class": a.target_class.name,
            "succeeded": a.succeeded,
            "injected_ids": list(a.injected_ids),
            "point_budget": a.point_budget,
        }
    return rec


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False)


# --- decoding -------------------------------------------------------------

_FRAME_KEYS = {"schema_version", "scene_id", "frame_index", "is_key_frame", "timestamp",
               "ego_pose", "ground_truth", "detections", "attack"}
_DET_KEYS = {"detection_id", "class", "box3d", "confidence", "provenance"}
_GT_KEYS = {"object_key", "class", "pose", "size"}
_ATTACK_KEYS = {"target_class", "succeeded", "injected_ids", "point_budget"}


def _rest(rec: dict, known: set) -> dict:
    return {k: v for k, v in rec.items() if k not in known}


def _read_pose(p: dict) -> Pose2:
    return Pose2(float(p["x"]), float(p["y"]), float(p.get("yaw", 0.0)))


def detection_from_record(r: dict, default_provenance: str = "ingested") -> Detection:
    b = r["box3d"]
    return Detection(
        detection_id=str(r["detection_id"]),
        object_class=ObjectClass.parse(r["class"]),
        box=Obb3(
            (float(b["cx"]), float(b["cy"]), float(b.get("cz", 0.0))),
            (float(b["l"]), float(b["w"]), float(b.get("h", 1.0))),
            float(b.get("yaw", 0.0)),
        ),
        confidence=float(r.get("confidence", 1.0)),
        provenance=Provenance(r.get("provenance", default_provenance)),
        extra=_rest(r, _DET_KEYS),
    )


def frame_from_record(rec: dict, line: int | None = None) -> Frame:
    try:
        version = rec.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DataError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})", line)
        attack = None
        if rec.get("attack") is not None:
            a = rec["attack"]
            attack = AttackRecord(
                target_class=ObjectClass.parse(a["target_class"]),
                succeeded=bool(a["succeeded"]),
                injected_ids=[str(i) for i in a["injected_ids"]],
                point_budget=int(a.get("point_budget", 200)),
                extra=_rest(a, _ATTACK_KEYS),
            )
        return Frame(
            scene_id=str(rec["scene_id"]),
            frame_index=int(rec["frame_index"]),
            timestamp=float(rec["timestamp"]),
            ego_pose=_read_pose(rec.get("ego_pose", {"x": 0.0, "y": 0.0})),
            is_key_frame=bool(rec.get("is_key_frame", False)),
            ground_truth=[
                GroundTruthRecord(
                    object_key=str(g["object_key"]),
                    object_class=ObjectClass.parse(g["class"]),
                    pose=_read_pose(g["pose"]),
                    size=(float(g["size"]["l"]), float(g["size"]["w"]), float(g["size"]["h"])),
                    extra=_rest(g, _GT_KEYS),
                )
                for g in rec.get("ground_truth", [])
            ],
            detections=[detection_from_record(d) for d in rec.get("detections", [])],
            attack=attack,
            extra=_rest(rec, _FRAME_KEYS),
        )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed frame record: {exc!r}", line) from exc


def _iter_json_lines(lines: Iterable[str]) -> Iterator[tuple[int, dict]]:
    for n, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc.msg}", n) from exc
        if not isinstance(rec, dict):
            raise DataError("record is not a JSON object", n)
        yield n, rec


def loads_log(text: str) -> FrameLog:
    frames, lines = [], []
    for n, rec in _iter_json_lines(io.StringIO(text)):
        frames.append(frame_from_record(rec, n))
        lines.append(n)
    log = FrameLog(frames)
    log.validate(lines)
    return log


def dumps_log(log: FrameLog) -> str:
    return "".join(dumps_record(frame_to_record(f)) + "\n" for f in log.frames)


def read_log(path: str | os.PathLike) -> FrameLog:
    with open(path, encoding="utf-8") as fh:
        return loads_log(fh.read())


def write_log(path: str | os.PathLike, log: FrameLog):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_log(log))


# --- verdict files ----------------------------------------------------------

@dataclass
class FrameVerdicts:
    """Checker output for one key frame."""

    scene_id: str
    frame_index: int
    status: str  # "checked" or "insufficient_history"
    verdicts: list[Verdict]
    regions: list[Region]

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "frame_index": self.frame_index,
            "status": self.status,
            "verdicts": [
                {
                    "detection_id": v.detection_id,
                    "class": v.detected_class.name,
                    "decision": v.decision.value,
                    "plurality_class": v.plurality_class.name,
                    "class_counts": {c.name: n for c, n in v.class_counts.items()},
                    "match_fraction": v.match_fraction,
                    "region": r.value,
                }
                for v, r in zip(self.verdicts, self.regions)
            ],
        }

    @classmethod
    def from_record(cls, rec: dict, line: int | None = None) -> FrameVerdicts:
        try:
            if rec.get("schema_version") != SCHEMA_VERSION:
                raise DataError(f"unsupported schema_version {rec.get('schema_version')!r}", line)
            verdicts, regions = [], []
            for v in rec["verdicts"]:
                verdicts.append(
                    Verdict(
                        detection_id=str(v["detection_id"]),
                        detected_class=ObjectClass.parse(v["class"]),
                        decision=Decision(v["decision"]),
                        plurality_class=ObjectClass.parse(v["plurality_class"]),
                        class_counts={ObjectClass.parse(k): int(n) for k, n in v["class_counts"].items()},
                        match_fraction=float(v["match_fraction"]),
                    )
                )
                regions.append(Region(v["region"]))
            return cls(str(rec["scene_id"]), int(rec["frame_index"]), str(rec["status"]), verdicts, regions)
        except DataError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed verdict record: {exc!r}", line) from exc


def dumps_verdicts(frames: list[FrameVerdicts]) -> str:
    return "".join(dumps_record(f.to_record()) + "\n" for f in frames)


def loads_verdicts(text: str) -> list[FrameVerdicts]:
    return [FrameVerdicts.from_record(rec, n) for n, rec in _iter_json_lines(io.StringIO(text))]


def read_verdicts(path: str | os.PathLike) -> list[FrameVerdicts]:
    with open(path, encoding="utf-8") as fh:
        return loads_verdicts(fh.read())


def write_verdicts(path: str | os.PathLike, frames: list[FrameVerdicts]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_verdicts(frames))
