"""Frame-by-frame temporal consistency check over a frame log."""

from __future__ import annotations

import time
from collections.abc import Iterator
from dataclasses import dataclass, field

from .alignment import AlignedDetection, Provenance, RegionConfig, align
from .detection import CmcsConfig, Decision, Verdict, check_frame
from .framelog import Frame, FrameLog, FrameVerdicts
from .geometry import GridSpec, ObjectClass, Pose2, ego_to_world
from .prediction import Observation, PredictedCellMap, PredictorConfig, TrackStore, render_prediction

STAGES = ("prediction", "alignment", "detection", "total")


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    region: RegionConfig = field(default_factory=RegionConfig)
    cmcs: CmcsConfig = field(default_factory=CmcsConfig)
    # Build motion history from non-injected detections only, so each key
    # frame is judged against benign history (single-frame attack protocol).
    benign_history: bool = True


def frame_observations(frame: Frame, config: PipelineConfig) -> list[Observation]:
    """Turn a frame's detections into tracker observations."""
    out = []
    for det in frame.detections:
        if config.benign_history and det.provenance == Provenance.injected:
            continue
        rel = Pose2(det.box.center[0], det.box.center[1], det.box.yaw)
        pose = ego_to_world(rel, frame.ego_pose) if config.predictor.ego_compensation else rel
        out.append(
            Observation(
                frame_index=frame.frame_index,
                timestamp=frame.timestamp,
                pose=pose,
                size=(det.box.size[0], det.box.size[1]),
                object_class=det.object_class,
                object_key=det.detection_id,
            )
        )
    return out


def _unverifiable(frame: Frame) -> list[Verdict]:
    zero = {c: 0 for c in ObjectClass}
    return [
        Verdict(d.detection_id, d.object_class, Decision.Unverifiable, ObjectClass.Background, dict(zero), 0.0)
        for d in frame.detections
    ]


@dataclass
class FrameTrace:
    """Everything the checker saw and produced for one key frame."""

    frame: Frame
    status: str
    cell_map: PredictedCellMap | None
    aligned: list[AlignedDetection]
    verdicts: list[Verdict]

    def to_verdicts(self) -> FrameVerdicts:
        f = self.frame
        return FrameVerdicts(f.scene_id, f.frame_index, self.status, self.verdicts, [a.region for a in self.aligned])


class Pipeline:
    """Prediction, alignment and cell-match checking, one scene at a time."""

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()

    def _walk(self, frames: list[Frame], timings: list[dict] | None) -> Iterator[FrameTrace]:
        cfg = self.config
        store = TrackStore(cfg.predictor)
        pending_ingest = 0.0
        for position, frame in enumerate(frames):
            if frame.is_key_frame:
                t0 = time.perf_counter()
                if position < cfg.predictor.history_depth:
                    aligned = align(frame.detections, cfg.grid, cfg.region)
                    yield FrameTrace(frame, "insufficient_history", None, aligned, _unverifiable(frame))
                else:
                    ego = frame.ego_pose if cfg.predictor.ego_compensation else None
                    cell_map = render_prediction(store, frame.timestamp, cfg.grid, ego_pose=ego)
                    t1 = time.perf_counter()
                    aligned = align(frame.detections, cell_map, cfg.region)
                    t2 = time.perf_counter()
                    verdicts = check_frame(aligned, cell_map, cfg.cmcs)
                    t3 = time.perf_counter()
                    if timings is not None:
                        timings.append({
                            "prediction": pending_ingest + (t1 - t0),
                            "alignment": t2 - t1,
                            "detection": t3 - t2,
                            "total": pending_ingest + (t3 - t0),
                        })
                    pending_ingest = 0.0
                    yield FrameTrace(frame, "checked", cell_map, aligned, verdicts)
            t4 = time.perf_counter()
            store.ingest_frame(frame.frame_index, frame_observations(frame, cfg))
            pending_ingest += time.perf_counter() - t4

    def check_scene(self, frames: list[Frame], timings: list[dict] | None = None) -> list[FrameVerdicts]:
        """Check every key frame of one scene.

        If ``timings`` is given, one ``{stage: seconds}`` dict is appended per
        checked key frame. Tracker ingestion of the preceding frames is billed
        to the prediction stage.
        """
        return [t.to_verdicts() for t in self._walk(frames, timings)]

    def trace_scene(self, frames: list[Frame]) -> list[FrameTrace]:
        """Like :meth:`check_scene`, but keep the predicted maps and footprints."""
        return list(self._walk(frames, None))

    def run(self, log: FrameLog, jobs: int = 1) -> list[FrameVerdicts]:
        scenes = [frames for _, frames in log.scenes()]
        if jobs > 1 and len(scenes) > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=jobs) as pool:
                parts = list(pool.map(self.check_scene, scenes))
        else:
            parts = [self.check_scene(s) for s in scenes]
        return [fv for part in parts for fv in part]
