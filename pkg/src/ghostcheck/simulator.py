"""Synthetic driving scenes, a noisy detector stub, and ghost injection.

Scenes are laid out in a straight-road frame aligned with the ego vehicle's
initial heading: the ego drives along the road at constant speed, vehicles
keep to lanes at +-3.5 m and +-7 m (plus a gapped ego lane), bikes ride at
+-5.25 m, pedestrians walk the sidewalks, and "Others" loiter on the verge.
Object motion is piecewise constant velocity with a new speed and heading
offset drawn for each segment.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .alignment import Detection, Provenance
from .errors import ConfigError, DataError
from .framelog import AttackRecord, Frame, FrameLog, GroundTruthRecord
from .geometry import Obb3, ObjectClass, Pose2, ego_to_world, ego_transform


DEFAULT_SIZES = {
    ObjectClass.Vehicle: (4.5, 1.8, 1.6),
    ObjectClass.Pedestrian: (0.6, 0.6, 1.7),
    ObjectClass.Bike: (1.7, 0.6, 1.5),
    ObjectClass.Others: (1.0, 1.0, 1.0),
}

LANES = (-7.0, -3.5, 3.5, 7.0)
EGO_LANE_GAP = 14.0
VEHICLE_MIN_GAP = 10.0
SPEED_STEP = 0.5  # m/s


@dataclass(frozen=True)
class DetectorStubConfig:
    position_sigma: float = 0.1
    yaw_sigma: float = 0.02
    drop_probability: float = 0.02
    p_asr: float = 0.97

    def __post_init__(self):
        for name in ("drop_probability", "p_asr"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.position_sigma < 0 or self.yaw_sigma < 0:
            raise ConfigError("noise sigmas must be >= 0")


def _default_census():
    return {ObjectClass.Vehicle: 8, ObjectClass.Pedestrian: 4, ObjectClass.Bike: 2, ObjectClass.Others: 1}


def _default_speeds():
    return {
        ObjectClass.Vehicle: (3.5, 6.5),
        ObjectClass.Pedestrian: (0.0, 1.5),
        ObjectClass.Bike: (2.0, 5.0),
        ObjectClass.Others: (0.0, 0.5),
    }


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    duration: float = 30.0
    frame_rate: float = 2.0
    key_frame_stride: int = 1
    history_depth: int = 20
    ego_speed: float = 5.0
    object_census: dict = field(default_factory=_default_census)
    speed_ranges: dict = field(default_factory=_default_speeds)
    spawn_extent: float = 25.0
    sensor_range: float = 30.0
    segment_duration: float = 8.0
    detector: DetectorStubConfig = field(default_factory=DetectorStubConfig)
    scene_id: str | None = None

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ConfigError("frame_rate must be > 0")
        if self.key_frame_stride < 1:
            raise ConfigError("key_frame_stride must be >= 1")
        if self.num_frames < self.history_depth + 1:
            raise ConfigError(
                f"duration*frame_rate = {self.num_frames} frames; need >= history_depth + 1 "
                f"= {self.history_depth + 1} so key frames have full history"
            )
        for cls, (lo, hi) in self.speed_ranges.items():
            if not 0 <= lo <= hi:
                raise ConfigError(f"bad speed range for {ObjectClass.parse(cls).name}: {(lo, hi)}")
        if any(n < 0 for n in self.object_census.values()):
            raise ConfigError("object census counts must be >= 0")
        if self.segment_duration <= 0 or self.spawn_extent <= 0 or self.sensor_range <= 0:
            raise ConfigError("segment_duration, spawn_extent and sensor_range must be > 0")

    @property
    def num_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))

    @property
    def name(self) -> str:
        return self.scene_id or f"scene-{self.seed:04d}"

    def is_key_frame(self, i: int) -> bool:
        return i >= self.history_depth and (i - self.history_depth) % self.key_frame_stride == 0


@dataclass
class GroundTruthObject:
    """An object moving in the road frame with piecewise-constant velocity.

    ``segments`` holds ``(t_start, s0, l0, vs, vl)``: from ``t_start`` the
    road-frame position is ``(s0 + vs*dt, l0 + vl*dt)``.
    """

    object_key: str
    object_class: ObjectClass
    size: tuple[float, float, float]
    segments: list[tuple[float, float, float, float, float]]
    alive: tuple[float, float]

    def road_state(self, t: float) -> tuple[float, float, float, float]:
        seg = self.segments[0]
        for cand in self.segments:
            if cand[0] <= t:
                seg = cand
            else:
                break
        t0, s0, l0, vs, vl = seg
        dt = t - t0
        return s0 + vs * dt, l0 + vl * dt, vs, vl

    def speed_at(self, t: float) -> float:
        _, _, vs, vl = self.road_state(t)
        return math.hypot(vs, vl)


def _build_trajectory(start_s, start_l, speeds, headings, t_breaks):
    segs = []
    s, l = start_s, start_l
    for i, t0 in enumerate(t_breaks):
        vs = speeds[i] * math.cos(headings[i])
        vl = speeds[i] * math.sin(headings[i])
        segs.append((t0, s, l, vs, vl))
        if i + 1 < len(t_breaks):
            dt = t_breaks[i + 1] - t0
            s, l = s + vs * dt, l + vl * dt
    return segs


def _speed_profile(rng: np.random.Generator, bounds: tuple[float, float], nseg: int) -> list[float]:
    """Per-segment speeds: a bounded random walk, at most SPEED_STEP change per segment."""
    lo, hi = bounds
    v = [rng.uniform(lo, hi)]
    for _ in range(nseg - 1):
        v.append(float(np.clip(v[-1] + rng.uniform(-SPEED_STEP, SPEED_STEP), lo, hi)))
    return v


def _spawn_objects(cfg: SceneConfig, rng: np.random.Generator) -> list[GroundTruthObject]:
    t_breaks = list(np.arange(0.0, cfg.duration, cfg.segment_duration))
    nseg = len(t_breaks)
    census = {ObjectClass.parse(k): v for k, v in cfg.object_census.items()}
    speeds = {ObjectClass.parse(k): v for k, v in cfg.speed_ranges.items()}
    objects = []

    # vehicles: each lane shares one speed profile, so in-lane gaps are kept
    lanes = [0.0, *LANES]
    lane_speeds = {
        lane: [cfg.ego_speed] * nseg if lane == 0.0 else _speed_profile(rng, speeds[ObjectClass.Vehicle], nseg)
        for lane in lanes
    }
    occupied: dict[float, list[float]] = {lane: [] for lane in lanes}
    for i in range(census.get(ObjectClass.Vehicle, 0)):
        for _ in range(100):
            lane = lanes[rng.integers(len(lanes))]
            s0 = rng.uniform(-cfg.spawn_extent, cfg.spawn_extent)
            if lane == 0.0 and abs(s0) < EGO_LANE_GAP:
                continue
            if all(abs(s0 - o) >= VEHICLE_MIN_GAP for o in occupied[lane]):
                break
        else:
            continue
        occupied[lane].append(s0)
        length = DEFAULT_SIZES[ObjectClass.Vehicle][0] + rng.uniform(-0.3, 0.3)
        width = DEFAULT_SIZES[ObjectClass.Vehicle][1] + rng.uniform(-0.1, 0.1)
        objects.append(
            GroundTruthObject(
                f"{cfg.name}-vehicle-{i:02d}",
                ObjectClass.Vehicle,
                (length, width, DEFAULT_SIZES[ObjectClass.Vehicle][2]),
                _build_trajectory(s0, lane, lane_speeds[lane], [0.0] * nseg, t_breaks),
                (0.0, cfg.duration),
            )
        )

    # slow roadside objects are spread along the whole drive so the ego passes them
    ahead = cfg.spawn_extent + cfg.ego_speed * cfg.duration

    def roamers(cls, lateral, heading_jitter, both_directions):
        for i in range(census.get(cls, 0)):
            side = 1.0 if rng.random() < 0.5 else -1.0
            l0 = side * rng.uniform(*lateral)
            s0 = rng.uniform(-cfg.spawn_extent, ahead if cls != ObjectClass.Bike else cfg.spawn_extent)
            direction = math.pi if both_directions and rng.random() < 0.5 else 0.0
            v = _speed_profile(rng, speeds[cls], nseg)
            h = direction + rng.uniform(-heading_jitter, heading_jitter, nseg)
            yield GroundTruthObject(
                f"{cfg.name}-{cls.name.lower()}-{i:02d}",
                cls,
                DEFAULT_SIZES[cls],
                _build_trajectory(s0, l0, v, h, t_breaks),
                (0.0, cfg.duration),
            )

    objects.extend(roamers(ObjectClass.Bike, (5.25, 5.25), 0.0, False))
    objects.extend(roamers(ObjectClass.Pedestrian, (10.0, 12.0), 0.05, True))
    objects.extend(roamers(ObjectClass.Others, (8.5, 9.5), 0.05, True))
    return objects


def _road_to_world(origin: Pose2, s: float, l: float, heading: float) -> Pose2:
    return ego_to_world(Pose2(s, l, heading), origin)


def generate_scene(config: SceneConfig) -> FrameLog:
    """Simulate one scene: ego trajectory, ground truth and stub detections."""
    rng = np.random.default_rng(config.seed)
    origin = Pose2(0.0, 0.0, rng.uniform(-math.pi, math.pi))
    objects = _spawn_objects(config, rng)
    det = config.detector
    frames = []
    for i in range(config.num_frames):
        t = i / config.frame_rate
        ego = _road_to_world(origin, config.ego_speed * t, 0.0, 0.0)
        gts, dets = [], []
        for obj in objects:
            s, l, vs, vl = obj.road_state(t)
            heading = math.atan2(vl, vs) if math.hypot(vs, vl) > 1e-9 else 0.0
            world = _road_to_world(origin, s, l, heading)
            rel = ego_transform(world, ego)
            if abs(rel.x) > config.sensor_range or abs(rel.y) > config.sensor_range:
                continue
            gts.append(GroundTruthRecord(obj.object_key, obj.object_class, world, obj.size))
            if rng.random() < det.drop_probability:
                continue
            nx, ny = rng.normal(0.0, 1.0, 2) * det.position_sigma
            nyaw = rng.normal(0.0, 1.0) * det.yaw_sigma
            dets.append(
                Detection(
                    detection_id=obj.object_key,
                    object_class=obj.object_class,
                    box=Obb3((rel.x + nx, rel.y + ny, obj.size[2] / 2), obj.size, rel.yaw + nyaw),
                    confidence=float(rng.uniform(0.5, 1.0)),
                    provenance=Provenance.simulated,
                )
            )
        frames.append(
            Frame(
                scene_id=config.name,
                frame_index=i,
                timestamp=t,
                ego_pose=ego,
                is_key_frame=config.is_key_frame(i),
                ground_truth=gts,
                detections=dets,
            )
        )
    return FrameLog(frames)


def generate_scenes(configs: list[SceneConfig], jobs: int = 1) -> FrameLog:
    if jobs > 1 and len(configs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            logs = list(pool.map(generate_scene, configs))
    else:
        logs = [generate_scene(c) for c in configs]
    return FrameLog([f for log in logs for f in log.frames])


@dataclass(frozen=True)
class AttackConfig:
    """Ghost-object injection.

    ``frames`` is ``"key"`` (every key frame) or an explicit list of frame
    indices applied within every scene. ``point_budget`` is recorded only.
    """

    target_class: ObjectClass = ObjectClass.Vehicle
    distance_range: tuple[float, float] = (5.0, 8.0)
    lateral_jitter: float = 1.0
    frames: str | tuple[int, ...] = "key"
    duration_frames: int = 1
    point_budget: int = 200
    ghost_size: tuple[float, float, float] | None = None
    ghost_velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cls = ObjectClass.parse(self.target_class)
        if cls == ObjectClass.Background:
            raise ConfigError("attack target class cannot be Background")
        object.__setattr__(self, "target_class", cls)
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            raise ConfigError(f"bad distance range {self.distance_range}")
        if lo <= self.lateral_jitter:
            raise ConfigError("lateral_jitter must be smaller than the minimum distance")
        if not 0 <= self.point_budget <= 200:
            raise ConfigError("point_budget must be in [0, 200]")
        if self.duration_frames < 1:
            raise ConfigError("duration_frames must be >= 1")
        if self.frames != "key" and not isinstance(self.frames, (tuple, list)):
            raise ConfigError("frames must be 'key' or a list of frame indices")

    @property
    def size(self) -> tuple[float, float, float]:
        return self.ghost_size or DEFAULT_SIZES[self.target_class]


def inject_attack(log: FrameLog, attack: AttackConfig, seed: int, p_asr: float = 0.97) -> FrameLog:
    """Return a copy of ``log`` with ghost detections appended on target frames.

    Each target frame gets an attack record whether or not the spoof
    succeeded, so the attack success rate is exactly recoverable.
    """
    if not 0.0 <= p_asr <= 1.0:
        raise ConfigError("p_asr must be in [0, 1]")
    rng = np.random.default_rng(seed)
    out = FrameLog([copy.deepcopy(f) for f in log.frames])
    lo, hi = attack.distance_range
    for scene_id, frames in out.scenes():
        by_index = {f.frame_index: k for k, f in enumerate(frames)}
        if attack.frames == "key":
            targets = [f.frame_index for f in frames if f.is_key_frame]
        else:
            missing = [i for i in attack.frames if i not in by_index]
            if missing:
                raise DataError(f"attack frames {missing} not in scene {scene_id}")
            targets = list(attack.frames)
        seen_ids = {d.detection_id for f in frames for d in f.detections}
        for target in targets:
            start = frames[by_index[target]]
            succeeded = bool(rng.random() < p_asr)
            d = rng.uniform(lo, hi)
            y = rng.uniform(-attack.lateral_jitter, attack.lateral_jitter)
            x = math.sqrt(d * d - y * y)
            ghost_id = f"ghost-{scene_id}-{target:05d}"
            while ghost_id in seen_ids:
                ghost_id += "x"
            seen_ids.add(ghost_id)
            anchor = ego_to_world(Pose2(x, y, 0.0), start.ego_pose)
            vx, vy = attack.ghost_velocity
            vworld = ego_to_world(Pose2(vx, vy), Pose2(0.0, 0.0, start.ego_pose.yaw))
            confidence = float(rng.uniform(0.5, 1.0))
            for k in range(attack.duration_frames):
                pos = by_index.get(target + k)
                if pos is None:
                    break
                frame = frames[pos]
                if succeeded:
                    dt = frame.timestamp - start.timestamp
                    world = Pose2(anchor.x + vworld.x * dt, anchor.y + vworld.y * dt, anchor.yaw)
                    rel = ego_transform(world, frame.ego_pose)
                    size = attack.size
                    frame.detections.append(
                        Detection(
                            detection_id=ghost_id,
                            object_class=attack.target_class,
                            box=Obb3((rel.x, rel.y, size[2] / 2), size, rel.yaw),
                            confidence=confidence,
                            provenance=Provenance.injected,
                        )
                    )
                if k == 0:
                    carried = _continued_ids(frame.attack)
                    frame.attack = AttackRecord(
                        target_class=attack.target_class,
                        succeeded=succeeded,
                        injected_ids=[ghost_id] if succeeded else [],
                        point_budget=attack.point_budget,
                        extra={"continued_ids": carried} if carried else {},
                    )
                elif not succeeded:
                    break
                elif frame.attack is not None:
                    frame.attack.extra["continued_ids"] = _continued_ids(frame.attack) + [ghost_id]
                else:
                    # continuation-only frame: not a new attempt, so injected_ids stays empty
                    frame.attack = AttackRecord(
                        target_class=attack.target_class,
                        succeeded=True,
                        injected_ids=[],
                        point_budget=attack.point_budget,
                        extra={"continued_ids": [ghost_id], "attack_start": target},
                    )
    return out


def _continued_ids(record: AttackRecord | None) -> list[str]:
    if record is None:
        return []
    return list(record.extra.get("continued_ids", []))
