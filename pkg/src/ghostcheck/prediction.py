"""Track-based object-motion prediction rendered onto the BEV grid.

The predictor only sees past frames. An object observed for the first time
in the frame being checked has no track history, so nothing is painted where
it stands: that absence is what the cell-match check keys on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FrameOrderError, NotPredictable
from .geometry import GridSpec, ObbBev, ObjectClass, Pose2, ego_transform, rasterize_many

# below this speed the velocity heading is noise; keep the observed yaw
_HEADING_MIN_SPEED = 0.1


@dataclass(frozen=True)
class Observation:
    frame_index: int
    timestamp: float
    pose: Pose2
    size: tuple[float, float]
    object_class: ObjectClass
    object_key: str | None = None

    def __post_init__(self):
        if self.object_class == ObjectClass.Background:
            raise ValueError("observations cannot be Background")


@dataclass
class Track:
    object_key: str
    object_class: ObjectClass
    observations: list[Observation] = field(default_factory=list)

    @property
    def last(self) -> Observation:
        return self.observations[-1]

    @property
    def state(self) -> np.ndarray:
        """``(x, y, vx, vy)`` from the last two observations (zero velocity if only one)."""
        x, y = self.last.pose.x, self.last.pose.y
        if len(self.observations) < 2:
            return np.array([x, y, 0.0, 0.0])
        vx, vy = _finite_difference(self.observations)
        return np.array([x, y, vx, vy])


@dataclass(frozen=True)
class PredictorConfig:
    mode: str = "cv"  # "cv" or "kf"
    history_depth: int = 20
    min_observations: int = 2
    association: str = "by-key"  # or "nearest"
    gating_radius: float = 2.0
    max_coast: int = 2
    smoothing: bool = False
    q: float = 0.5  # process noise, m/s^2
    r: float = 0.1  # measurement noise, m
    ego_compensation: bool = True

    def __post_init__(self):
        if self.mode not in ("cv", "kf"):
            raise ConfigError(f"predictor mode must be 'cv' or 'kf', got {self.mode!r}")
        if self.association not in ("by-key", "nearest"):
            raise ConfigError(f"association must be 'by-key' or 'nearest', got {self.association!r}")
        if self.history_depth < 2:
            raise ConfigError("history_depth must be >= 2")
        if self.min_observations < 1:
            raise ConfigError("min_observations must be >= 1")
        if self.max_coast < 0:
            raise ConfigError("max_coast must be >= 0")
        for name in ("gating_radius", "q", "r"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and non-negative, got {v}")


class TrackStore:
    """Per-scene motion histories, fed one frame at a time."""

    def __init__(self, config: PredictorConfig | None = None):
        self.config = config or PredictorConfig()
        self.tracks: dict[str, Track] = {}
        self.last_frame: int | None = None
        self._next_id = 0

    @property
    def history_depth(self) -> int:
        return self.config.history_depth

    def __len__(self):
        return len(self.tracks)

    def ingest_frame(self, frame_index: int, observations: list[Observation]) -> TrackStore:
        if self.last_frame is not None and frame_index <= self.last_frame:
            raise FrameOrderError(
                f"frame {frame_index} is not after last ingested frame {self.last_frame}"
            )
        for obs in observations:
            if obs.frame_index != frame_index:
                raise FrameOrderError(
                    f"observation from frame {obs.frame_index} passed with frame {frame_index}"
                )

        if self.config.association == "by-key":
            self._associate_by_key(observations)
        else:
            self._associate_nearest(observations)

        self.last_frame = frame_index
        oldest_kept = frame_index - self.config.history_depth + 1
        for key in list(self.tracks):
            track = self.tracks[key]
            if frame_index - track.last.frame_index > self.config.max_coast:
                del self.tracks[key]
                continue
            track.observations = [o for o in track.observations if o.frame_index >= oldest_kept]
            if not track.observations:
                del self.tracks[key]
        return self

    def _append(self, track: Track, obs: Observation):
        if track.observations and obs.timestamp <= track.last.timestamp:
            raise FrameOrderError(f"timestamp not increasing for track {track.object_key}")
        track.observations.append(obs)

    def _open_track(self, obs: Observation) -> Track:
        key = obs.object_key
        if key is None or key in self.tracks:
            key = f"track-{self._next_id:06d}"
            self._next_id += 1
        track = Track(key, obs.object_class)
        self.tracks[key] = track
        return track

    def _associate_by_key(self, observations: list[Observation]):
        for obs in observations:
            if obs.object_key is None:
                raise ValueError("by-key association needs object_key on every observation")
            track = self.tracks.get(obs.object_key)
            if track is None:
                track = self._open_track(obs)
            self._append(track, obs)

    def _associate_nearest(self, observations: list[Observation]):
        candidates = []
        for key, track in self.tracks.items():
            for j, obs in enumerate(observations):
                if obs.object_class != track.object_class:
                    continue
                if len(track.observations) >= 2:
                    guess = predict_cv(track, obs.timestamp)
                else:
                    guess = track.last.pose
                d = math.hypot(obs.pose.x - guess.x, obs.pose.y - guess.y)
                if d <= self.config.gating_radius:
                    candidates.append((d, key, j))
        candidates.sort()
        used_tracks, used_obs = set(), set()
        for _, key, j in candidates:
            if key in used_tracks or j in used_obs:
                continue
            used_tracks.add(key)
            used_obs.add(j)
            self._append(self.tracks[key], observations[j])
        for j, obs in enumerate(observations):
            if j not in used_obs:
                self._append(self._open_track(obs), obs)


def ingest_frame(
    store: TrackStore, frame_index: int, observations: list[Observation]
) -> TrackStore:
    return store.ingest_frame(frame_index, observations)


def _finite_difference(obs: list[Observation]) -> tuple[float, float]:
    a, b = obs[-2], obs[-1]
    dt = b.timestamp - a.timestamp
    return (b.pose.x - a.pose.x) / dt, (b.pose.y - a.pose.y) / dt


def _least_squares_velocity(obs: list[Observation]) -> tuple[float, float]:
    t = np.array([o.timestamp for o in obs])
    xy = np.array([(o.pose.x, o.pose.y) for o in obs])
    tc = t - t.mean()
    slope = tc @ (xy - xy.mean(axis=0)) / (tc @ tc)
    return float(slope[0]), float(slope[1])


def _heading(vx: float, vy: float, fallback: float) -> float:
    if math.hypot(vx, vy) > _HEADING_MIN_SPEED:
        return math.atan2(vy, vx)
    return fallback


def predict_cv(track: Track, t_target: float, smoothing: bool = False) -> Pose2:
    """Constant-velocity extrapolation of ``track`` to ``t_target``."""
    obs = track.observations
    if len(obs) < 2:
        raise NotPredictable(f"track {track.object_key} has {len(obs)} observation(s)")
    if smoothing:
        vx, vy = _least_squares_velocity(obs[-5:])
    else:
        vx, vy = _finite_difference(obs)
    last = obs[-1]
    dt = t_target - last.timestamp
    return Pose2(last.pose.x + vx * dt, last.pose.y + vy * dt, _heading(vx, vy, last.pose.yaw))


class ConstantVelocityKF:
    """Kalman filter on ``(x, y, vx, vy)`` with white-noise acceleration."""

    def __init__(self, q: float = 0.5, r: float = 0.1, initial_speed_var: float = 1e4):
        for name, v in (("q", q), ("r", r), ("initial_speed_var", initial_speed_var)):
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"Kalman parameter {name} must be finite and >= 0, got {v}")
        self.q = q
        self.r = r
        self.initial_speed_var = initial_speed_var
        self.x: np.ndarray | None = None
        self.P: np.ndarray | None = None

    def initialize(self, z: tuple[float, float]):
        self.x = np.array([z[0], z[1], 0.0, 0.0])
        r2 = self.r**2
        self.P = np.diag([r2, r2, self.initial_speed_var, self.initial_speed_var])

    def initialize_two_point(self, z0: tuple[float, float], z1: tuple[float, float], dt: float):
        """Start at ``z1`` with the finite-difference velocity of the pair.

        This is the diffuse-prior limit, so a noiseless constant-velocity
        track is tracked exactly instead of carrying a bias from a guessed
        initial speed.
        """
        if not dt > 0:
            raise ValueError(f"two-point initialization needs dt > 0, got {dt}")
        self.x = np.array([z1[0], z1[1], (z1[0] - z0[0]) / dt, (z1[1] - z0[1]) / dt])
        r2 = self.r**2
        block = np.array([[r2, r2 / dt], [r2 / dt, 2 * r2 / dt**2]])
        self.P = np.zeros((4, 4))
        self.P[np.ix_([0, 2], [0, 2])] = block
        self.P[np.ix_([1, 3], [1, 3])] = block

    def predict(self, dt: float):
        F = np.eye(4)
        F[0, 2] = F[1, 3] = dt
        g = np.array([0.5 * dt * dt, dt])
        block = self.q**2 * np.outer(g, g)
        Q = np.zeros((4, 4))
        Q[np.ix_([0, 2], [0, 2])] = block
        Q[np.ix_([1, 3], [1, 3])] = block
        self.x = F @ self.x
        P = F @ self.P @ F.T + Q
        self.P = 0.5 * (P + P.T)

    def update(self, z: tuple[float, float]):
        H = np.zeros((2, 4))
        H[0, 0] = H[1, 1] = 1.0
        R = np.eye(2) * self.r**2
        S = H @ self.P @ H.T + R
        K = np.linalg.solve(S, H @ self.P).T
        self.x = self.x + K @ (np.asarray(z, dtype=float) - H @ self.x)
        # Joseph form keeps P symmetric PSD under round-off
        A = np.eye(4) - K @ H
        P = A @ self.P @ A.T + K @ R @ K.T
        self.P = 0.5 * (P + P.T)


def _filter_track(track: Track, q: float, r: float) -> ConstantVelocityKF:
    obs = track.observations
    if not obs:
        raise NotPredictable(f"track {track.object_key} is empty")
    kf = ConstantVelocityKF(q, r)
    if len(obs) == 1:
        kf.initialize((obs[0].pose.x, obs[0].pose.y))
        return kf
    a, b = obs[0], obs[1]
    kf.initialize_two_point((a.pose.x, a.pose.y), (b.pose.x, b.pose.y), b.timestamp - a.timestamp)
    for prev, cur in zip(obs[1:], obs[2:]):
        kf.predict(cur.timestamp - prev.timestamp)
        kf.update((cur.pose.x, cur.pose.y))
    return kf


def predict_kf(
    track: Track, t_target: float, q: float = 0.5, r: float = 0.1
) -> tuple[Pose2, np.ndarray]:
    """Filter ``track``'s observations, then predict to ``t_target``.

    Returns the predicted pose and the 4x4 state covariance.
    """
    kf = _filter_track(track, q, r)
    kf.predict(t_target - track.last.timestamp)
    x, y, vx, vy = kf.x
    return Pose2(x, y, _heading(vx, vy, track.last.pose.yaw)), kf.P


@dataclass
class PredictedCellMap:
    grid: GridSpec
    labels: np.ndarray  # (n, n) uint8 ObjectClass codes
    velocities: np.ndarray | None = None  # (n, n, 2) ego-frame m/s

    @classmethod
    def empty(cls, grid: GridSpec, with_velocities: bool = True) -> PredictedCellMap:
        labels = np.zeros(grid.shape, dtype=np.uint8)
        vel = np.zeros((*grid.shape, 2), dtype=np.float32) if with_velocities else None
        return cls(grid, labels, vel)

    def class_counts(self) -> dict[ObjectClass, int]:
        counts = np.bincount(self.labels.ravel(), minlength=len(ObjectClass))
        return {c: int(counts[c]) for c in ObjectClass}


def _predict_with_velocity(track: Track, t_target: float, mode: str, cfg: PredictorConfig):
    if mode == "kf":
        kf = _filter_track(track, cfg.q, cfg.r)
        kf.predict(t_target - track.last.timestamp)
        x, y, vx, vy = kf.x
        return Pose2(x, y, _heading(vx, vy, track.last.pose.yaw)), np.array([vx, vy])
    pose = predict_cv(track, t_target, cfg.smoothing)
    if cfg.smoothing:
        vel = _least_squares_velocity(track.observations[-5:])
    else:
        vel = _finite_difference(track.observations)
    return pose, np.array(vel)


def render_prediction(
    store: TrackStore,
    t_target: float,
    grid: GridSpec,
    mode: str | None = None,
    ego_pose: Pose2 | None = None,
) -> PredictedCellMap:
    """Paint every predictable track's expected footprint at ``t_target``.

    Track poses live in whatever frame they were ingested in; pass the target
    frame's ``ego_pose`` to move world-frame predictions into that ego frame.
    Overlaps go to the larger footprint, then the smaller ``object_key``.
    """
    cfg = store.config
    mode = mode or cfg.mode
    if mode not in ("cv", "kf"):
        raise ConfigError(f"predictor mode must be 'cv' or 'kf', got {mode!r}")

    # a CV velocity needs two fixes; the filter can extrapolate from one
    need = cfg.min_observations if mode == "kf" else max(2, cfg.min_observations)
    out = PredictedCellMap.empty(grid)
    painted = []
    for key in sorted(store.tracks):
        track = store.tracks[key]
        if len(track.observations) < need:
            continue
        pose, vel = _predict_with_velocity(track, t_target, mode, cfg)
        if ego_pose is not None:
            pose = ego_transform(pose, ego_pose)
            c, s = math.cos(ego_pose.yaw), math.sin(ego_pose.yaw)
            vel = np.array([c * vel[0] + s * vel[1], -s * vel[0] + c * vel[1]])
        painted.append((key, track.object_class, ObbBev((pose.x, pose.y), track.last.size, pose.yaw), vel))

    footprints = rasterize_many([p[2] for p in painted], grid)
    stamps = [
        (-len(cells), key, cls, cells, vel)
        for (key, cls, _, vel), cells in zip(painted, footprints)
        if len(cells)
    ]

    stamps.sort(key=lambda s: (s[0], s[1]))
    for _, _, cls, cells, vel in stamps:
        rows, cols = cells[:, 0], cells[:, 1]
        free = out.labels[rows, cols] == ObjectClass.Background
        rows, cols = rows[free], cols[free]
        out.labels[rows, cols] = cls
        out.velocities[rows, cols] = vel
    return out
