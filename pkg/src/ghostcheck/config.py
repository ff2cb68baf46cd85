"""Run configuration documents (YAML or JSON).

Every section is optional; omitted keys take the library defaults. Unknown
keys are rejected with their dotted path and, when available, file line::

    grid:      {cell_size: 0.25, half_extent: 32.0}
    predictor: {mode: cv, history_depth: 20, min_observations: 2,
                association: by-key, gating_radius: 2.0, max_coast: 2,
                smoothing: false, q: 0.5, r: 0.1, ego_compensation: true}
    region:    {near_distance: 8.0, front_cone_deg: null, lidar_offset: [0, 0]}
    cmcs:      {tie_break: background-first, strict_majority: false,
                others_is_wildcard: false}
    pipeline:  {benign_history: true}
    simulator: {scenes: 12, seed: 0, duration: 30.0, frame_rate: 2.0, ...,
                detector: {position_sigma: 0.1, yaw_sigma: 0.02,
                           drop_probability: 0.02, p_asr: 0.97}}
    attack:    {target_class: Vehicle, distance_range: [5, 8], seed: 1, ...}
    bench:     {repetitions: 50, warmup: 3}
    output:    {log: null, verdicts: null, reports: null}
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any

import yaml

from .alignment import RegionConfig
from .detection import CmcsConfig
from .errors import ConfigError
from .geometry import GridSpec, ObjectClass
from .pipeline import PipelineConfig
from .prediction import PredictorConfig
from .simulator import AttackConfig, DetectorStubConfig, SceneConfig

CONFIG_ENV_VAR = "GHOSTCHECK_CONFIG"


@dataclass(frozen=True)
class SimulationPlan:
    scenes: int = 12
    seed: int = 0
    scene: SceneConfig = field(default_factory=SceneConfig)

    def scene_configs(self, seed: int | None = None) -> list[SceneConfig]:
        base = self.seed if seed is None else seed
        return [dataclasses.replace(self.scene, seed=base + i, scene_id=None) for i in range(self.scenes)]


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    simulation: SimulationPlan = field(default_factory=SimulationPlan)
    attack: AttackConfig = field(default_factory=AttackConfig)
    attack_seed: int = 1
    bench_repetitions: int = 50
    bench_warmup: int = 3
    output: dict[str, str | None] = field(default_factory=lambda: {"log": None, "verdicts": None, "reports": None})

    @property
    def p_asr(self) -> float:
        return self.simulation.scene.detector.p_asr


class _Doc:
    """Walks a loaded mapping, tracking dotted paths and YAML line numbers."""

    def __init__(self, data: dict, lines: dict[str, int], source: str):
        self.data = data
        self.lines = lines
        self.source = source

    def where(self, path: str) -> str:
        line = self.lines.get(path)
        return f"{self.source}:{line}: {path}" if line else f"{self.source}: {path}"

    def section(self, path: str, allowed: set[str]) -> dict:
        node: Any = self.data
        for part in path.split(".") if path else []:
            node = node.get(part, {}) if isinstance(node, dict) else {}
        if node is None:
            node = {}
        if not isinstance(node, dict):
            raise ConfigError(f"{self.where(path)}: expected a mapping")
        for key in node:
            if key not in allowed:
                full = f"{path}.{key}" if path else str(key)
                raise ConfigError(f"{self.where(full)}: unknown key")
        return node


def _line_map(text: str) -> dict[str, int]:
    lines: dict[str, int] = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)

    walk(root, "")
    return lines


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, doc: _Doc, path: str, values: dict, **extra):
    try:
        return cls(**values, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{doc.where(path)}: {exc}") from exc


_TIE_BREAKS = {"background-first"}


def parse_config(data: dict | None, source: str = "<config>", lines: dict[str, int] | None = None) -> RunConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    doc = _Doc(data, lines or {}, source)
    doc.section("", {"grid", "predictor", "region", "cmcs", "pipeline", "simulator", "attack", "bench", "output"})

    grid = _build(GridSpec, doc, "grid", doc.section("grid", _field_names(GridSpec)))
    predictor = _build(PredictorConfig, doc, "predictor", doc.section("predictor", _field_names(PredictorConfig)))
    region_vals = dict(doc.section("region", _field_names(RegionConfig)))
    if "lidar_offset" in region_vals:
        region_vals["lidar_offset"] = tuple(region_vals["lidar_offset"])
    region = _build(RegionConfig, doc, "region", region_vals)

    cmcs_vals = dict(doc.section("cmcs", _field_names(CmcsConfig) | {"tie_break"}))
    tie = cmcs_vals.pop("tie_break", "background-first")
    if tie not in _TIE_BREAKS:
        raise ConfigError(f"{doc.where('cmcs.tie_break')}: unsupported tie_break {tie!r}")
    cmcs = _build(CmcsConfig, doc, "cmcs", cmcs_vals)

    pipe_vals = doc.section("pipeline", {"benign_history"})
    pipeline = PipelineConfig(grid=grid, predictor=predictor, region=region, cmcs=cmcs,
                              benign_history=bool(pipe_vals.get("benign_history", True)))

    scene_fields = _field_names(SceneConfig) - {"detector", "scene_id", "history_depth"}
    sim_vals = dict(doc.section("simulator", scene_fields | {"scenes", "detector"}))
    det = _build(DetectorStubConfig, doc, "simulator.detector",
                 doc.section("simulator.detector", _field_names(DetectorStubConfig)))
    sim_vals.pop("detector", None)
    n_scenes = int(sim_vals.pop("scenes", 12))
    seed = int(sim_vals.get("seed", 0))
    for key in ("object_census", "speed_ranges"):
        if key in sim_vals:
            try:
                sim_vals[key] = {ObjectClass.parse(k): (tuple(v) if isinstance(v, list) else v)
                                 for k, v in sim_vals[key].items()}
            except (ValueError, AttributeError) as exc:
                raise ConfigError(f"{doc.where('simulator.' + key)}: {exc}") from exc
    scene = _build(SceneConfig, doc, "simulator", sim_vals, detector=det,
                   history_depth=predictor.history_depth)
    if n_scenes < 1:
        raise ConfigError(f"{doc.where('simulator.scenes')}: must be >= 1")
    simulation = SimulationPlan(scenes=n_scenes, seed=seed, scene=scene)

    att_vals = dict(doc.section("attack", _field_names(AttackConfig) | {"seed"}))
    attack_seed = int(att_vals.pop("seed", 1))
    for key in ("distance_range", "ghost_size", "ghost_velocity"):
        if isinstance(att_vals.get(key), list):
            att_vals[key] = tuple(att_vals[key])
    if isinstance(att_vals.get("frames"), list):
        att_vals["frames"] = tuple(int(i) for i in att_vals["frames"])
    attack = _build(AttackConfig, doc, "attack", att_vals)

    bench = doc.section("bench", {"repetitions", "warmup"})
    reps, warm = int(bench.get("repetitions", 50)), int(bench.get("warmup", 3))
    if reps < 10:
        raise ConfigError(f"{doc.where('bench.repetitions')}: must be >= 10")
    output = {"log": None, "verdicts": None, "reports": None}
    output.update(doc.section("output", set(output)))

    return RunConfig(pipeline, simulation, attack, attack_seed, reps, warm, output)


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Load ``path``, else ``$GHOSTCHECK_CONFIG``, else pure defaults."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(data, str(path), _line_map(text))
