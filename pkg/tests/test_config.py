import json

import pytest

from ghostcheck.config import CONFIG_ENV_VAR, RunConfig, load_config, parse_config
from ghostcheck.errors import ConfigError
from ghostcheck.geometry import GridSpec, ObjectClass


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_without_file(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
    cfg = load_config(None)
    assert cfg == RunConfig()
    assert cfg.pipeline.grid == GridSpec(0.25, 32.0)
    p = cfg.pipeline.predictor
    assert (p.mode, p.history_depth, p.min_observations, p.gating_radius, p.max_coast, p.q, p.r) == (
        "cv", 20, 2, 2.0, 2, 0.5, 0.1)
    assert cfg.pipeline.region.near_distance == 8.0
    assert not cfg.pipeline.cmcs.strict_majority and not cfg.pipeline.cmcs.others_is_wildcard
    det = cfg.simulation.scene.detector
    assert (det.position_sigma, det.yaw_sigma, det.drop_probability, det.p_asr) == (0.1, 0.02, 0.02, 0.97)
    assert cfg.simulation.scene.frame_rate == 2.0
    assert cfg.attack.distance_range == (5.0, 8.0) and cfg.attack.point_budget == 200


def test_full_document(tmp_path):
    path = write(tmp_path, """
grid: {cell_size: 0.5, half_extent: 16}
predictor: {mode: kf, history_depth: 10, association: nearest, q: 1.0}
region: {near_distance: 6, lidar_offset: [0.5, 0]}
cmcs: {tie_break: background-first, strict_majority: true}
pipeline: {benign_history: false}
simulator:
  scenes: 3
  seed: 9
  duration: 20
  object_census: {car: 3, pedestrian: 1}
  speed_ranges: {Vehicle: [1, 2]}
  detector: {position_sigma: 0.0, drop_probability: 0.0}
attack: {target_class: Bike, distance_range: [6, 7], seed: 4, frames: [12, 15]}
bench: {repetitions: 20, warmup: 1}
output: {log: out.jsonl}
""")
    cfg = load_config(path)
    assert cfg.pipeline.grid.cells_per_side == 64
    assert cfg.pipeline.predictor.mode == "kf"
    assert cfg.pipeline.region.lidar_offset == (0.5, 0)
    assert cfg.pipeline.cmcs.strict_majority and not cfg.pipeline.benign_history
    scenes = cfg.simulation.scene_configs()
    assert [s.seed for s in scenes] == [9, 10, 11]
    assert scenes[0].history_depth == 10
    assert scenes[0].object_census == {ObjectClass.Vehicle: 3, ObjectClass.Pedestrian: 1}
    assert scenes[0].speed_ranges == {ObjectClass.Vehicle: (1, 2)}
    assert cfg.attack.target_class == ObjectClass.Bike and cfg.attack.frames == (12, 15)
    assert cfg.attack_seed == 4 and cfg.bench_repetitions == 20
    assert cfg.output["log"] == "out.jsonl" and cfg.output["verdicts"] is None
    assert [s.seed for s in cfg.simulation.scene_configs(100)] == [100, 101, 102]


@pytest.mark.parametrize(
    "text, where",
    [
        ("grid:\n  cell_size: 0.25\n  cell_sise: 1\n", "run.yaml:3: grid.cell_sise"),
        ("predictor:\n  mode: cv\n\nbogus: 1\n", "run.yaml:4: bogus"),
        ("simulator:\n  detector:\n    p_asr: 0.5\n    noise: 1\n", "run.yaml:4: simulator.detector.noise"),
    ],
)
def test_unknown_key_has_location(tmp_path, text, where):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, text))
    assert where in str(err.value) and "unknown key" in str(err.value)


@pytest.mark.parametrize(
    "text",
    [
        "grid: {cell_size: 0.3, half_extent: 1}\n",
        "predictor: {mode: particle}\n",
        "cmcs: {tie_break: vehicle-first}\n",
        "attack: {target_class: Background}\n",
        "simulator: {duration: 5}\n",
        "bench: {repetitions: 3}\n",
        "grid: [1, 2]\n",
        "- just a list\n",
        "grid: {cell_size: [\n",
    ],
)
def test_invalid_values_are_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_json_and_env_var(tmp_path, monkeypatch):
    path = write(tmp_path, json.dumps({"region": {"near_distance": 10}}), "run.json")
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    assert load_config().pipeline.region.near_distance == 10


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_parse_config_empty():
    assert parse_config(None) == RunConfig()
