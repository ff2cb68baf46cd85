"""
Runtime per stage, and the same run from the command line
=========================================================

Time prediction, alignment and cell matching per key frame, then repeat
the whole simulate, attack, check, eval chain through the CLI.
"""

import json
import tempfile
from pathlib import Path

from ghostcheck.cli import main
from ghostcheck.geometry import ObjectClass
from ghostcheck.metrics import benchmark
from ghostcheck.pipeline import Pipeline
from ghostcheck.simulator import SceneConfig, generate_scenes

# a busy street: two dozen or so detections per frame
census = {ObjectClass.Vehicle: 24, ObjectClass.Pedestrian: 12, ObjectClass.Bike: 5, ObjectClass.Others: 3}
log = generate_scenes([SceneConfig(seed=s, duration=20, object_census=census) for s in range(2)])
print("detections per key frame:", min(len(f.detections) for f in log.key_frames), "to",
      max(len(f.detections) for f in log.key_frames))

report = benchmark(Pipeline(), log, repetitions=10, warmup=2)
for stage in ("prediction", "alignment", "detection", "total"):
    print(f"{stage:>10}: {1e3 * report.mean[stage]:7.3f} ms  (std {1e3 * report.std[stage]:.3f})")
print(f"{report.fps:.0f} frames per second over {report.frames} timed frames")

# the CLI writes JSON Lines logs and per-metric reports
with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "run.yaml"
    cfg.write_text("simulator: {scenes: 2, duration: 20}\nattack: {target_class: Vehicle}\n")
    steps = [
        ["simulate", "--output", str(tmp / "log.jsonl")],
        ["attack", str(tmp / "log.jsonl"), "--output", str(tmp / "attacked.jsonl")],
        ["check", str(tmp / "attacked.jsonl"), "--output", str(tmp / "verdicts.jsonl")],
        ["eval", str(tmp / "verdicts.jsonl"), str(tmp / "attacked.jsonl"), "--output", str(tmp / "reports")],
    ]
    for argv in steps:
        code = main([*argv, "--config", str(cfg), "--seed", "7"])
        print("ghostcheck", argv[0], "->", code)
    stats = json.loads((tmp / "reports" / "attack_eval.json").read_text())["Vehicle"]
    print("Vehicle ASR %.3f DSR %.3f" % (stats["asr"], stats["dsr"]))
