"""
Catching a spoofed car
======================

Simulate a few drives, plant a fake car a few metres ahead in every key
frame, and let the consistency check judge each detection against where
the motion history says objects should be.
"""

from ghostcheck.alignment import Provenance
from ghostcheck.detection import Decision
from ghostcheck.geometry import ObjectClass
from ghostcheck.metrics import AttackBookkeeping, attack_eval
from ghostcheck.pipeline import Pipeline
from ghostcheck.simulator import AttackConfig, SceneConfig, generate_scenes, inject_attack

log = generate_scenes([SceneConfig(seed=s) for s in range(4)])
print(len(log), "frames,", len(log.key_frames), "key frames in", len(log.scenes()), "scenes")

# single-frame Vehicle ghosts 5-8 m ahead; the stub detector reports each one with probability 0.97
attacked = inject_attack(log, AttackConfig(target_class=ObjectClass.Vehicle), seed=3, p_asr=0.97)

pipe = Pipeline()
traces = [t for _, frames in attacked.scenes() for t in pipe.trace_scene(frames)]

# look at the first ghost the detector actually reported
for t in traces:
    ghost = next((a for a in t.aligned if a.detection.provenance == Provenance.injected), None)
    if ghost is not None:
        break
v = t.verdicts[t.aligned.index(ghost)]
print("\nghost", ghost.detection.detection_id, "in", ghost.region.value,
      "at x=%.1f y=%.1f" % ghost.detection.box.center[:2])
print("footprint cells:", len(ghost.footprint_cells))
print("predicted labels under it:", {c.name: n for c, n in v.class_counts.items() if n})
print("verdict:", v.decision.value)

# a genuine car in the same frame, for contrast
real = next(i for i, a in enumerate(t.aligned)
            if a.detection.object_class == ObjectClass.Vehicle and a.detection.provenance != Provenance.injected)
rv = t.verdicts[real]
print("\ngenuine", rv.detection_id, "labels:", {c.name: n for c, n in rv.class_counts.items() if n},
      "match %.2f" % rv.match_fraction, "->", rv.decision.value)

# aggregate over every key frame; small boxes sit on few predicted cells, so
# 0.1 m of detector noise is enough to push pedestrians off their own label
report = attack_eval([t.to_verdicts() for t in traces], AttackBookkeeping.from_log(attacked))
print("\n" + report.to_csv())

flagged = sum(v.decision == Decision.Spoofed for t in traces for v in t.verdicts)
print("total Spoofed verdicts:", flagged)
