"""
How well do predicted cells line up with detections?
====================================================

The match ratio counts, for every genuine detection, how many cells of its
footprint the motion predictor labelled with the same class. It is a
direct measure of predictor/detector agreement, before any verdict.
"""

from ghostcheck.alignment import Region
from ghostcheck.geometry import ObjectClass
from ghostcheck.metrics import match_ratio
from ghostcheck.pipeline import Pipeline, PipelineConfig
from ghostcheck.prediction import PredictorConfig
from ghostcheck.simulator import DetectorStubConfig, SceneConfig, generate_scenes


def ratios(log, config=None):
    pipe = Pipeline(config)
    aligned, maps = [], []
    for _, frames in log.scenes():
        for t in pipe.trace_scene(frames):
            aligned.append(t.aligned)
            maps.append(t.cell_map)
    return match_ratio(aligned, maps)


noisy = generate_scenes([SceneConfig(seed=s) for s in range(4)])
print("default detector noise (0.1 m position sigma)")
print(ratios(noisy).to_csv())

# with a perfect detector the constant-velocity predictor is almost exact
clean_det = DetectorStubConfig(position_sigma=0.0, yaw_sigma=0.0, drop_probability=0.0)
clean = generate_scenes([SceneConfig(seed=s, detector=clean_det) for s in range(4)])
print("noiseless detector")
print(ratios(clean).to_csv())

# predictor variants on the noisy log: least-squares smoothing and a Kalman filter
V = ObjectClass.Vehicle
for name, pred in [("finite difference", PredictorConfig()),
                   ("smoothed", PredictorConfig(smoothing=True)),
                   ("kalman", PredictorConfig(mode="kf")),
                   ("no ego compensation", PredictorConfig(ego_compensation=False))]:
    r = ratios(noisy, PipelineConfig(predictor=pred))
    print(f"{name:>20}: Vehicle near {r.ratio(V, Region.FrontNear):.3f}  far {r.ratio(V, Region.FrontFar):.3f}")
