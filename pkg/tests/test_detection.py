import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghostcheck.alignment import AlignedDetection, Detection, Region, align
from ghostcheck.detection import (
    TIE_PRECEDENCE,
    CmcsConfig,
    Decision,
    check_frame,
    cmcs,
    compatible,
    plurality,
    tally,
)
from ghostcheck.geometry import GridSpec, Obb3, ObjectClass
from ghostcheck.prediction import PredictedCellMap
from oracles import tally_oracle

BG, V, P, B, O = (ObjectClass.Background, ObjectClass.Vehicle, ObjectClass.Pedestrian,
                  ObjectClass.Bike, ObjectClass.Others)
GRID = GridSpec(1.0, 5.0)  # 10 x 10


def aligned_on(cells, cls=V, did="d"):
    d = Detection(did, cls, Obb3((0, 0, 0), (1, 1, 1)))
    return AlignedDetection(d, np.array(cells, dtype=np.int64).reshape(-1, 2), Region.FrontNear)


def map_with(assign: dict):
    m = PredictedCellMap.empty(GRID)
    for (r, c), cls in assign.items():
        m.labels[r, c] = cls
    return m


FOOTPRINT = [(2, j) for j in range(10)]


def test_seven_three_is_benign():
    m = map_with({cell: (V if k < 7 else BG) for k, cell in enumerate(FOOTPRINT)})
    v = cmcs(aligned_on(FOOTPRINT), m)
    assert v.class_counts[V] == 7 and v.class_counts[BG] == 3
    assert v.decision == Decision.Benign
    assert v.match_fraction == 0.7
    assert v.plurality_class == V


def test_all_background_is_spoofed():
    v = cmcs(aligned_on(FOOTPRINT), PredictedCellMap.empty(GRID))
    assert v.decision == Decision.Spoofed
    assert v.class_counts[BG] == 10 and v.match_fraction == 0.0


def test_empty_footprint_is_unverifiable():
    v = cmcs(aligned_on([]), PredictedCellMap.empty(GRID))
    assert v.decision == Decision.Unverifiable
    assert v.total_cells == 0 and v.match_fraction == 0.0


def test_tie_with_background_flags():
    m = map_with({cell: (V if k < 5 else BG) for k, cell in enumerate(FOOTPRINT)})
    v = cmcs(aligned_on(FOOTPRINT), m)
    assert v.plurality_class == BG and v.decision == Decision.Spoofed


@pytest.mark.parametrize("a, b", list(itertools.combinations(list(ObjectClass), 2)))
def test_tie_precedence_pairs(a, b):
    counts = np.zeros(5, dtype=np.int64)
    counts[a] = counts[b] = 4
    winner = a if TIE_PRECEDENCE.index(a) < TIE_PRECEDENCE.index(b) else b
    assert plurality(counts) == winner


def test_precedence_order():
    assert TIE_PRECEDENCE == (BG, O, V, P, B)


def test_foreground_mismatch_is_spoofed_with_tally():
    m = map_with({cell: V for cell in FOOTPRINT})
    v = cmcs(aligned_on(FOOTPRINT, cls=P), m)
    assert v.decision == Decision.Spoofed
    assert v.plurality_class == V and v.class_counts[V] == 10


def test_strict_majority_mode():
    half = map_with({cell: (V if k < 5 else BG) for k, cell in enumerate(FOOTPRINT)})
    six = map_with({cell: (V if k < 6 else BG) for k, cell in enumerate(FOOTPRINT)})
    strict = CmcsConfig(strict_majority=True)
    assert cmcs(aligned_on(FOOTPRINT), half, strict).decision == Decision.Spoofed
    assert cmcs(aligned_on(FOOTPRINT), six, strict).decision == Decision.Benign
    # plurality without a majority passes only in the default mode
    mixed = map_with({cell: (V if k < 4 else (P if k < 7 else BG)) for k, cell in enumerate(FOOTPRINT)})
    assert cmcs(aligned_on(FOOTPRINT), mixed).decision == Decision.Benign
    assert cmcs(aligned_on(FOOTPRINT), mixed, strict).decision == Decision.Spoofed


def test_others_wildcard():
    m = map_with({cell: O for cell in FOOTPRINT})
    assert cmcs(aligned_on(FOOTPRINT), m).decision == Decision.Spoofed
    assert cmcs(aligned_on(FOOTPRINT), m, CmcsConfig(others_is_wildcard=True)).decision == Decision.Benign


def test_compatibility_table():
    for d in (V, P, B, O):
        for p in ObjectClass:
            assert compatible(d, p) == (d == p)
            assert compatible(d, p, True) == (d == p or p == O)


def test_check_frame_empty_and_order():
    assert check_frame([], PredictedCellMap.empty(GRID)) == []
    m = map_with({(2, j): V for j in range(4)})
    frame = [aligned_on([(2, j) for j in range(4)], did="real"), aligned_on([(7, 7), (7, 8)], did="ghost")]
    verdicts = check_frame(frame, m)
    assert [v.detection_id for v in verdicts] == ["real", "ghost"]
    assert [v.decision for v in verdicts] == [Decision.Benign, Decision.Spoofed]
    assert check_frame(frame[:1], m)[0] == verdicts[0]


labels = st.lists(st.sampled_from(list(ObjectClass)), min_size=100, max_size=100)
footprint = st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), unique=True, max_size=60)


@given(labels, footprint, st.sampled_from([V, P, B, O]), st.booleans(), st.booleans())
def test_cmcs_against_tally_oracle(flat, cells, cls, strict, wild):
    m = PredictedCellMap.empty(GRID)
    m.labels[:] = np.array(flat, dtype=np.uint8).reshape(10, 10)
    v = cmcs(aligned_on(cells, cls), m, CmcsConfig(strict, wild))
    expected = tally_oracle(cells, m.labels)
    assert {c: n for c, n in v.class_counts.items() if n} == {ObjectClass(k): n for k, n in expected.items()}
    assert v.total_cells == len(cells)
    assert v.match_fraction == expected.get(int(cls), 0) / max(1, len(cells))
    if not cells:
        assert v.decision == Decision.Unverifiable
        return
    top = max(expected.values())
    winners = [c for c in TIE_PRECEDENCE if expected.get(int(c), 0) == top]
    assert v.plurality_class == winners[0]
    matched = sum(n for k, n in expected.items() if compatible(cls, ObjectClass(k), wild))
    if strict:
        benign = matched / len(cells) > 0.5
    else:
        benign = compatible(cls, winners[0], wild)
    assert v.decision == (Decision.Benign if benign else Decision.Spoofed)


@given(footprint)
def test_pure_own_class_is_benign_pure_background_is_spoofed(cells):
    if not cells:
        return
    own = map_with({c: B for c in cells})
    assert cmcs(aligned_on(cells, B), own).decision == Decision.Benign
    assert cmcs(aligned_on(cells, B), PredictedCellMap.empty(GRID)).decision == Decision.Spoofed


def test_tally_uses_every_cell():
    m = map_with({(0, 0): V, (0, 1): P})
    counts = tally(np.array([[0, 0], [0, 1], [0, 2]]), m)
    assert counts.tolist() == [1, 1, 1, 0, 0]


def test_leave_one_out_isolation_random_frames():
    rng = np.random.default_rng(5)
    grid = GridSpec()
    for _ in range(20):
        m = PredictedCellMap.empty(grid)
        m.labels[:] = rng.integers(0, 5, grid.shape, dtype=np.uint8)
        dets = [
            Detection(str(k), ObjectClass(int(rng.integers(1, 5))),
                      Obb3((*rng.uniform(-30, 30, 2), 0.5), (*rng.uniform(0.3, 5, 2), 1.0), rng.uniform(-3, 3)))
            for k in range(int(rng.integers(1, 12)))
        ]
        full = check_frame(align(dets, m), m)
        for drop in range(len(dets)):
            rest = dets[:drop] + dets[drop + 1:]
            assert check_frame(align(rest, m), m) == full[:drop] + full[drop + 1:]
