import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostcheck.geometry import (
    CellIndex,
    GridSpec,
    Obb3,
    ObbBev,
    ObjectClass,
    Pose2,
    cell_center,
    cells_to_set,
    ego_to_world,
    ego_transform,
    normalize_angle,
    point_to_cell,
    project_to_bev,
    rasterize,
    rasterize_many,
)
from oracles import brute_force_cells, brute_force_cells_scalar

GRIDS = [
    GridSpec(0.25, 32.0),
    GridSpec(0.5, 8.0),
    GridSpec(1.0, 2.0),
    GridSpec(0.2, 5.0),
    GridSpec(0.1, 2.5),
    GridSpec(0.3, 4.5),
]


def random_box(rng, grid):
    h = grid.half_extent
    return ObbBev(
        center=(rng.uniform(-1.2 * h, 1.2 * h), rng.uniform(-1.2 * h, 1.2 * h)),
        size=(rng.uniform(0.05, 0.4 * h), rng.uniform(0.05, 0.25 * h)),
        yaw=rng.uniform(-math.pi, math.pi),
    )


def lattice_box(rng, grid):
    """Edges and centre on the cell-centre lattice, so boundary ties are common."""
    cs = grid.cell_size
    k = grid.cells_per_side // 2
    return ObbBev(
        center=(cs * (rng.integers(-k, k) + 0.5), cs * (rng.integers(-k, k) + 0.5)),
        size=(cs * rng.integers(1, 12), cs * rng.integers(1, 8)),
        yaw=float(rng.choice([0.0, math.pi / 2, math.pi, -math.pi / 2])),
    )


# --- poses and transforms ----------------------------------------------------

def test_normalize_angle_range():
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_pose_rejects_non_finite():
    with pytest.raises(ValueError):
        Pose2(float("nan"), 0.0)


@pytest.mark.parametrize(
    "world, ego, expected",
    [
        (Pose2(5, 0, 0), Pose2(0, 0, 0), (5, 0, 0)),
        (Pose2(1, 0, 0), Pose2(0, 0, math.pi / 2), (0, -1, -math.pi / 2)),
        (Pose2(3.3, -1.2, 0.7), Pose2(3.3, -1.2, 0.7), (0, 0, 0)),
    ],
)
def test_ego_transform_examples(world, ego, expected):
    got = ego_transform(world, ego)
    assert (got.x, got.y, got.yaw) == pytest.approx(expected, abs=1e-12)


finite = st.floats(-1e3, 1e3, allow_nan=False)
angle = st.floats(-10, 10, allow_nan=False)


@given(finite, finite, angle, finite, finite, angle)
def test_ego_transform_inverse(x, y, yaw, ex, ey, eyaw):
    world, ego = Pose2(x, y, yaw), Pose2(ex, ey, eyaw)
    back = ego_to_world(ego_transform(world, ego), ego)
    assert math.hypot(back.x - world.x, back.y - world.y) <= 1e-9
    assert abs(normalize_angle(back.yaw - world.yaw)) <= 1e-9


# --- grid --------------------------------------------------------------------

def test_default_grid_is_256():
    assert GridSpec().shape == (256, 256)


@pytest.mark.parametrize("cell, half", [(0.3, 1.0), (0.0, 1.0), (1.0, -2.0), (0.7, 32.0)])
def test_grid_rejects_bad_specs(cell, half):
    with pytest.raises(ValueError):
        GridSpec(cell, half)


def test_cell_center_corner_convention():
    g = GridSpec(1.0, 2.0)
    assert g.cells_per_side == 4
    assert cell_center(CellIndex(0, 0), g) == (-1.5, -1.5)
    # row follows x, column follows y
    assert cell_center((3, 0), g) == (1.5, -1.5)


def test_cell_center_odd_grid_middle():
    g = GridSpec(1.0, 1.5)
    assert g.cells_per_side == 3
    assert cell_center((1, 1), g) == (0.0, 0.0)
    assert cell_center((2, 1), g) == (1.0, 0.0)


def test_cell_center_out_of_range():
    with pytest.raises(IndexError):
        cell_center((4, 0), GridSpec(1.0, 2.0))


@pytest.mark.parametrize("grid", GRIDS, ids=str)
def test_cell_round_trip(grid):
    n = grid.cells_per_side
    for i in range(n):
        for j in range(0, n, max(1, n // 7)):
            assert point_to_cell(*cell_center((i, j), grid), grid) == (i, j)


def test_point_outside_grid():
    assert point_to_cell(2.0, 0.0, GridSpec(1.0, 2.0)) is None
    assert point_to_cell(-2.0, -2.0, GridSpec(1.0, 2.0)) == (0, 0)


# --- boxes and projection ----------------------------------------------------

@pytest.mark.parametrize(
    "box",
    [
        Obb3((5, 0, 1), (4, 2, 1.5), 0.0),
        Obb3((0, 0, 0), (1, 1, 1), math.pi / 2),
        Obb3((-3.2, 7.7, 0.9), (4.5, 1.8, 1.6), 0.3),
    ],
)
def test_project_to_bev_copies_planar_fields(box):
    bev = project_to_bev(box)
    assert bev == ObbBev(box.center[:2], box.size[:2], box.yaw)


def test_box_validation():
    with pytest.raises(ValueError):
        Obb3((0, 0, 0), (1, 0, 1))
    with pytest.raises(ValueError):
        Obb3((0, float("inf"), 0), (1, 1, 1))
    with pytest.raises(ValueError):
        ObbBev((0, 0), (-1, 1))


def test_object_class_aliases():
    assert ObjectClass.parse("car") == ObjectClass.Vehicle
    assert ObjectClass.parse("Cyclist") == ObjectClass.Bike
    assert ObjectClass.parse(2) == ObjectClass.Pedestrian
    with pytest.raises(ValueError):
        ObjectClass.parse("tree")


# --- rasterization -----------------------------------------------------------

def test_box_on_cell_corner_covers_32_cells():
    g = GridSpec(0.5, 8.0)
    cells = cells_to_set(rasterize(ObbBev((0.0, 0.0), (4.0, 2.0)), g))
    assert cells == brute_force_cells_scalar(ObbBev((0.0, 0.0), (4.0, 2.0)), g)
    assert len(cells) == 32


def test_box_on_cell_centre_includes_both_edges():
    # edges fall exactly on centre rows/columns; the closed rule keeps them
    g = GridSpec(0.5, 8.0)
    box = ObbBev((0.25, 0.25), (4.0, 2.0))
    cells = cells_to_set(rasterize(box, g))
    assert cells == brute_force_cells_scalar(box, g)
    assert len(cells) == 9 * 5


def test_tiny_box_on_centre_is_one_cell():
    g = GridSpec(0.5, 8.0)
    cells = rasterize(ObbBev((0.25, -0.75), (0.1, 0.1)), g)
    assert cells.tolist() == [[16, 14]]
    assert cell_center((16, 14), g) == (0.25, -0.75)


def test_box_outside_grid_is_empty():
    g = GridSpec()
    assert rasterize(ObbBev((g.half_extent + 10, 0.0), (4, 2)), g).shape == (0, 2)


def test_box_between_centres_is_empty():
    g = GridSpec(1.0, 4.0)
    assert len(rasterize(ObbBev((0.0, 0.0), (0.5, 0.5)), g)) == 0


def test_partially_outside_box_is_clipped():
    g = GridSpec(1.0, 2.0)
    cells = cells_to_set(rasterize(ObbBev((2.0, 0.0), (2.0, 4.0)), g))
    assert cells == {CellIndex(3, j) for j in range(4)}


@pytest.mark.parametrize("grid", GRIDS, ids=str)
def test_rasterize_matches_brute_force(grid):
    rng = np.random.default_rng(int(grid.cell_size * 1000 + grid.half_extent))
    boxes = [random_box(rng, grid) for _ in range(150)] + [lattice_box(rng, grid) for _ in range(50)]
    batch = rasterize_many(boxes, grid)
    for box, many in zip(boxes, batch):
        single = rasterize(box, grid)
        expected = brute_force_cells(box, grid)
        assert cells_to_set(single) == expected, box
        assert np.array_equal(single, many), box


def test_scalar_and_vector_oracles_agree():
    grid = GridSpec(0.5, 3.0)
    rng = np.random.default_rng(3)
    for _ in range(40):
        box = random_box(rng, grid)
        assert brute_force_cells(box, grid) == brute_force_cells_scalar(box, grid)


def test_rasterize_output_is_row_major():
    g = GridSpec(0.25, 8.0)
    cells = rasterize(ObbBev((1.0, -2.0), (3.0, 1.2), 0.4), g)
    keys = cells[:, 0] * g.cells_per_side + cells[:, 1]
    assert np.all(np.diff(keys) > 0)


def test_rasterize_many_large_batch_falls_back():
    g = GridSpec(0.1, 30.0)
    boxes = [ObbBev((0.0, 0.0), (50.0, 50.0), 0.3)] * 3
    out = rasterize_many(boxes, g)
    assert all(np.array_equal(o, rasterize(boxes[0], g)) for o in out)


def test_rasterize_many_empty_inputs():
    g = GridSpec()
    assert rasterize_many([], g) == []
    out = rasterize_many([ObbBev((100.0, 0.0), (1, 1)), ObbBev((0.0, 0.0), (1, 1))], g)
    assert len(out[0]) == 0 and len(out[1]) == 16


boxes = st.builds(
    ObbBev,
    center=st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    size=st.tuples(st.floats(0.05, 8), st.floats(0.05, 8)),
    yaw=st.floats(-math.pi, math.pi),
)
grid_small = GridSpec(0.25, 12.0)


@settings(max_examples=300, deadline=None)
@given(boxes)
def test_half_turn_symmetry(box):
    turned = ObbBev(box.center, box.size, box.yaw + math.pi)
    assert cells_to_set(rasterize(box, grid_small)) == cells_to_set(rasterize(turned, grid_small))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([0.0, math.pi / 2, -math.pi / 2, math.pi]), st.integers(-30, 30),
       st.integers(-30, 30), st.integers(1, 20), st.integers(1, 20))
def test_half_turn_on_lattice_boxes(yaw, i, j, a, b):
    # edges land exactly on cell centres here
    box = ObbBev((0.125 * i, 0.125 * j), (0.25 * a, 0.25 * b), yaw)
    turned = ObbBev(box.center, box.size, yaw + math.pi)
    got = cells_to_set(rasterize(box, grid_small))
    assert got == cells_to_set(rasterize(turned, grid_small))
    assert got == brute_force_cells(box, grid_small)


@settings(max_examples=200, deadline=None)
@given(boxes, st.floats(1.0, 3.0, exclude_min=True))
def test_enlarging_gives_superset(box, k):
    big = ObbBev(box.center, (box.size[0] * k, box.size[1] * k), box.yaw)
    assert cells_to_set(rasterize(box, grid_small)) <= cells_to_set(rasterize(big, grid_small))
