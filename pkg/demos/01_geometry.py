"""
Boxes on the bird's-eye grid
============================

How an oriented box becomes a set of grid cells, and how ego poses move
points between frames.
"""

import numpy as np

from ghostcheck.geometry import GridSpec, ObbBev, Pose2, cell_center, ego_to_world, ego_transform, rasterize

# the default grid: 0.25 m cells, 32 m each side of the ego, 256 x 256
grid = GridSpec()
print("grid", grid.shape, "cell", grid.cell_size, "m")

# a cell is in the footprint when its centre lies inside the closed rectangle
car = ObbBev(center=(10.0, 2.0), size=(4.5, 1.8), yaw=0.3)
cells = rasterize(car, grid)
print("car covers", len(cells), "cells, area", len(cells) * grid.cell_size**2, "m^2 (box is", 4.5 * 1.8, "m^2)")

# a 2 m x 1 m box whose centre sits on a cell corner covers exactly 8 x 4 cells
corner = ObbBev((0.0, 0.0), (2.0, 1.0))
print("axis-aligned corner box:", len(rasterize(corner, grid)), "cells")

# the footprint is an (N, 2) array of (row, col); row follows ego x, col ego y
row, col = cells[0]
print("first cell", (int(row), int(col)), "centre", tuple(float(v) for v in cell_center((row, col), grid)))

# small text picture of the footprint
r0, c0 = cells.min(axis=0)
r1, c1 = cells.max(axis=0)
pic = np.full((r1 - r0 + 1, c1 - c0 + 1), ".")
pic[cells[:, 0] - r0, cells[:, 1] - c0] = "#"
print("\n".join("".join(line) for line in pic[::-1]))

# boxes past the grid edge are clipped, never wrapped
edge = ObbBev((31.5, 0.0), (4.0, 2.0))
print("box on the edge keeps", len(rasterize(edge, grid)), "cells")

# ego poses: a point 5 m ahead of an ego at (100, 50) facing +y
ego = Pose2(100.0, 50.0, np.pi / 2)
world = ego_to_world(Pose2(5.0, 0.0, 0.0), ego)
print("world", (round(world.x, 6), round(world.y, 6)), "back in ego", ego_transform(world, ego))
