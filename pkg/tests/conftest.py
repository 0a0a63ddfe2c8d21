import math

import numpy as np
import pytest

from lidarplace.geometry import (
    ClassLabel,
    Dataset,
    LabelFrame,
    OrientedBox,
    RoiSpec,
    build_grid,
    point_in_box,
    voxel_center,
)


@pytest.fixture
def small_grid():
    # 20 x 20 x 5 cells, delta 1.0
    return build_grid(RoiSpec(0.0, 20.0, 0.0, 20.0, 0.0, 5.0, 1.0))


def exhaustive_rasterize(box, grid):
    """Oracle: scan every voxel center through point_in_box."""
    out = []
    for idx in range(grid.m):
        if point_in_box(voxel_center(grid, idx), box):
            out.append(idx)
    return np.array(out, dtype=np.int64)


def random_box(rng, grid, class_label=ClassLabel.CAR, inside=True):
    roi = grid.roi
    if inside:
        cx = rng.uniform(roi.x_min + 2, roi.x_max - 2)
        cy = rng.uniform(roi.y_min + 2, roi.y_max - 2)
        cz = rng.uniform(roi.z_min + 1, roi.z_max - 1)
    else:
        cx = rng.uniform(roi.x_min - 20, roi.x_max + 20)
        cy = rng.uniform(roi.y_min - 20, roi.y_max + 20)
        cz = rng.uniform(roi.z_min - 5, roi.z_max + 5)
    size = (rng.uniform(0.5, 6.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.5))
    return OrientedBox(
        center=(cx, cy, cz),
        size=size,
        yaw=rng.uniform(-math.pi, math.pi),
        class_label=class_label,
    )


def random_dataset(rng, grid, frames=10, max_boxes=5, class_label=ClassLabel.CAR):
    out = []
    for t in range(frames):
        n = int(rng.integers(0, max_boxes + 1))
        boxes = tuple(random_box(rng, grid, class_label) for _ in range(n))
        out.append(LabelFrame(frame_id=f"{t:06d}", boxes=boxes))
    return Dataset(tuple(out))


def bresenham_loop_oracle(start, stop):
    """Classic 3D error-accumulation Bresenham, one step at a time."""
    start = [int(v) for v in start]
    stop = [int(v) for v in stop]
    d = [stop[i] - start[i] for i in range(3)]
    ad = [abs(v) for v in d]
    sign = [0 if v == 0 else (1 if v > 0 else -1) for v in d]
    axis = max(range(3), key=lambda i: ad[i])
    dm = ad[axis]
    cells = [tuple(start)]
    if dm == 0:
        return cells
    others = [i for i in range(3) if i != axis]
    err = [2 * ad[i] - dm for i in others]
    cur = list(start)
    for _ in range(dm):
        cur[axis] += sign[axis]
        for j, i in enumerate(others):
            if err[j] >= 0:
                cur[i] += sign[i]
                err[j] -= 2 * dm
            err[j] += 2 * ad[i]
        cells.append(tuple(cur))
    return cells
