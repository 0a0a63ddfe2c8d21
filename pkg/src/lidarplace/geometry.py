"""Poses, oriented 3D boxes, the voxelized region of interest, and box rasterization.

Internal coordinate convention is right-handed: x forward, y left, z up.
Voxel i on an axis owns the half-open interval [min + i*delta, min + (i+1)*delta),
so lower faces belong to a voxel and the upper grid boundary does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, UnsupportedTransformError

TWO_PI = 2.0 * math.pi

#: Default voxel edge length in meters; yields an 800k-voxel front-half grid.
DEFAULT_DELTA = 0.2


def normalize_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi]."""
    return math.remainder(a, TWO_PI)


@dataclass(frozen=True)
class Pose:
    """A rigid pose: translation in meters, roll/pitch/yaw in radians.

    Angles are normalized to [-pi, pi] at construction. Rotation order is
    intrinsic Z-Y-X: R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "roll", "pitch", "yaw"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigurationError(f"pose field {name} must be finite, got {v!r}")
        object.__setattr__(self, "roll", normalize_angle(self.roll))
        object.__setattr__(self, "pitch", normalize_angle(self.pitch))
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.roll, self.pitch, self.yaw)

    @property
    def is_identity(self) -> bool:
        return (self.x, self.y, self.z, self.roll, self.pitch, self.yaw) == (0, 0, 0, 0, 0, 0)


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Right-handed rotation matrix, intrinsic Z-Y-X order."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class RoiSpec:
    """Axis-aligned region of interest with a fixed voxel resolution (meters)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ConfigurationError(f"delta must be positive and finite, got {self.delta!r}")
        for axis in ("x", "y", "z"):
            lo = getattr(self, f"{axis}_min")
            hi = getattr(self, f"{axis}_max")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigurationError(f"{axis}_min/{axis}_max must be finite")
            if not hi > lo:
                raise ConfigurationError(
                    f"{axis}_max ({hi}) must be greater than {axis}_min ({lo})"
                )
            n = (hi - lo) / self.delta
            if abs(n - round(n)) > 1e-9 * max(1.0, round(n)):
                raise ConfigurationError(
                    f"{axis} extent {hi - lo} is not an integer multiple of delta {self.delta}"
                )

    def axis_cells(self, axis: str) -> int:
        lo = getattr(self, f"{axis}_min")
        hi = getattr(self, f"{axis}_max")
        return int(round((hi - lo) / self.delta))

    def mins(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.z_min], dtype=np.float64)

    def maxs(self) -> np.ndarray:
        return np.array([self.x_max, self.y_max, self.z_max], dtype=np.float64)


def front_half_roi(delta: float = DEFAULT_DELTA) -> RoiSpec:
    """Default metric region: the front half around the ego vehicle."""
    return RoiSpec(0.0, 40.0, -20.0, 20.0, -3.0, 1.0, delta)


def full_roi(delta: float = DEFAULT_DELTA) -> RoiSpec:
    """Full region, with the ego vehicle centered at (40, 20, 0)."""
    return RoiSpec(0.0, 80.0, 0.0, 40.0, -3.0, 1.0, delta)


def ego_pose_for_roi(roi: RoiSpec) -> Pose:
    """Ego pose placing labels into the given region.

    The front-half region uses the identity (labels arrive in the ego frame);
    the full region offsets the ego frame to the region center (40, 20, 0).
    """
    if roi.x_min == 0.0 and roi.x_max == 80.0 and roi.y_min == 0.0 and roi.y_max == 40.0:
        return Pose(40.0, 20.0, 0.0)
    return Pose()


@dataclass(frozen=True)
class VoxelGrid:
    """Discretization of a RoiSpec into nx*ny*nz voxels.

    Linear index layout is x-major: index = (ix*ny + iy)*nz + iz.
    """

    roi: RoiSpec
    nx: int
    ny: int
    nz: int

    @property
    def m(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)


def build_grid(roi: RoiSpec) -> VoxelGrid:
    """Discretize the region into voxels at its fixed resolution."""
    return VoxelGrid(roi, roi.axis_cells("x"), roi.axis_cells("y"), roi.axis_cells("z"))


def linear_index(grid: VoxelGrid, ix, iy, iz):
    """Linear voxel index from integer cell coordinates (scalar or array)."""
    return (ix * grid.ny + iy) * grid.nz + iz


def index_to_coords(grid: VoxelGrid, index):
    """Inverse of linear_index (scalar or array)."""
    iz = index % grid.nz
    rem = index // grid.nz
    iy = rem % grid.ny
    ix = rem // grid.ny
    return ix, iy, iz


def voxel_center(grid: VoxelGrid, index: int) -> np.ndarray:
    """Geometric center of a voxel given its linear index."""
    if not 0 <= index < grid.m:
        raise IndexError(f"voxel index {index} out of range [0, {grid.m})")
    ix, iy, iz = index_to_coords(grid, int(index))
    return np.array(
        [
            grid.roi.x_min + (ix + 0.5) * grid.roi.delta,
            grid.roi.y_min + (iy + 0.5) * grid.roi.delta,
            grid.roi.z_min + (iz + 0.5) * grid.roi.delta,
        ]
    )


def voxel_centers(grid: VoxelGrid, indices: np.ndarray) -> np.ndarray:
    """Centers for an array of linear indices, shape (n, 3)."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= grid.m):
        raise IndexError("voxel index out of range")
    ix, iy, iz = index_to_coords(grid, indices)
    d = grid.roi.delta
    return np.stack(
        [
            grid.roi.x_min + (ix + 0.5) * d,
            grid.roi.y_min + (iy + 0.5) * d,
            grid.roi.z_min + (iz + 0.5) * d,
        ],
        axis=-1,
    )


class ClassLabel(str, Enum):
    """Object classes tracked by per-class occupancy grids."""

    CAR = "Car"
    VAN_CYCLIST = "VanCyclist"
    PEDESTRIAN = "Pedestrian"
    OTHER = "Other"


@dataclass(frozen=True)
class OrientedBox:
    """A 3D bounding box with yaw-only rotation.

    center is (x, y, z) in meters, size is (length, width, height) in meters;
    length runs along the box's local x axis before yaw is applied.
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float
    class_label: ClassLabel

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "size", tuple(float(v) for v in self.size))
        object.__setattr__(self, "class_label", ClassLabel(self.class_label))
        if len(self.center) != 3 or len(self.size) != 3:
            raise ConfigurationError("center and size must have three components")
        if any(s <= 0 for s in self.size):
            raise ConfigurationError(f"box size components must be positive, got {self.size}")
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))


def point_in_box(point, box: OrientedBox) -> bool:
    """True iff the point lies inside the box; boundary points count as inside."""
    px, py, pz = point
    cx, cy, cz = box.center
    dx, dy, dz = px - cx, py - cy, pz - cz
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # rotate the offset by -yaw into the box frame
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    length, width, height = box.size
    return abs(lx) <= length / 2 and abs(ly) <= width / 2 and abs(dz) <= height / 2


def rasterize_box(box: OrientedBox, grid: VoxelGrid) -> np.ndarray:
    """Linear indices of grid voxels whose centers lie inside the box.

    Returns a sorted int64 array (set semantics). Voxels outside the region
    are silently excluded; a box fully outside yields an empty array.
    """
    roi = grid.roi
    d = roi.delta
    cx, cy, cz = box.center
    length, width, height = box.size
    c, s = math.cos(box.yaw), math.sin(box.yaw)

    # axis-aligned bounding rectangle of the rotated footprint, padded one cell
    rx = (abs(c) * length + abs(s) * width) / 2
    ry = (abs(s) * length + abs(c) * width) / 2
    ix0 = max(0, int(math.floor((cx - rx - roi.x_min) / d - 0.5)) - 1)
    ix1 = min(grid.nx - 1, int(math.ceil((cx + rx - roi.x_min) / d - 0.5)) + 1)
    iy0 = max(0, int(math.floor((cy - ry - roi.y_min) / d - 0.5)) - 1)
    iy1 = min(grid.ny - 1, int(math.ceil((cy + ry - roi.y_min) / d - 0.5)) + 1)
    iz0 = max(0, int(math.floor((cz - height / 2 - roi.z_min) / d - 0.5)) - 1)
    iz1 = min(grid.nz - 1, int(math.ceil((cz + height / 2 - roi.z_min) / d - 0.5)) + 1)
    if ix0 > ix1 or iy0 > iy1 or iz0 > iz1:
        return np.empty(0, dtype=np.int64)

    ix = np.arange(ix0, ix1 + 1)
    iy = np.arange(iy0, iy1 + 1)
    iz = np.arange(iz0, iz1 + 1)
    # center coordinates, same formula as voxel_center so membership agrees bitwise
    xs = roi.x_min + (ix + 0.5) * d
    ys = roi.y_min + (iy + 0.5) * d
    zs = roi.z_min + (iz + 0.5) * d

    dx = (xs - cx)[:, None]
    dy = (ys - cy)[None, :]
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    in_xy = (np.abs(lx) <= length / 2) & (np.abs(ly) <= width / 2)
    in_z = np.abs(zs - cz) <= height / 2

    inside = in_xy[:, :, None] & in_z[None, None, :]
    if not inside.any():
        return np.empty(0, dtype=np.int64)
    flat = (ix[:, None, None] * grid.ny + iy[None, :, None]) * grid.nz + iz[None, None, :]
    return flat[inside].astype(np.int64)


def transform_frame(box: OrientedBox, pose: Pose) -> OrientedBox:
    """Re-express a box in a target frame given the source frame's pose in it.

    Only yaw-only poses are supported: a tilted frame cannot be represented
    by yaw-only boxes.
    """
    if pose.roll != 0.0 or pose.pitch != 0.0:
        raise UnsupportedTransformError(
            f"frame transforms require roll = pitch = 0, got roll={pose.roll}, pitch={pose.pitch}"
        )
    bx, by, bz = box.center
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return OrientedBox(
        center=(pose.x + c * bx - s * by, pose.y + s * bx + c * by, pose.z + bz),
        size=box.size,
        yaw=box.yaw + pose.yaw,
        class_label=box.class_label,
    )


@dataclass(frozen=True)
class LabelFrame:
    """All boxes labeled in one frame, expressed in the ego frame."""

    frame_id: str
    boxes: tuple[OrientedBox, ...]

    def __post_init__(self):
        if not self.frame_id:
            raise ConfigurationError("frame_id must be nonempty")
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class Dataset:
    """An ordered sequence of label frames with unique frame ids."""

    frames: tuple[LabelFrame, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        ids = [f.frame_id for f in self.frames]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("dataset frame_ids must be unique")

    @property
    def frame_count(self) -> int:
        return len(self.frames)
