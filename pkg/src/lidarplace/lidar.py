"""Beam-fan generation for mounted spinning LiDARs and voxel ray traversal.

Coverage of a placement is the union, over every sensor/beam/azimuth ray, of
the voxels the ray passes through. Rays are clipped to the region of interest
and traced with integer 3D Bresenham stepping; occlusion is deliberately not
modeled, so rays pass through objects until they leave the region (or reach
the sensor's max range).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .geometry import Pose, VoxelGrid

#: Azimuth samples per rotation matching a 90k-points/frame, 16-beam sensor.
DEFAULT_AZIMUTH_STEPS = 5625

#: Coarse azimuth sampling for fast tests and search inner loops.
FAST_AZIMUTH_STEPS = 720

#: Parameter-space nudge applied inside the clipped segment before voxel
#: index conversion, in units of delta, to avoid boundary ambiguity.
BOUNDARY_NUDGE = 1e-9


class Handedness(Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class LidarSpec:
    """Beam layout of one spinning LiDAR.

    Beam pitch angles are equally spaced and include both vertical-FOV
    endpoints (a single beam sits at the midpoint). Azimuths are uniform
    over [0, 2pi) with azimuth_steps samples. max_range of None means the
    ray is bounded only by the region of interest.
    """

    beam_count: int = 16
    fov_min_deg: float = -25.0
    fov_max_deg: float = 5.0
    azimuth_steps: int = DEFAULT_AZIMUTH_STEPS
    max_range: float | None = None

    def __post_init__(self):
        if self.beam_count < 1:
            raise ConfigurationError(f"beam_count must be >= 1, got {self.beam_count}")
        if self.fov_min_deg > self.fov_max_deg:
            raise ConfigurationError(
                f"fov_min_deg ({self.fov_min_deg}) must not exceed fov_max_deg ({self.fov_max_deg})"
            )
        if self.azimuth_steps < 1:
            raise ConfigurationError(f"azimuth_steps must be >= 1, got {self.azimuth_steps}")
        if self.max_range is not None and not self.max_range > 0:
            raise ConfigurationError(f"max_range must be positive when bounded, got {self.max_range}")

    def beam_pitches_rad(self) -> np.ndarray:
        if self.beam_count == 1:
            degs = np.array([(self.fov_min_deg + self.fov_max_deg) / 2.0])
        else:
            degs = np.linspace(self.fov_min_deg, self.fov_max_deg, self.beam_count)
        return np.deg2rad(degs)


@dataclass(frozen=True)
class MountedLidar:
    """One sensor and its mount pose relative to the ego frame."""

    spec: LidarSpec
    mount: Pose


@dataclass(frozen=True)
class PlacementConfig:
    """A named multi-LiDAR rig.

    Mount poses are stored in the internal right-handed convention
    (x forward, y left, z up); source_handedness records the convention the
    rig was authored in, so files round-trip through the original values.
    """

    name: str
    sensors: tuple[MountedLidar, ...]
    ego_pose_in_roi: Pose = Pose()
    source_handedness: Handedness = Handedness.RIGHT

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if not self.sensors:
            raise ConfigurationError("placement must have at least one sensor")
        for i, sensor in enumerate(self.sensors):
            if not 0.0 <= sensor.mount.z <= 5.0:
                raise ConfigurationError(
                    f"sensor {i} mount z = {sensor.mount.z} outside the [0, 5] m roof bound"
                )


def pose_from_left_handed(x, y, z, roll=0.0, pitch=0.0, yaw=0.0) -> Pose:
    """Convert a left-handed-source pose to the internal right-handed frame.

    The source frame has y to the right; mirroring it flips y and the
    chirality of rotations about the x and z axes, so y, roll, and yaw are
    negated while pitch is kept.
    """
    return Pose(x, -y, z, -roll, pitch, -yaw)


def pose_to_left_handed(pose: Pose) -> tuple[float, float, float, float, float, float]:
    """Inverse of pose_from_left_handed (the conversion is an involution)."""
    return (pose.x, -pose.y, pose.z, -pose.roll, pose.pitch, -pose.yaw)


def with_azimuth_steps(config: PlacementConfig, azimuth_steps: int) -> PlacementConfig:
    """Copy of the config with every sensor resampled at the given azimuth count."""
    sensors = tuple(
        MountedLidar(replace(s.spec, azimuth_steps=azimuth_steps), s.mount) for s in config.sensors
    )
    return replace(config, sensors=sensors)


def mirror_config(config: PlacementConfig) -> PlacementConfig:
    """Mirror a rig across the x-z plane: negate every mount y, yaw, and roll."""
    sensors = tuple(
        MountedLidar(
            s.spec,
            Pose(s.mount.x, -s.mount.y, s.mount.z, -s.mount.roll, s.mount.pitch, -s.mount.yaw),
        )
        for s in config.sensors
    )
    return replace(config, name=config.name + "-mirrored", sensors=sensors)


def azimuth_table(steps: int) -> np.ndarray:
    """(steps, 2) array of (cos a, sin a) for a = 2*pi*k/steps, k = 0..steps-1.

    Values are exact at the four axis directions, and the table is closed
    under y-mirroring bitwise: the entry for -a carries exactly (cos a, -sin a).
    Doubling steps reproduces the original entries exactly at even k, which
    makes azimuth-refinement coverage monotone by construction.
    """
    table = np.empty((steps, 2), dtype=np.float64)
    half = steps // 2
    k = np.arange(half + 1)
    # (2*pi*k)/steps rather than 2*pi*(k/steps): scaling k and steps by two
    # then leaves the quotient bit-identical.
    ang = (2.0 * np.pi) * k / steps
    table[: half + 1, 0] = np.cos(ang)
    table[: half + 1, 1] = np.sin(ang)
    j = np.arange(half + 1, steps)
    table[j, 0] = table[steps - j, 0]
    table[j, 1] = -table[steps - j, 1]
    table[0] = (1.0, 0.0)
    if steps % 2 == 0:
        table[half] = (-1.0, 0.0)
    if steps % 4 == 0:
        table[steps // 4] = (0.0, 1.0)
        table[3 * (steps // 4)] = (0.0, -1.0)
    return table


def beam_rays(spec: LidarSpec, mount: Pose, ego: Pose = Pose()) -> tuple[np.ndarray, np.ndarray]:
    """Rays of one mounted sensor in the region frame.

    Returns (origin, directions): all beam_count*azimuth_steps rays share the
    mounted sensor position as origin; directions is a (beam_count*azimuth_steps, 3)
    array of unit vectors, beam-major (all azimuths of the first pitch first).
    """
    r_ego = ego.rotation()
    rot = r_ego @ mount.rotation()
    origin = r_ego @ mount.translation() + ego.translation()

    az = azimuth_table(spec.azimuth_steps)
    pitches = spec.beam_pitches_rad()
    n_az = spec.azimuth_steps
    dirs = np.empty((len(pitches) * n_az, 3), dtype=np.float64)
    for b, p in enumerate(pitches):
        cp, sp = math.cos(p), math.sin(p)
        block = dirs[b * n_az : (b + 1) * n_az]
        block[:, 0] = cp * az[:, 0]
        block[:, 1] = cp * az[:, 1]
        block[:, 2] = sp
    return origin, dirs @ rot.T


@dataclass(frozen=True)
class CoverageMask:
    """Membership bitset over all grid voxels intersected by at least one beam."""

    grid: VoxelGrid
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.grid.m,):
            raise ConfigurationError(
                f"mask length {bits.shape} does not match grid voxel count {self.grid.m}"
            )
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def covered_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __or__(self, other: "CoverageMask") -> "CoverageMask":
        if other.grid != self.grid:
            raise ValueError("cannot union masks over different grids")
        return CoverageMask(self.grid, self.bits | other.bits)

    def issubset(self, other: "CoverageMask") -> bool:
        return bool(np.all(other.bits | ~self.bits))

    def mirror_y(self) -> "CoverageMask":
        """Mask with y cell indices reversed (mirror across the x-z plane)."""
        cube = self.bits.reshape(self.grid.shape)
        return CoverageMask(self.grid, cube[:, ::-1, :].reshape(-1).copy())


def _clip_segments(grid: VoxelGrid, origin: np.ndarray, dirs: np.ndarray, max_range):
    """Clip rays from a shared origin to the region box (parametric slabs).

    Returns (t0, t1, keep): per-ray parameter interval and a validity mask.
    """
    lo = grid.roi.mins()
    hi = grid.roi.maxs()
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo - origin) / dirs
        tb = (hi - origin) / dirs
    tmin = np.minimum(ta, tb)
    tmax = np.maximum(ta, tb)
    zero = dirs == 0.0
    if zero.any():
        # a zero component never crosses its slab: inside (half-open) or miss
        inside = (origin >= lo) & (origin < hi)
        inside = np.broadcast_to(inside, dirs.shape)
        tmin[zero] = np.where(inside[zero], -np.inf, np.inf)
        tmax[zero] = np.where(inside[zero], np.inf, -np.inf)
    t0 = np.maximum(tmin.max(axis=1), 0.0)
    t1 = tmax.min(axis=1)
    if max_range is not None:
        t1 = np.minimum(t1, max_range)
    keep = (t1 > t0) & np.isfinite(t0) & np.isfinite(t1)
    return t0, t1, keep


def _endpoint_cells(grid: VoxelGrid, points: np.ndarray) -> np.ndarray:
    cells = np.floor((points - grid.roi.mins()) / grid.roi.delta).astype(np.int64)
    np.clip(cells, 0, np.array(grid.shape, dtype=np.int64) - 1, out=cells)
    return cells


def _bresenham_cells(entry: np.ndarray, exit_: np.ndarray):
    """Integer 3D Bresenham between per-ray entry and exit cells, closed form.

    For driving-axis magnitude N, the classic error-accumulation walk visits,
    at step k, offset floor((2*k*|d| + N) / (2*N)) along every axis, which
    vectorizes over all rays and steps at once. Returns (cells, ray_of_step,
    lengths); cells are ordered entry-to-exit within each ray.
    """
    d = exit_ - entry
    ad = np.abs(d)
    n = ad.max(axis=1)
    sign = np.sign(d)
    lengths = n + 1
    total = int(lengths.sum())
    ray_of_step = np.repeat(np.arange(len(entry)), lengths)
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    k = np.arange(total, dtype=np.int64) - starts[ray_of_step]
    denom = 2 * np.maximum(n, 1)
    cells = np.empty((total, 3), dtype=np.int64)
    for axis in range(3):
        off = (2 * k * ad[ray_of_step, axis] + n[ray_of_step]) // denom[ray_of_step]
        cells[:, axis] = entry[ray_of_step, axis] + sign[ray_of_step, axis] * off
    return cells, ray_of_step, lengths


def _traverse_batch(grid: VoxelGrid, origin: np.ndarray, dirs: np.ndarray, max_range):
    """Flat voxel indices touched by a batch of rays from one origin."""
    t0, t1, keep = _clip_segments(grid, origin, dirs, max_range)
    if not keep.any():
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    dirs = dirs[keep]
    nudge = BOUNDARY_NUDGE * grid.roi.delta
    p0 = origin + (t0[keep] + nudge)[:, None] * dirs
    p1 = origin + (t1[keep] - nudge)[:, None] * dirs
    cells, ray_of_step, lengths = _bresenham_cells(_endpoint_cells(grid, p0), _endpoint_cells(grid, p1))
    flat = (cells[:, 0] * grid.ny + cells[:, 1]) * grid.nz + cells[:, 2]
    return flat, ray_of_step, lengths


def traverse_ray(grid: VoxelGrid, origin, direction, max_range=None, method: str = "bresenham") -> np.ndarray:
    """Ordered voxel indices a single ray passes through inside the region.

    direction should be a unit vector; max_range is measured along it in
    meters. method "bresenham" is the default integer walk; "grid-walk" is
    the exact parametric traversal kept as a comparison baseline.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if origin.shape != (3,) or direction.shape != (3,):
        raise ValueError("origin and direction must be 3-vectors")
    if not np.any(direction != 0.0):
        raise ValueError("direction must be nonzero")
    if method == "bresenham":
        flat, _, _ = _traverse_batch(grid, origin, direction[None, :], max_range)
        return flat
    if method == "grid-walk":
        return _grid_walk(grid, origin, direction, max_range)
    raise ValueError(f"unknown traversal method {method!r}")


def _grid_walk(grid: VoxelGrid, origin, direction, max_range) -> np.ndarray:
    """Exact parametric voxel walk (6-connected), the comparison baseline."""
    t0, t1, keep = _clip_segments(grid, origin, direction[None, :], max_range)
    if not keep[0]:
        return np.empty(0, dtype=np.int64)
    nudge = BOUNDARY_NUDGE * grid.roi.delta
    t = float(t0[0]) + nudge
    t_end = float(t1[0]) - nudge
    p0 = origin + t * direction
    cell = _endpoint_cells(grid, p0[None, :])[0]
    delta = grid.roi.delta
    mins = grid.roi.mins()
    shape = np.array(grid.shape, dtype=np.int64)

    step = np.where(direction > 0, 1, np.where(direction < 0, -1, 0)).astype(np.int64)
    t_next = np.full(3, np.inf)
    t_delta = np.full(3, np.inf)
    for a in range(3):
        if direction[a] > 0:
            boundary = mins[a] + (cell[a] + 1) * delta
            t_next[a] = (boundary - origin[a]) / direction[a]
            t_delta[a] = delta / direction[a]
        elif direction[a] < 0:
            boundary = mins[a] + cell[a] * delta
            t_next[a] = (boundary - origin[a]) / direction[a]
            t_delta[a] = -delta / direction[a]

    out = [int((cell[0] * grid.ny + cell[1]) * grid.nz + cell[2])]
    while True:
        a = int(np.argmin(t_next))
        if t_next[a] > t_end:
            break
        t_next[a] += t_delta[a]
        cell[a] += step[a]
        if cell[a] < 0 or cell[a] >= shape[a]:
            break
        out.append(int((cell[0] * grid.ny + cell[1]) * grid.nz + cell[2]))
    return np.array(out, dtype=np.int64)


def coverage(
    config: PlacementConfig,
    grid: VoxelGrid,
    azimuth_steps: int | None = None,
    threads: int = 1,
    method: str = "bresenham",
    chunk_size: int = 16384,
) -> CoverageMask:
    """Union of beam-intersected voxels over all sensors of a placement.

    Deterministic for identical inputs regardless of thread count: chunk
    results are merged by bitwise OR, which is order-independent.
    """
    if azimuth_steps is not None:
        config = with_azimuth_steps(config, azimuth_steps)
    bits = np.zeros(grid.m, dtype=bool)
    tasks = []
    for sensor in config.sensors:
        origin, dirs = beam_rays(sensor.spec, sensor.mount, config.ego_pose_in_roi)
        for start in range(0, len(dirs), chunk_size):
            tasks.append((origin, dirs[start : start + chunk_size], sensor.spec.max_range))

    if method != "bresenham":
        for origin, dirs, max_range in tasks:
            for ray in dirs:
                bits[traverse_ray(grid, origin, ray, max_range, method=method)] = True
        return CoverageMask(grid, bits)

    def run(task):
        origin, dirs, max_range = task
        flat, _, _ = _traverse_batch(grid, origin, dirs, max_range)
        return flat

    if threads <= 1:
        for task in tasks:
            bits[run(task)] = True
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for flat in pool.map(run, tasks):
                bits[flat] = True
    return CoverageMask(grid, bits)
