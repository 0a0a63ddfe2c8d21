"""Per-class probabilistic occupancy grids estimated from bounding-box datasets.

A voxel's occupancy probability is the fraction of frames in which its center
lies inside at least one box of the class; overlapping boxes within one frame
count once. Counts are kept as exact integers together with the frame count,
so the estimate is an auditable rational k/T.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .geometry import (
    ClassLabel,
    Dataset,
    Pose,
    RoiSpec,
    VoxelGrid,
    build_grid,
    rasterize_box,
    transform_frame,
)

_MAGIC = b"POG1"
_ENTRY_DTYPE = np.dtype([("index", "<u8"), ("count", "<u4")])


@dataclass(frozen=True)
class Pog:
    """Sparse per-class occupancy counts over a voxel grid.

    indices holds the linear voxel indices with nonzero count, sorted; counts
    holds how many of the frame_count frames occupied each. Voxels absent
    from indices have probability zero.
    """

    grid: VoxelGrid
    class_label: ClassLabel
    frame_count: int
    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if indices.shape != counts.shape or indices.ndim != 1:
            raise ValueError("indices and counts must be 1-d arrays of equal length")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= self.grid.m or np.any(np.diff(indices) <= 0):
                raise ValueError("indices must be sorted, unique, and within the grid")
            if counts.min() < 1 or counts.max() > self.frame_count:
                raise ValueError("counts must lie in [1, frame_count]")
        indices.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_label", ClassLabel(self.class_label))

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.frame_count

    @property
    def entry_count(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class CountBlock:
    """Occupancy counts for a contiguous range of dataset frames."""

    grid: VoxelGrid
    class_label: ClassLabel
    frame_start: int
    frame_stop: int
    indices: np.ndarray
    counts: np.ndarray


def count_block(
    dataset: Dataset,
    grid: VoxelGrid,
    class_label: ClassLabel,
    frame_start: int,
    frame_stop: int,
    ego_pose: Pose | None = None,
) -> CountBlock:
    """Count per-voxel occupancy over frames [frame_start, frame_stop)."""
    if not 0 <= frame_start < frame_stop <= dataset.frame_count:
        raise ValueError(
            f"frame range [{frame_start}, {frame_stop}) invalid for {dataset.frame_count} frames"
        )
    class_label = ClassLabel(class_label)
    acc = np.zeros(grid.m, dtype=np.int32)  # frame counts; int32 keeps big grids cheap
    for frame in dataset.frames[frame_start:frame_stop]:
        per_frame = []
        for box in frame.boxes:
            if box.class_label != class_label:
                continue
            if ego_pose is not None and not ego_pose.is_identity:
                box = transform_frame(box, ego_pose)
            voxels = rasterize_box(box, grid)
            if voxels.size:
                per_frame.append(voxels)
        if per_frame:
            occupied = np.unique(np.concatenate(per_frame))
            acc[occupied] += 1
    indices = np.flatnonzero(acc)
    return CountBlock(grid, class_label, frame_start, frame_stop, indices, acc[indices])


def merge_counts(partials: list[CountBlock]) -> Pog:
    """Combine disjoint contiguous frame-range blocks into one Pog.

    The blocks must tile [0, T) with no overlap or gap; merged counts equal a
    single-pass estimate exactly (integer addition is order-free).
    """
    if not partials:
        raise ValueError("no count blocks to merge")
    grid = partials[0].grid
    label = partials[0].class_label
    for block in partials:
        if block.grid != grid or block.class_label != label:
            raise ValueError("count blocks disagree on grid or class")
    blocks = sorted(partials, key=lambda b: b.frame_start)
    cursor = 0
    for block in blocks:
        if block.frame_start < cursor:
            raise ValueError(
                f"overlapping frame ranges at [{block.frame_start}, {block.frame_stop})"
            )
        if block.frame_start > cursor:
            raise ValueError(f"gap in frame ranges before frame {block.frame_start}")
        cursor = block.frame_stop
    acc = np.zeros(grid.m, dtype=np.int64)
    for block in blocks:
        acc[block.indices] += block.counts.astype(np.int64)
    indices = np.flatnonzero(acc)
    return Pog(grid, label, cursor, indices, acc[indices])


def estimate_pog(
    dataset: Dataset,
    grid: VoxelGrid,
    class_label: ClassLabel,
    ego_pose: Pose | None = None,
    threads: int = 1,
) -> Pog:
    """Estimate the occupancy grid of one class over all dataset frames."""
    t = dataset.frame_count
    if t < 1:
        raise ValueError("dataset must contain at least one frame")
    if threads <= 1 or t == 1:
        block = count_block(dataset, grid, class_label, 0, t, ego_pose)
        return merge_counts([block])
    n_blocks = min(threads * 2, t)
    edges = np.linspace(0, t, n_blocks + 1, dtype=int)
    ranges = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if a < b]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        blocks = list(
            pool.map(lambda r: count_block(dataset, grid, class_label, r[0], r[1], ego_pose), ranges)
        )
    return merge_counts(blocks)


def save_pog(pog: Pog, path) -> None:
    """Write the binary POG file (see module docs for the byte layout)."""
    label_bytes = pog.class_label.value.encode("utf-8")
    roi = pog.grid.roi
    header = _MAGIC + struct.pack(
        "<7d", roi.x_min, roi.x_max, roi.y_min, roi.y_max, roi.z_min, roi.z_max, roi.delta
    )
    header += struct.pack("<I", len(label_bytes)) + label_bytes
    header += struct.pack("<QQ", pog.frame_count, pog.entry_count)
    entries = np.empty(pog.entry_count, dtype=_ENTRY_DTYPE)
    entries["index"] = pog.indices
    entries["count"] = pog.counts
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(entries.tobytes())


def load_pog(path, expect_grid: VoxelGrid | None = None) -> Pog:
    """Read a binary POG file; optionally enforce that it matches a grid."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
    off = 4
    try:
        roi_fields = struct.unpack_from("<7d", blob, off)
        off += 56
        (label_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        if len(blob) < off + label_len:
            raise struct.error("truncated label")
        label = blob[off : off + label_len].decode("utf-8")
        off += label_len
        frame_count, entry_count = struct.unpack_from("<QQ", blob, off)
        off += 16
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header ({exc})") from exc
    expected = off + entry_count * _ENTRY_DTYPE.itemsize
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    try:
        label_value = ClassLabel(label)
    except ValueError as exc:
        raise FormatError(f"{path}: unknown class label {label!r}") from exc
    try:
        roi = RoiSpec(*roi_fields)
    except ValueError as exc:
        raise FormatError(f"{path}: invalid region spec ({exc})") from exc
    grid = build_grid(roi)
    if expect_grid is not None and grid != expect_grid:
        raise FormatError(
            f"{path}: grid mismatch: file has {grid.roi}, expected {expect_grid.roi}"
        )
    entries = np.frombuffer(blob, dtype=_ENTRY_DTYPE, count=entry_count, offset=off)
    try:
        return Pog(
            grid,
            label_value,
            int(frame_count),
            entries["index"].astype(np.int64),
            entries["count"].astype(np.int64),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: invalid payload ({exc})") from exc


def export_pog_text(pog: Pog, path) -> None:
    """Plain-text dump (one "index count" pair per line) for debugging."""
    roi = pog.grid.roi
    with open(path, "w") as fh:
        fh.write("# pog-text v1\n")
        fh.write(
            f"# roi: {roi.x_min!r} {roi.x_max!r} {roi.y_min!r} {roi.y_max!r} "
            f"{roi.z_min!r} {roi.z_max!r} delta: {roi.delta!r}\n"
        )
        fh.write(f"# class: {pog.class_label.value} frames: {pog.frame_count} entries: {pog.entry_count}\n")
        fh.write("index count\n")
        for idx, cnt in zip(pog.indices.tolist(), pog.counts.tolist()):
            fh.write(f"{idx} {cnt}\n")
