"""Deterministic synthetic bounding-box datasets and label-file I/O.

The generator is a stand-in for a simulator pipeline at desk scale: objects
are spawned per frame from a counter-based random stream (keyed by seed,
frame index, and object index), concentrated in longitudinal lane bands and
resting on a ground plane. Frames are mutually independent.

Native label format: one text file per frame under <dir>/labels/NNNNNN.txt,
each line "class cx cy cz length width height yaw".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParseError
from .geometry import ClassLabel, Dataset, LabelFrame, OrientedBox, Pose, RoiSpec, transform_frame

#: Expected objects per frame for the named densities (scaled-down town counts).
DENSITY_OBJECTS_PER_FRAME = {"sparse": 4.0, "medium": 8.0, "dense": 12.0}

#: (length, width, height) means per class; VanCyclist mixes two modes.
CAR_SIZE = (4.5, 1.9, 1.6)
CYCLIST_SIZE = (1.8, 0.6, 1.7)
BOX_TRUCK_SIZE = (5.2, 2.4, 2.6)
PEDESTRIAN_SIZE = (0.5, 0.5, 1.75)

#: Fraction of the abnormal-size class drawn at box-truck scale.
BOX_TRUCK_FRACTION = 0.1


@dataclass(frozen=True)
class ScenarioParams:
    """Knobs of the synthetic scene generator.

    density may be one of "sparse"/"medium"/"dense" or an explicit expected
    objects-per-frame count. Lane bands sit at the given lateral offsets;
    a lane_fraction share of objects snaps to a band (with lateral jitter),
    the rest scatter uniformly. Boxes rest on the ground plane: center z is
    ground_z + height/2. Yaw follows the lane direction plus jitter.
    """

    frame_count: int
    roi: RoiSpec
    density: str | float = "medium"
    class_mix: tuple[tuple[ClassLabel, float], ...] = (
        (ClassLabel.CAR, 0.75),
        (ClassLabel.VAN_CYCLIST, 0.25),
    )
    class_sizes: tuple[tuple[ClassLabel, tuple[float, float, float]], ...] = ()
    size_spread: float = 0.1
    lane_offsets: tuple[float, ...] = (-6.0, -2.0, 2.0, 6.0)
    lane_fraction: float = 0.8
    lane_sigma: float = 0.4
    yaw_jitter: float = 0.05
    ground_z: float = -1.0
    edge_margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.frame_count < 1:
            raise ConfigurationError(f"frame_count must be >= 1, got {self.frame_count}")
        if isinstance(self.density, str):
            if self.density.lower() not in DENSITY_OBJECTS_PER_FRAME:
                raise ConfigurationError(
                    f"unknown density {self.density!r}; use one of "
                    f"{', '.join(DENSITY_OBJECTS_PER_FRAME)} or a number"
                )
        elif self.density < 0:
            raise ConfigurationError("density must be >= 0 objects per frame")
        mix = tuple((ClassLabel(label), float(frac)) for label, frac in self.class_mix)
        object.__setattr__(self, "class_mix", mix)
        if any(frac < 0 for _, frac in mix) or abs(sum(f for _, f in mix) - 1.0) > 1e-9:
            raise ConfigurationError("class_mix fractions must be nonnegative and sum to 1")
        sizes = tuple(
            (ClassLabel(label), tuple(float(v) for v in size)) for label, size in self.class_sizes
        )
        if any(v <= 0 for _, size in sizes for v in size):
            raise ConfigurationError("class_sizes entries must be positive")
        object.__setattr__(self, "class_sizes", sizes)
        if not 0.0 <= self.lane_fraction <= 1.0:
            raise ConfigurationError("lane_fraction must be in [0, 1]")
        if self.size_spread < 0 or self.size_spread >= 1:
            raise ConfigurationError("size_spread must be in [0, 1)")
        horizontal = min(self.roi.x_max - self.roi.x_min, self.roi.y_max - self.roi.y_min)
        if self.edge_margin < 0 or 2 * self.edge_margin >= horizontal:
            raise ConfigurationError(
                f"edge_margin {self.edge_margin} leaves no room in a {horizontal} m region"
            )

    @property
    def objects_per_frame(self) -> float:
        if isinstance(self.density, str):
            return DENSITY_OBJECTS_PER_FRAME[self.density.lower()]
        return float(self.density)


def _object_rng(seed: int, frame: int, obj: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, frame, obj])


def _draw_size(rng, mean, spread):
    return tuple(m * (1.0 + spread * (2.0 * rng.random() - 1.0)) for m in mean)


def _draw_box(rng, params: ScenarioParams) -> OrientedBox:
    roi = params.roi
    labels = [label for label, _ in params.class_mix]
    fracs = [frac for _, frac in params.class_mix]
    label = labels[rng.choice(len(labels), p=fracs)]

    overrides = dict(params.class_sizes)
    if label in overrides:
        size = _draw_size(rng, overrides[label], params.size_spread)
    elif label is ClassLabel.CAR:
        size = _draw_size(rng, CAR_SIZE, params.size_spread)
    elif label is ClassLabel.VAN_CYCLIST:
        mean = BOX_TRUCK_SIZE if rng.random() < BOX_TRUCK_FRACTION else CYCLIST_SIZE
        size = _draw_size(rng, mean, params.size_spread)
    elif label is ClassLabel.PEDESTRIAN:
        size = _draw_size(rng, PEDESTRIAN_SIZE, params.size_spread)
    else:
        size = _draw_size(rng, CAR_SIZE, params.size_spread)

    margin = params.edge_margin
    x = rng.uniform(roi.x_min + margin, roi.x_max - margin)
    if params.lane_offsets and rng.random() < params.lane_fraction:
        lane = params.lane_offsets[rng.choice(len(params.lane_offsets))]
        y = lane + params.lane_sigma * rng.standard_normal()
        base_yaw = 0.0 if lane <= 0 else math.pi
    else:
        y = rng.uniform(roi.y_min + margin, roi.y_max - margin)
        base_yaw = 0.0 if rng.random() < 0.5 else math.pi
    y = min(max(y, roi.y_min + margin), roi.y_max - margin)
    z = params.ground_z + size[2] / 2.0
    if not (roi.z_min < z < roi.z_max):
        z = min(max(z, roi.z_min + 1e-6), roi.z_max - 1e-6)
    yaw = base_yaw + params.yaw_jitter * rng.standard_normal()
    return OrientedBox(center=(x, y, z), size=size, yaw=yaw, class_label=label)


def generate(params: ScenarioParams) -> Dataset:
    """Generate a dataset; a pure function of params (seed included)."""
    frames = []
    rate = params.objects_per_frame
    for t in range(params.frame_count):
        frame_rng = _object_rng(params.seed, t, 0xFFFFFFFF)
        n_objects = int(frame_rng.poisson(rate)) if rate > 0 else 0
        boxes = tuple(
            _draw_box(_object_rng(params.seed, t, j), params) for j in range(n_objects)
        )
        frames.append(LabelFrame(frame_id=f"{t:06d}", boxes=boxes))
    return Dataset(tuple(frames))


def export_dataset(dataset: Dataset, directory) -> None:
    """Write one native label file per frame under <directory>/labels/."""
    labels_dir = Path(directory) / "labels"
    labels_dir.mkdir(parents=True, exist_ok=True)
    for frame in dataset.frames:
        lines = []
        for box in frame.boxes:
            cx, cy, cz = box.center
            length, width, height = box.size
            lines.append(
                f"{box.class_label.value} {cx!r} {cy!r} {cz!r} "
                f"{length!r} {width!r} {height!r} {box.yaw!r}"
            )
        (labels_dir / f"{frame.frame_id}.txt").write_text(
            "\n".join(lines) + ("\n" if lines else "")
        )


def _label_files(directory) -> list[Path]:
    directory = Path(directory)
    labels_dir = directory / "labels"
    if not labels_dir.is_dir():
        labels_dir = directory
    files = sorted(labels_dir.glob("*.txt"))
    if not files:
        raise ParseError("no label files (*.txt) found", directory)
    return files


def import_dataset(directory) -> Dataset:
    """Read a native-format label directory back into a dataset."""
    frames = []
    for path in _label_files(directory):
        boxes = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 8:
                    raise ParseError(
                        f"expected 'class cx cy cz length width height yaw', got {len(parts)} fields",
                        path,
                        lineno,
                    )
                try:
                    label = ClassLabel(parts[0])
                    nums = [float(v) for v in parts[1:]]
                except ValueError as exc:
                    raise ParseError(str(exc), path, lineno) from exc
                boxes.append(
                    OrientedBox(
                        center=tuple(nums[0:3]),
                        size=tuple(nums[3:6]),
                        yaw=nums[6],
                        class_label=label,
                    )
                )
        frames.append(LabelFrame(frame_id=path.stem, boxes=tuple(boxes)))
    return Dataset(tuple(frames))


#: Default mapping from KITTI type strings; None means skip the line.
DEFAULT_KITTI_CLASS_MAP: dict[str, ClassLabel | None] = {
    "Car": ClassLabel.CAR,
    "Van": ClassLabel.VAN_CYCLIST,
    "Truck": ClassLabel.VAN_CYCLIST,
    "Cyclist": ClassLabel.VAN_CYCLIST,
    "Pedestrian": ClassLabel.PEDESTRIAN,
    "Person_sitting": ClassLabel.PEDESTRIAN,
    "Tram": ClassLabel.OTHER,
    "Misc": None,
    "DontCare": None,
}


def import_kitti_labels(
    directory,
    class_map: dict[str, ClassLabel | None] | None = None,
    unknown: str = "skip",
    frame_pose: Pose | None = None,
) -> Dataset:
    """Read a directory of KITTI-format label files.

    Labels are assumed to be expressed directly in the ego frame (no camera
    calibration transform); KITTI location is the box-bottom center, so the
    box center z is location_z + height/2. frame_pose, when given, re-expresses
    every box through a yaw-only frame transform (hook for true camera-frame
    labels that were already rectified to a ground-parallel frame).
    """
    if class_map is None:
        class_map = DEFAULT_KITTI_CLASS_MAP
    if unknown not in ("skip", "fail"):
        raise ValueError("unknown must be 'skip' or 'fail'")
    frames = []
    for path in _label_files(directory):
        boxes = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) < 15:
                    raise ParseError(
                        f"KITTI label needs >= 15 fields, got {len(parts)}", path, lineno
                    )
                kind = parts[0]
                if kind not in class_map:
                    if unknown == "fail":
                        raise ParseError(f"unknown object type {kind!r}", path, lineno)
                    continue
                label = class_map[kind]
                if label is None:
                    continue
                try:
                    h, w, length = (float(v) for v in parts[8:11])
                    x, y, z = (float(v) for v in parts[11:14])
                    rotation_y = float(parts[14])
                except ValueError as exc:
                    raise ParseError(f"malformed number ({exc})", path, lineno) from exc
                box = OrientedBox(
                    center=(x, y, z + h / 2.0),
                    size=(length, w, h),
                    yaw=rotation_y,
                    class_label=label,
                )
                if frame_pose is not None:
                    box = transform_frame(box, frame_pose)
                boxes.append(box)
        frames.append(LabelFrame(frame_id=path.stem, boxes=tuple(boxes)))
    return Dataset(tuple(frames))
