"""Built-in placement catalog and the placement text-file format.

Catalog coordinates follow the published rig tables and are authored in the
left-handed source convention (x forward, y right, z up); they are converted
to the internal right-handed frame when a config is built.

File grammar (one directive per line, '#' comments and blank lines ignored):

    name: <string>
    handedness: left | right
    beams: <int>
    fov_deg: <min> <max>
    azimuth_steps: <int>
    max_range: <meters>            # optional; omit for unbounded
    ego: <x> <y> <z> <roll> <pitch> <yaw>   # optional; internal frame
    sensor: <x> <y> <z> <roll> <pitch> [<yaw>]   # one line per LiDAR

Sensor lines are interpreted in the declared handedness; ego is always in
the internal right-handed frame.
"""

from __future__ import annotations

import math

from .errors import ConfigurationError, ParseError
from .geometry import Pose
from .lidar import (
    Handedness,
    LidarSpec,
    MountedLidar,
    PlacementConfig,
    pose_from_left_handed,
    pose_to_left_handed,
)

#: (x, y, z, roll, pitch) per sensor, left-handed ego frame, meters/radians.
_CATALOG: dict[str, tuple[tuple[float, float, float, float, float], ...]] = {
    "line": (
        (0.0, -0.6, 2.2, 0.0, 0.0),
        (0.0, -0.4, 2.2, 0.0, 0.0),
        (0.0, 0.4, 2.2, 0.0, 0.0),
        (0.0, 0.6, 2.2, 0.0, 0.0),
    ),
    "center": (
        (0.0, 0.0, 2.4, 0.0, 0.0),
        (0.0, 0.0, 2.6, 0.0, 0.0),
        (0.0, 0.0, 2.8, 0.0, 0.0),
        (0.0, 0.0, 3.0, 0.0, 0.0),
    ),
    "trapezoid": (
        (-0.4, 0.2, 2.2, 0.0, 0.0),
        (-0.4, -0.2, 2.2, 0.0, 0.0),
        (0.2, 0.5, 2.2, 0.0, 0.0),
        (0.2, -0.5, 2.2, 0.0, 0.0),
    ),
    "square": (
        (-0.5, 0.5, 2.2, 0.0, 0.0),
        (-0.5, -0.5, 2.2, 0.0, 0.0),
        (0.5, 0.5, 2.2, 0.0, 0.0),
        (0.5, -0.5, 2.2, 0.0, 0.0),
    ),
    "line-roll": (
        (0.0, -0.6, 2.2, -0.28, 0.0),
        (0.0, -0.4, 2.2, 0.0, 0.0),
        (0.0, 0.4, 2.2, 0.0, 0.0),
        (0.0, 0.6, 2.2, 0.28, 0.0),
    ),
    "pyramid": (
        (-0.2, -0.6, 2.2, 0.0, 0.0),
        (0.4, 0.0, 2.4, 0.0, 0.0),
        (-0.2, 0.0, 2.6, 0.0, 0.0),
        (-0.2, 0.6, 2.2, 0.0, 0.0),
    ),
    "pyramid-roll": (
        (-0.2, -0.6, 2.2, -0.28, 0.0),
        (0.4, 0.0, 2.4, 0.0, 0.0),
        (-0.2, 0.0, 2.6, 0.0, 0.0),
        (-0.2, 0.6, 2.2, 0.28, 0.0),
    ),
    "pyramid-pitch": (
        (-0.2, -0.6, 2.2, 0.0, 0.0),
        (0.4, 0.0, 2.4, 0.0, -0.09),
        (-0.2, 0.0, 2.6, 0.0, 0.0),
        (-0.2, 0.6, 2.2, 0.0, 0.0),
    ),
}

BUILTIN_NAMES = tuple(_CATALOG)


def builtin(name: str, lidar: LidarSpec | None = None) -> PlacementConfig:
    """A catalog placement by name; identical sensors on all four mounts."""
    key = name.strip().lower().replace("_", "-")
    if key not in _CATALOG:
        raise ConfigurationError(
            f"unknown placement {name!r}; valid names: {', '.join(BUILTIN_NAMES)}"
        )
    spec = lidar if lidar is not None else LidarSpec()
    sensors = tuple(
        MountedLidar(spec, pose_from_left_handed(x, y, z, roll, pitch))
        for (x, y, z, roll, pitch) in _CATALOG[key]
    )
    return PlacementConfig(
        name=key,
        sensors=sensors,
        ego_pose_in_roi=Pose(),
        source_handedness=Handedness.LEFT,
    )


def is_builtin(name: str) -> bool:
    return name.strip().lower().replace("_", "-") in _CATALOG


def _parse_floats(value: str, count: int, path, lineno, what: str) -> list[float]:
    parts = value.split()
    if len(parts) != count:
        raise ParseError(f"{what} needs {count} numbers, got {len(parts)}", path, lineno)
    out = []
    for part in parts:
        try:
            out.append(float(part))
        except ValueError:
            raise ParseError(f"malformed number {part!r} in {what}", path, lineno) from None
    if not all(math.isfinite(v) for v in out):
        raise ParseError(f"non-finite number in {what}", path, lineno)
    return out


def parse_placement(path) -> PlacementConfig:
    """Read and fully validate a placement file."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError(f"cannot read placement file: {exc}", path) from exc

    fields: dict[str, tuple[str, int]] = {}
    sensor_lines: list[tuple[str, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value', got {line!r}", path, lineno)
        key, value = (part.strip() for part in line.split(":", 1))
        if key == "sensor":
            sensor_lines.append((value, lineno))
        elif key in ("name", "handedness", "beams", "fov_deg", "azimuth_steps", "max_range", "ego"):
            if key in fields:
                raise ParseError(f"duplicate field {key!r}", path, lineno)
            fields[key] = (value, lineno)
        else:
            raise ParseError(f"unknown field {key!r}", path, lineno)

    for required in ("name", "handedness", "beams", "fov_deg", "azimuth_steps"):
        if required not in fields:
            raise ParseError(f"missing required field {required!r}", path)
    if not sensor_lines:
        raise ParseError("placement file declares no sensors", path)

    name = fields["name"][0]
    if not name:
        raise ParseError("name must be nonempty", path, fields["name"][1])

    hand_value, hand_line = fields["handedness"]
    try:
        handedness = Handedness(hand_value.lower())
    except ValueError:
        raise ParseError(
            f"handedness must be 'left' or 'right', got {hand_value!r}", path, hand_line
        ) from None

    def parse_int(key):
        value, lineno = fields[key]
        try:
            return int(value)
        except ValueError:
            raise ParseError(f"malformed integer {value!r} for {key}", path, lineno) from None

    beams = parse_int("beams")
    azimuth_steps = parse_int("azimuth_steps")
    fov = _parse_floats(fields["fov_deg"][0], 2, path, fields["fov_deg"][1], "fov_deg")
    max_range = None
    if "max_range" in fields:
        max_range = _parse_floats(fields["max_range"][0], 1, path, fields["max_range"][1], "max_range")[0]
    try:
        spec = LidarSpec(beams, fov[0], fov[1], azimuth_steps, max_range)
    except ConfigurationError as exc:
        raise ParseError(str(exc), path) from exc

    ego = Pose()
    if "ego" in fields:
        value, lineno = fields["ego"]
        ex, ey, ez, er, ep, eyaw = _parse_floats(value, 6, path, lineno, "ego")
        ego = Pose(ex, ey, ez, er, ep, eyaw)

    sensors = []
    for value, lineno in sensor_lines:
        parts = value.split()
        if len(parts) not in (5, 6):
            raise ParseError(
                f"sensor needs 'x y z roll pitch [yaw]', got {len(parts)} values", path, lineno
            )
        nums = _parse_floats(value, len(parts), path, lineno, "sensor")
        if len(nums) == 5:
            nums.append(0.0)
        x, y, z, roll, pitch, yaw = nums
        if handedness is Handedness.LEFT:
            mount = pose_from_left_handed(x, y, z, roll, pitch, yaw)
        else:
            mount = Pose(x, y, z, roll, pitch, yaw)
        try:
            PlacementConfig("probe", (MountedLidar(spec, mount),))
        except ConfigurationError as exc:
            raise ParseError(str(exc), path, lineno) from exc
        sensors.append(MountedLidar(spec, mount))

    return PlacementConfig(name, tuple(sensors), ego, handedness)


def write_placement(config: PlacementConfig, path) -> None:
    """Serialize a config; sensor lines are written in its source handedness.

    parse_placement(write_placement(c)) reproduces c structurally, and the
    output bytes are a pure function of the config.
    """
    spec = config.sensors[0].spec
    for sensor in config.sensors[1:]:
        if sensor.spec != spec:
            raise ConfigurationError(
                "placement files hold one shared lidar spec; sensors disagree"
            )
    lines = [
        f"name: {config.name}",
        f"handedness: {config.source_handedness.value}",
        f"beams: {spec.beam_count}",
        f"fov_deg: {spec.fov_min_deg!r} {spec.fov_max_deg!r}",
        f"azimuth_steps: {spec.azimuth_steps}",
    ]
    if spec.max_range is not None:
        lines.append(f"max_range: {spec.max_range!r}")
    ego = config.ego_pose_in_roi
    if not ego.is_identity:
        lines.append(
            f"ego: {ego.x!r} {ego.y!r} {ego.z!r} {ego.roll!r} {ego.pitch!r} {ego.yaw!r}"
        )
    for sensor in config.sensors:
        if config.source_handedness is Handedness.LEFT:
            x, y, z, roll, pitch, yaw = pose_to_left_handed(sensor.mount)
        else:
            m = sensor.mount
            x, y, z, roll, pitch, yaw = m.x, m.y, m.z, m.roll, m.pitch, m.yaw
        line = f"sensor: {x!r} {y!r} {z!r} {roll!r} {pitch!r}"
        if yaw != 0.0:
            line += f" {yaw!r}"
        lines.append(line)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
