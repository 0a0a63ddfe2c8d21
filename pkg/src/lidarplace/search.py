"""Placement optimization by first-improvement coordinate descent.

Each sweep walks sensors in order and, per sensor, the dimensions x, y, z,
roll, pitch, trying +step before -step (clamped to bounds) and accepting the
first candidate that strictly improves the aggregate surrogate metric. A
sweep with no acceptance halves every step; the search stops when all steps
fall below their minima or a budget runs out. Every evaluated candidate is
recorded in a trace, so runs are auditable and reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import ConfigurationError
from .geometry import Pose, VoxelGrid
from .lidar import MountedLidar, PlacementConfig, coverage
from .metrics import MetricsReport, _entropy_terms, _fsum, report_from_mask
from .pog import Pog

DIMENSIONS = ("x", "y", "z", "roll", "pitch")

#: Roof-box mount bounds: translations in meters, angles in radians.
DEFAULT_BOUNDS = {
    "x": (-1.0, 1.2),
    "y": (-0.8, 0.8),
    "z": (2.0, 3.2),
    "roll": (-0.35, 0.35),
    "pitch": (-0.35, 0.35),
}
DEFAULT_INITIAL_STEP = {"x": 0.4, "y": 0.4, "z": 0.4, "roll": 0.16, "pitch": 0.16}
DEFAULT_MIN_STEP = {"x": 0.05, "y": 0.05, "z": 0.05, "roll": 0.02, "pitch": 0.02}


@dataclass(frozen=True)
class SearchSpace:
    """Per-sensor mount bounds plus the step-halving schedule and budgets.

    bounds is one mapping per sensor, dimension -> (lo, hi). seed is reserved
    for stochastic strategies; the deterministic sweep does not consume it.
    """

    bounds: tuple[dict[str, tuple[float, float]], ...]
    initial_step: dict[str, float]
    min_step: dict[str, float]
    max_iterations: int = 100
    max_evaluations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.bounds:
            raise ConfigurationError("search space needs bounds for at least one sensor")
        for i, per_sensor in enumerate(self.bounds):
            for dim in DIMENSIONS:
                if dim not in per_sensor:
                    raise ConfigurationError(f"sensor {i} bounds missing dimension {dim!r}")
                lo, hi = per_sensor[dim]
                if not lo <= hi:
                    raise ConfigurationError(f"sensor {i} {dim} bounds empty: ({lo}, {hi})")
        for dim in DIMENSIONS:
            step0 = self.initial_step.get(dim)
            step1 = self.min_step.get(dim)
            if step0 is None or step1 is None:
                raise ConfigurationError(f"step schedule missing dimension {dim!r}")
            if not (step0 > 0 and step1 > 0 and step0 >= step1):
                raise ConfigurationError(
                    f"steps for {dim} must satisfy initial >= min > 0, got {step0}, {step1}"
                )

    @classmethod
    def default(cls, n_sensors: int, **overrides) -> "SearchSpace":
        kwargs = {
            "bounds": tuple(dict(DEFAULT_BOUNDS) for _ in range(n_sensors)),
            "initial_step": dict(DEFAULT_INITIAL_STEP),
            "min_step": dict(DEFAULT_MIN_STEP),
        }
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path, n_sensors: int) -> "SearchSpace":
        with open(path) as fh:
            raw = json.load(fh)
        if "per_sensor_bounds" in raw:
            bounds = tuple(
                {dim: tuple(b[dim]) for dim in DIMENSIONS} for b in raw["per_sensor_bounds"]
            )
        else:
            shared = {dim: tuple(raw.get("bounds", DEFAULT_BOUNDS)[dim]) for dim in DIMENSIONS}
            bounds = tuple(dict(shared) for _ in range(n_sensors))
        return cls(
            bounds=bounds,
            initial_step={**DEFAULT_INITIAL_STEP, **raw.get("initial_step", {})},
            min_step={**DEFAULT_MIN_STEP, **raw.get("min_step", {})},
            max_iterations=raw.get("max_iterations", 100),
            max_evaluations=raw.get("max_evaluations", 100_000),
            seed=raw.get("seed", 0),
        )


@dataclass(frozen=True)
class TraceEntry:
    """One objective evaluation: which pose was tried and what it scored."""

    iteration: int
    sensor: int
    dimension: str
    pose: Pose
    s_mig: float
    accepted: bool
    azimuth_steps: int


TRACE_COLUMNS = (
    "iteration",
    "sensor",
    "dimension",
    "x",
    "y",
    "z",
    "roll",
    "pitch",
    "yaw",
    "s_mig",
    "accepted",
    "azimuth_steps",
)


def trace_to_csv(trace: list[TraceEntry]) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for e in trace:
        lines.append(
            ",".join(
                (
                    str(e.iteration),
                    str(e.sensor),
                    e.dimension,
                    repr(e.pose.x),
                    repr(e.pose.y),
                    repr(e.pose.z),
                    repr(e.pose.roll),
                    repr(e.pose.pitch),
                    repr(e.pose.yaw),
                    repr(e.s_mig),
                    str(int(e.accepted)),
                    str(e.azimuth_steps),
                )
            )
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OptimizeResult:
    config: PlacementConfig
    report: MetricsReport
    trace: tuple[TraceEntry, ...]


class _Objective:
    """Aggregate surrogate metric of a placement against fixed pogs."""

    def __init__(self, pogs, grid, azimuth_steps, threads):
        self.grid = grid
        self.azimuth_steps = azimuth_steps
        self.threads = threads
        self._per_pog = [(p.indices, _entropy_terms(p.probabilities)) for p in pogs]
        self.evaluations = 0

    def __call__(self, config: PlacementConfig) -> float:
        self.evaluations += 1
        mask = coverage(config, self.grid, azimuth_steps=self.azimuth_steps, threads=self.threads)
        h_cond = math.fsum(
            _fsum(terms[~mask.bits[indices]]) for indices, terms in self._per_pog
        )
        return -h_cond if h_cond != 0.0 else 0.0


def _check_bounds(config: PlacementConfig, space: SearchSpace) -> None:
    if len(space.bounds) != len(config.sensors):
        raise ConfigurationError(
            f"search space covers {len(space.bounds)} sensors, config has {len(config.sensors)}"
        )
    for i, (sensor, per_sensor) in enumerate(zip(config.sensors, space.bounds)):
        for dim in DIMENSIONS:
            lo, hi = per_sensor[dim]
            value = getattr(sensor.mount, dim)
            if not lo <= value <= hi:
                raise ConfigurationError(
                    f"initial sensor {i} {dim} = {value} outside bounds [{lo}, {hi}]"
                )


def _with_mount_value(config: PlacementConfig, sensor: int, dim: str, value: float) -> PlacementConfig:
    mount = config.sensors[sensor].mount
    new_mount = replace(mount, **{dim: value})
    sensors = list(config.sensors)
    sensors[sensor] = MountedLidar(config.sensors[sensor].spec, new_mount)
    return replace(config, sensors=tuple(sensors))


def optimize(
    initial: PlacementConfig,
    space: SearchSpace,
    pogs: list[Pog],
    grid: VoxelGrid,
    azimuth_steps: int | None = None,
    threads: int = 1,
) -> OptimizeResult:
    """Maximize the aggregate surrogate metric over per-sensor mount poses.

    Deterministic: the sweep order is sensor-major, dimension-minor, +step
    before -step, and only strict improvements are accepted (ties rejected so
    the search terminates). Accepted trace entries strictly increase in
    s_mig; every candidate respects the bounds by clamping.
    """
    _check_bounds(initial, space)
    objective = _Objective(pogs, grid, azimuth_steps, threads)
    az_used = initial.sensors[0].spec.azimuth_steps if azimuth_steps is None else azimuth_steps

    current = initial
    current_value = objective(current)
    trace = [
        TraceEntry(0, -1, "start", current.sensors[0].mount, current_value, True, az_used)
    ]
    steps = {dim: float(space.initial_step[dim]) for dim in DIMENSIONS}

    iteration = 0

    def budget_left():
        return iteration < space.max_iterations and objective.evaluations < space.max_evaluations

    # s_mig is bounded above by zero, so full coverage ends the search early
    while current_value < 0.0 and budget_left():
        iteration += 1
        improved = False
        for sensor_idx in range(len(current.sensors)):
            for dim in DIMENSIONS:
                lo, hi = space.bounds[sensor_idx][dim]
                base = getattr(current.sensors[sensor_idx].mount, dim)
                for direction in (+1.0, -1.0):
                    if not budget_left():
                        break
                    value = min(max(base + direction * steps[dim], lo), hi)
                    if value == base:
                        continue
                    candidate = _with_mount_value(current, sensor_idx, dim, value)
                    cand_value = objective(candidate)
                    accepted = cand_value > current_value
                    trace.append(
                        TraceEntry(
                            iteration,
                            sensor_idx,
                            dim,
                            candidate.sensors[sensor_idx].mount,
                            cand_value,
                            accepted,
                            az_used,
                        )
                    )
                    if accepted:
                        current = candidate
                        current_value = cand_value
                        improved = True
                        break
        if not improved:
            # a failed sweep at the minimum steps certifies local optimality
            if all(steps[dim] <= space.min_step[dim] for dim in DIMENSIONS):
                break
            steps = {dim: max(step / 2.0, space.min_step[dim]) for dim, step in steps.items()}

    final_report = report_from_mask(
        current.name,
        pogs,
        coverage(current, grid, azimuth_steps=azimuth_steps, threads=threads),
    )
    return OptimizeResult(current, final_report, tuple(trace))


def grid_sweep(
    template: PlacementConfig,
    dimension: str,
    values,
    pogs: list[Pog],
    grid: VoxelGrid,
    sensor_indices: tuple[int, ...] | None = None,
    signs: tuple[float, ...] | None = None,
    azimuth_steps: int | None = None,
    threads: int = 1,
) -> list[tuple[float, MetricsReport]]:
    """Evaluate the template with one mount dimension overridden per value.

    The override sets dimension to sign*value on each selected sensor
    (default: all sensors, sign +1), which expresses both uniform sweeps and
    mirrored-pair ablations such as opposite roll on the two outer sensors.
    """
    if dimension not in DIMENSIONS:
        raise ConfigurationError(f"unknown sweep dimension {dimension!r}; use one of {DIMENSIONS}")
    values = list(values)
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if sensor_indices is None:
        sensor_indices = tuple(range(len(template.sensors)))
    if signs is None:
        signs = tuple(1.0 for _ in sensor_indices)
    if len(signs) != len(sensor_indices):
        raise ConfigurationError("signs and sensor_indices must have equal length")
    for idx in sensor_indices:
        if not 0 <= idx < len(template.sensors):
            raise ConfigurationError(f"sensor index {idx} out of range")

    out = []
    for value in values:
        config = template
        for idx, sign in zip(sensor_indices, signs):
            config = _with_mount_value(config, idx, dimension, sign * float(value))
        config = replace(config, name=f"{template.name}[{dimension}={value:g}]")
        mask = coverage(config, grid, azimuth_steps=azimuth_steps, threads=threads)
        out.append((float(value), report_from_mask(config.name, pogs, mask)))
    return out


def sweep_to_csv(results: list[tuple[float, MetricsReport]]) -> str:
    from .metrics import CSV_COLUMNS, report_rows

    lines = ["value," + ",".join(CSV_COLUMNS)]
    for value, report in results:
        for row in report_rows(report):
            lines.append(
                ",".join(
                    (
                        repr(value),
                        report.config_name,
                        row.class_label,
                        repr(row.h_pog),
                        repr(row.h_cond),
                        repr(row.info_gain),
                        repr(row.s_mig),
                        str(row.nonzero_voxels),
                        str(row.covered_nonzero_voxels),
                    )
                )
            )
    return "\n".join(lines) + "\n"
