"""Command-line pipeline: build POGs, evaluate/compare/optimize placements,
generate synthetic datasets, sweep ablations, and correlate external
detection metrics with the surrogate.

Exit codes: 0 success, 2 usage, 3 parse/format failure, 4 validation
failure, 5 I/O failure, 1 unexpected. Error paths write no partial output
files (outputs are computed first and written via rename).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import correlate as correlate_mod
from .errors import ConfigurationError, FormatError, ParseError
from .geometry import (
    ClassLabel,
    RoiSpec,
    build_grid,
    ego_pose_for_roi,
    front_half_roi,
    full_roi,
)
from .lidar import with_azimuth_steps
from .metrics import evaluate, report_to_csv, report_to_text, reports_to_csv
from .placements import BUILTIN_NAMES, builtin, is_builtin, parse_placement, write_placement
from .pog import estimate_pog, load_pog, save_pog
from .scenario import (
    DENSITY_OBJECTS_PER_FRAME,
    ScenarioParams,
    export_dataset,
    generate,
    import_dataset,
    import_kitti_labels,
)
from .search import SearchSpace, grid_sweep, optimize, sweep_to_csv, trace_to_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_IO = 5


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _parse_roi(value: str | None, delta: float | None) -> RoiSpec | None:
    if value is None and delta is None:
        return None
    d = delta if delta is not None else 0.2
    if value is None or value == "front-half":
        return front_half_roi(d)
    if value == "full":
        return full_roi(d)
    parts = value.split(",")
    if len(parts) != 6:
        raise ConfigurationError(
            "--roi must be 'front-half', 'full', or six numbers x0,x1,y0,y1,z0,z1"
        )
    try:
        nums = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigurationError(f"malformed --roi value: {exc}") from None
    return RoiSpec(nums[0], nums[1], nums[2], nums[3], nums[4], nums[5], d)


def _parse_classes(value: str) -> list[ClassLabel]:
    labels = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            labels.append(ClassLabel(part))
        except ValueError:
            valid = ", ".join(c.value for c in ClassLabel)
            raise ConfigurationError(f"unknown class {part!r}; valid classes: {valid}") from None
    if not labels:
        raise ConfigurationError("--classes selected no classes")
    return labels


def _load_placement(ref: str, azimuth_steps: int | None, grid=None):
    path = Path(ref)
    if path.exists():
        config = parse_placement(path)
    elif is_builtin(ref):
        config = builtin(ref)
    else:
        raise ConfigurationError(
            f"{ref!r} is neither a placement file nor a builtin; builtins: {', '.join(BUILTIN_NAMES)}"
        )
    if azimuth_steps is not None:
        config = with_azimuth_steps(config, azimuth_steps)
    # rigs authored without an explicit ego pose follow the grid convention
    # (identity for the front-half region, center offset for the full one)
    if grid is not None and config.ego_pose_in_roi.is_identity:
        config = replace(config, ego_pose_in_roi=ego_pose_for_roi(grid.roi))
    return config


def _load_pogs(paths, roi: RoiSpec | None):
    if not paths:
        raise ConfigurationError("at least one --pog file is required")
    pogs = [load_pog(p) for p in paths]
    grid = pogs[0].grid
    for path, pog in zip(paths, pogs):
        if pog.grid != grid:
            raise ConfigurationError(f"pog {path} was built on a different grid")
    if roi is not None and build_grid(roi) != grid:
        raise ConfigurationError(
            f"pog files use region {grid.roi}, which does not match the --roi/--delta flags"
        )
    return pogs, grid


def _add_common_flags(parser, roi=True, pogs=False, threads=True, out=True):
    if roi:
        parser.add_argument("--roi", help="'front-half' (default), 'full', or x0,x1,y0,y1,z0,z1")
        parser.add_argument("--delta", type=float, help="voxel edge length in meters (default 0.2)")
    if pogs:
        parser.add_argument(
            "--pog", action="append", default=[], metavar="FILE", help="POG file (repeatable)"
        )
        parser.add_argument("--azimuth-steps", type=int, help="override azimuth samples per beam")
    if threads:
        parser.add_argument("--threads", type=int, default=1)
    if out:
        parser.add_argument("--out", help="output file path")


def _cmd_pog_build(args) -> int:
    roi = _parse_roi(args.roi, args.delta) or front_half_roi(args.delta or 0.2)
    grid = build_grid(roi)
    if args.format == "kitti":
        dataset = import_kitti_labels(args.labels)
    else:
        dataset = import_dataset(args.labels)
    ego = ego_pose_for_roi(roi)
    out_dir = Path(args.out)
    outputs = []
    for label in _parse_classes(args.classes):
        pog = estimate_pog(dataset, grid, label, ego_pose=ego, threads=args.threads)
        outputs.append((out_dir / f"{label.value}.pog", pog))
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, pog in outputs:
        tmp = path.with_name(path.name + ".tmp")
        save_pog(pog, tmp)
        os.replace(tmp, path)
        print(
            f"{path}: class={pog.class_label.value} frames={pog.frame_count} "
            f"nonzero_voxels={pog.entry_count}"
        )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    roi = _parse_roi(args.roi, args.delta)
    pogs, grid = _load_pogs(args.pog, roi)
    config = _load_placement(args.placement, args.azimuth_steps, grid)
    report = evaluate(config, pogs, grid, threads=args.threads)
    print(report_to_text(report), end="")
    if args.out:
        _atomic_write_text(args.out, report_to_csv(report))
    return EXIT_OK


def _cmd_compare(args) -> int:
    roi = _parse_roi(args.roi, args.delta)
    pogs, grid = _load_pogs(args.pog, roi)
    reports = []
    for ref in args.placements:
        config = _load_placement(ref, args.azimuth_steps, grid)
        reports.append(evaluate(config, pogs, grid, threads=args.threads))
    reports.sort(key=lambda r: (-r.total.s_mig, r.config_name))
    for rank, report in enumerate(reports, start=1):
        total = report.total
        print(
            f"{rank:2d}. {report.config_name:<16} s_mig={total.s_mig:.6g} "
            f"info_gain={total.info_gain:.6g} covered={total.covered_nonzero_voxels}/{total.nonzero_voxels}"
        )
    if args.out:
        _atomic_write_text(args.out, reports_to_csv(reports))
    return EXIT_OK


def _cmd_generate(args) -> int:
    roi = _parse_roi(args.roi, args.delta) or front_half_roi(args.delta or 0.2)
    if args.params:
        import json

        with open(args.params) as fh:
            raw = json.load(fh)
        raw.setdefault("frame_count", args.frames)
        raw.setdefault("seed", args.seed)
        if "roi" in raw:
            r = raw["roi"]
            roi = RoiSpec(r[0], r[1], r[2], r[3], r[4], r[5], raw.get("delta", roi.delta))
        if "class_mix" in raw:
            raw["class_mix"] = tuple(
                (ClassLabel(label), frac) for label, frac in raw["class_mix"]
            )
        for key in ("lane_offsets",):
            if key in raw:
                raw[key] = tuple(raw[key])
        raw.pop("roi", None)
        raw.pop("delta", None)
        params = ScenarioParams(roi=roi, **raw)
    else:
        density = args.density
        try:
            density = float(density)
        except ValueError:
            pass
        params = ScenarioParams(
            frame_count=args.frames, roi=roi, density=density, seed=args.seed
        )
    ego = ego_pose_for_roi(params.roi)
    if not ego.is_identity:
        shifted = RoiSpec(
            params.roi.x_min - ego.x, params.roi.x_max - ego.x,
            params.roi.y_min - ego.y, params.roi.y_max - ego.y,
            params.roi.z_min - ego.z, params.roi.z_max - ego.z,
            params.roi.delta,
        )
        params = replace(params, roi=shifted)
    dataset = generate(params)
    export_dataset(dataset, args.out_dir)
    boxes = sum(len(f.boxes) for f in dataset.frames)
    print(f"{args.out_dir}: {dataset.frame_count} frames, {boxes} boxes")
    return EXIT_OK


def _cmd_optimize(args) -> int:
    roi = _parse_roi(args.roi, args.delta)
    pogs, grid = _load_pogs(args.pog, roi)
    config = _load_placement(args.initial, args.azimuth_steps, grid)
    if args.space:
        space = SearchSpace.from_json(args.space, len(config.sensors))
    else:
        space = SearchSpace.default(len(config.sensors))
    result = optimize(config, space, pogs, grid, threads=args.threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    best_path = out_dir / "best.placement"
    tmp = best_path.with_name(best_path.name + ".tmp")
    write_placement(result.config, tmp)
    os.replace(tmp, best_path)
    _atomic_write_text(out_dir / "report.csv", report_to_csv(result.report))
    _atomic_write_text(out_dir / "trace.csv", trace_to_csv(list(result.trace)))
    print(report_to_text(result.report), end="")
    print(f"trace entries: {len(result.trace)}; outputs in {out_dir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    roi = _parse_roi(args.roi, args.delta)
    pogs, grid = _load_pogs(args.pog, roi)
    template = _load_placement(args.template, args.azimuth_steps, grid)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"malformed --values: {exc}") from None
    sensors = None
    signs = None
    if args.sensors:
        sensors = tuple(int(v) for v in args.sensors.split(","))
    if args.signs:
        signs = tuple(float(v) for v in args.signs.split(","))
    results = grid_sweep(
        template,
        args.dimension,
        values,
        pogs,
        grid,
        sensor_indices=sensors,
        signs=signs,
        threads=args.threads,
    )
    for value, report in results:
        print(f"{args.dimension}={value:g}: s_mig={report.total.s_mig:.6g}")
    if args.out:
        _atomic_write_text(args.out, sweep_to_csv(results))
    return EXIT_OK


def _cmd_correlate(args) -> int:
    detections = correlate_mod.read_detections_csv(args.detections)
    smig = correlate_mod.read_smig_csv(args.smig)
    rows = correlate_mod.join_rows(detections, smig)
    results = correlate_mod.correlate(rows)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out_dir / "coefficients.csv", correlate_mod.results_to_csv(results))
    plot_path = out_dir / "scatter.svg"
    tmp = plot_path.with_name(plot_path.name + ".tmp")
    correlate_mod.write_scatter_plot(rows, tmp)
    os.replace(tmp, plot_path)
    for r in results:
        pearson = "undefined" if r.pearson_r is None else f"{r.pearson_r:.4f}"
        spearman = "undefined" if r.spearman_rho is None else f"{r.spearman_rho:.4f}"
        print(f"{r.metric_name}/{r.detector_name}: n={r.n} pearson={pearson} spearman={spearman}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarplace",
        description="Evaluate and optimize multi-LiDAR placements over occupancy grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pog-build", help="estimate per-class occupancy grids from labels")
    p.add_argument("--labels", required=True, help="label directory (native or KITTI format)")
    p.add_argument("--format", choices=("native", "kitti"), default="native")
    p.add_argument("--classes", default="Car,VanCyclist")
    _add_common_flags(p, out=False)
    p.add_argument("--out", required=True, help="output directory for <Class>.pog files")
    p.set_defaults(func=_cmd_pog_build)

    p = sub.add_parser("evaluate", help="metric report for one placement")
    p.add_argument("placement", help="placement file or builtin name")
    _add_common_flags(p, pogs=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="rank placements by aggregate surrogate metric")
    p.add_argument("placements", nargs="+", help="placement files or builtin names")
    _add_common_flags(p, pogs=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("generate", help="generate a synthetic label dataset")
    p.add_argument("--params", help="JSON file of ScenarioParams fields")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument(
        "--density",
        default="medium",
        help=f"one of {', '.join(DENSITY_OBJECTS_PER_FRAME)} or expected objects/frame",
    )
    p.add_argument("--seed", type=int, default=0)
    _add_common_flags(p, threads=False, out=False)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("optimize", help="coordinate-descent placement optimization")
    p.add_argument("initial", help="initial placement file or builtin name")
    p.add_argument("--space", help="JSON search-space file (default: roof-box bounds)")
    _add_common_flags(p, pogs=True, out=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("sweep", help="evaluate a template across one mount dimension")
    p.add_argument("template", help="placement file or builtin name")
    p.add_argument("--dimension", required=True, choices=("x", "y", "z", "roll", "pitch"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--sensors", help="comma-separated sensor indices (default: all)")
    p.add_argument("--signs", help="comma-separated per-sensor signs (default: +1)")
    _add_common_flags(p, pogs=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("correlate", help="correlate external detection metrics with s_mig")
    p.add_argument("--detections", required=True, help="CSV: placement,detector,metric,value")
    p.add_argument("--smig", required=True, help="CSV: placement,s_mig or a report CSV")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_correlate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FormatError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigurationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
