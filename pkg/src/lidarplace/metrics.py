"""Entropy, information gain, and the coverage surrogate metric.

A covered voxel is observed by some beam and contributes no residual
uncertainty; an uncovered voxel keeps its marginal binary entropy. The
surrogate metric is minus the residual entropy, so it is always <= 0 and
equals 0 exactly when every nonzero-probability voxel is covered. Natural
logarithms throughout; sums use error-free compensated accumulation in
sorted voxel-index order so results are stable across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lidar import CoverageMask, PlacementConfig, coverage
from .geometry import VoxelGrid
from .pog import Pog


def voxel_entropy(p: float) -> float:
    """Binary entropy of one occupancy probability, in nats."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log(1.0 - p))


def _entropy_terms(p: np.ndarray) -> np.ndarray:
    """Vectorized binary entropy with the 0*log(0) := 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    interior = (p > 0.0) & (p < 1.0)
    q = p[interior]
    out[interior] = -(q * np.log(q) + (1.0 - q) * np.log(1.0 - q))
    return out


def _fsum(values: np.ndarray) -> float:
    # exact compensated summation; index order is fixed by the caller
    return math.fsum(values.tolist())


def pog_entropy(pog: Pog) -> float:
    """Total entropy: sum of voxel entropies over stored (nonzero) voxels."""
    return _fsum(_entropy_terms(pog.probabilities))


def _check_same_grid(pog: Pog, mask: CoverageMask) -> None:
    if pog.grid != mask.grid:
        raise ValueError("pog and coverage mask are defined over different grids")


def conditional_entropy(pog: Pog, mask: CoverageMask) -> float:
    """Residual entropy of the voxels no beam intersects."""
    _check_same_grid(pog, mask)
    terms = _entropy_terms(pog.probabilities)
    uncovered = ~mask.bits[pog.indices]
    return _fsum(terms[uncovered])


def surrogate_metric(pog: Pog, mask: CoverageMask) -> float:
    """Minus the residual entropy; always <= 0, and 0 at full coverage."""
    h_cond = conditional_entropy(pog, mask)
    return -h_cond if h_cond != 0.0 else 0.0


def info_gain(pog: Pog, mask: CoverageMask) -> float:
    """Entropy mass removed by the coverage: H_total - H_residual."""
    return pog_entropy(pog) - conditional_entropy(pog, mask)


def covered_entry_count(pog: Pog, mask: CoverageMask) -> int:
    _check_same_grid(pog, mask)
    return int(np.count_nonzero(mask.bits[pog.indices]))


@dataclass(frozen=True)
class ClassMetrics:
    """One report row; the aggregate row uses class_label "total"."""

    class_label: str
    h_pog: float
    h_cond: float
    info_gain: float
    s_mig: float
    nonzero_voxels: int
    covered_nonzero_voxels: int


@dataclass(frozen=True)
class MetricsReport:
    """Per-class metric rows for one placement plus their aggregate sum."""

    config_name: str
    rows: tuple[ClassMetrics, ...]
    total: ClassMetrics

    def row_for(self, class_label: str) -> ClassMetrics:
        for row in self.rows:
            if row.class_label == class_label:
                return row
        raise KeyError(class_label)


CSV_COLUMNS = (
    "config",
    "class",
    "h_pog",
    "h_cond",
    "info_gain",
    "s_mig",
    "nonzero_voxels",
    "covered_nonzero_voxels",
)


def _class_metrics(label: str, pog: Pog, mask: CoverageMask) -> ClassMetrics:
    terms = _entropy_terms(pog.probabilities)
    covered = mask.bits[pog.indices]
    h_pog = _fsum(terms)
    h_cond = _fsum(terms[~covered])
    return ClassMetrics(
        class_label=label,
        h_pog=h_pog,
        h_cond=h_cond,
        info_gain=h_pog - h_cond,
        s_mig=-h_cond if h_cond != 0.0 else 0.0,
        nonzero_voxels=pog.entry_count,
        covered_nonzero_voxels=int(np.count_nonzero(covered)),
    )


def _total_row(rows: tuple[ClassMetrics, ...]) -> ClassMetrics:
    h_pog = math.fsum(r.h_pog for r in rows)
    h_cond = math.fsum(r.h_cond for r in rows)
    return ClassMetrics(
        class_label="total",
        h_pog=h_pog,
        h_cond=h_cond,
        info_gain=h_pog - h_cond,
        s_mig=-h_cond if h_cond != 0.0 else 0.0,
        nonzero_voxels=sum(r.nonzero_voxels for r in rows),
        covered_nonzero_voxels=sum(r.covered_nonzero_voxels for r in rows),
    )


def report_from_mask(config_name: str, pogs: list[Pog], mask: CoverageMask) -> MetricsReport:
    """Build a report from a precomputed coverage mask."""
    rows = tuple(_class_metrics(p.class_label.value, p, mask) for p in pogs)
    return MetricsReport(config_name, rows, _total_row(rows))


def evaluate(
    config: PlacementConfig,
    pogs: list[Pog],
    grid: VoxelGrid,
    azimuth_steps: int | None = None,
    threads: int = 1,
) -> MetricsReport:
    """Compute coverage once and report every class plus the aggregate."""
    if not pogs:
        raise ValueError("at least one pog is required")
    for pog in pogs:
        if pog.grid != grid:
            raise ValueError(
                f"pog for class {pog.class_label.value} was built on a different grid"
            )
    mask = coverage(config, grid, azimuth_steps=azimuth_steps, threads=threads)
    return report_from_mask(config.name, pogs, mask)


def report_rows(report: MetricsReport):
    yield from report.rows
    yield report.total


def report_to_csv(report: MetricsReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report_rows(report):
        lines.append(
            ",".join(
                (
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


def reports_to_csv(reports: list[MetricsReport]) -> str:
    """One CSV for several placements (compare output), reports in given order."""
    lines = [",".join(CSV_COLUMNS)]
    for report in reports:
        for line in report_to_csv(report).splitlines()[1:]:
            lines.append(line)
    return "\n".join(lines) + "\n"


def report_to_text(report: MetricsReport, log_base: float = math.e) -> str:
    """Human-readable summary; entropies shown as x10^3 with two decimals."""
    scale = 1e3 * math.log(log_base)
    unit = "nats" if log_base == math.e else f"log{log_base:g}"
    head = f"{'class':<12}{'h_pog':>10}{'h_cond':>10}{'info_gain':>11}{'s_mig':>10}{'nonzero':>10}{'covered':>10}"
    lines = [
        f"placement: {report.config_name}",
        f"entropy unit: {unit} (columns scaled by 10^3)",
        head,
    ]
    for row in report_rows(report):
        lines.append(
            f"{row.class_label:<12}"
            f"{row.h_pog / scale:>10.2f}"
            f"{row.h_cond / scale:>10.2f}"
            f"{row.info_gain / scale:>11.2f}"
            f"{row.s_mig / scale:>10.2f}"
            f"{row.nonzero_voxels:>10d}"
            f"{row.covered_nonzero_voxels:>10d}"
        )
    return "\n".join(lines) + "\n"
