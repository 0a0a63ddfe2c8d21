"""Correlation between externally produced detection metrics and the surrogate.

Detection scores are never computed here; they arrive as CSV rows
(placement, detector, metric, value) and are joined with per-placement
surrogate values. Pearson runs on raw values, Spearman on average ranks
(ties averaged). Zero variance in either variable leaves the coefficient
undefined rather than zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class CorrelationRow:
    placement: str
    s_mig: float
    metric_value: float
    metric_name: str
    detector_name: str


@dataclass(frozen=True)
class GroupResult:
    """Coefficients for one (metric, detector) group; None means undefined."""

    metric_name: str
    detector_name: str
    n: int
    pearson_r: float | None
    spearman_rho: float | None
    note: str = ""


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xd = x - x.mean()
    yd = y - y.mean()
    sx = math.sqrt(float(xd @ xd))
    sy = math.sqrt(float(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(xd @ yd) / (sx * sy)


def correlate(rows: list[CorrelationRow]) -> list[GroupResult]:
    """Per-(metric, detector) Pearson and Spearman coefficients.

    Requires >= 3 rows per group with unique placement names; invariant to
    row order. Spearman is computed as Pearson on average ranks, so it is
    invariant to strictly monotone transforms of either variable.
    """
    groups: dict[tuple[str, str], list[CorrelationRow]] = {}
    for row in rows:
        if not (math.isfinite(row.s_mig) and math.isfinite(row.metric_value)):
            raise ValueError(f"non-finite value for placement {row.placement!r}")
        groups.setdefault((row.metric_name, row.detector_name), []).append(row)

    results = []
    for (metric_name, detector_name), members in sorted(groups.items()):
        names = [m.placement for m in members]
        if len(set(names)) != len(names):
            raise ValueError(
                f"duplicate placement in group ({metric_name}, {detector_name})"
            )
        if len(members) < 3:
            raise ValueError(
                f"group ({metric_name}, {detector_name}) has {len(members)} rows; need >= 3"
            )
        members = sorted(members, key=lambda m: m.placement)
        x = np.array([m.s_mig for m in members])
        y = np.array([m.metric_value for m in members])
        pearson = _pearson(x, y)
        spearman = _pearson(_average_ranks(x), _average_ranks(y))
        note = "" if pearson is not None and spearman is not None else "zero-variance"
        results.append(
            GroupResult(metric_name, detector_name, len(members), pearson, spearman, note)
        )
    return results


def results_to_csv(results: list[GroupResult]) -> str:
    lines = ["metric,detector,n,pearson_r,spearman_rho,note"]
    for r in results:
        pearson = "undefined" if r.pearson_r is None else repr(r.pearson_r)
        spearman = "undefined" if r.spearman_rho is None else repr(r.spearman_rho)
        lines.append(f"{r.metric_name},{r.detector_name},{r.n},{pearson},{spearman},{r.note}")
    return "\n".join(lines) + "\n"


def read_detections_csv(path) -> list[tuple[str, str, str, float]]:
    """Rows of (placement, detector, metric, value) from the documented schema."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != [
            "placement",
            "detector",
            "metric",
            "value",
        ]:
            raise ParseError(
                "detections CSV must start with header 'placement,detector,metric,value'", path, 1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, got {len(row)}", path, lineno)
            try:
                value = float(row[3])
            except ValueError:
                raise ParseError(f"malformed value {row[3]!r}", path, lineno) from None
            out.append((row[0].strip(), row[1].strip(), row[2].strip(), value))
    if not out:
        raise ParseError("detections CSV has no data rows", path)
    return out


def read_smig_csv(path) -> dict[str, float]:
    """placement -> aggregate s_mig from a compare/evaluate report CSV.

    Accepts either the two-column form (placement,s_mig) or the full report
    CSV, from which the class == "total" rows are taken.
    """
    out: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty surrogate CSV", path, 1)
        cols = [h.strip().lower() for h in header]
        if cols == ["placement", "s_mig"]:
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    out[row[0].strip()] = float(row[1])
                except (IndexError, ValueError) as exc:
                    raise ParseError(f"malformed row ({exc})", path, lineno) from None
        elif "config" in cols and "class" in cols and "s_mig" in cols:
            i_cfg, i_cls, i_val = cols.index("config"), cols.index("class"), cols.index("s_mig")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if row[i_cls].strip() == "total":
                    try:
                        out[row[i_cfg].strip()] = float(row[i_val])
                    except ValueError as exc:
                        raise ParseError(f"malformed s_mig ({exc})", path, lineno) from None
        else:
            raise ParseError(
                "surrogate CSV must have columns 'placement,s_mig' or a report header", path, 1
            )
    if not out:
        raise ParseError("surrogate CSV has no usable rows", path)
    return out


def join_rows(
    detections: list[tuple[str, str, str, float]], smig: dict[str, float]
) -> list[CorrelationRow]:
    rows = []
    for placement, detector, metric, value in detections:
        if placement not in smig:
            raise ValueError(f"no surrogate value for placement {placement!r}")
        rows.append(CorrelationRow(placement, smig[placement], value, metric, detector))
    return rows


def write_scatter_plot(rows: list[CorrelationRow], path) -> None:
    """Static vector-graphics scatter: s_mig on x, one series per detector/metric."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "lidarplace"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    series: dict[tuple[str, str], list[CorrelationRow]] = {}
    for row in rows:
        series.setdefault((row.detector_name, row.metric_name), []).append(row)
    for (detector, metric), members in sorted(series.items()):
        members = sorted(members, key=lambda m: m.s_mig)
        xs = [m.s_mig for m in members]
        ys = [m.metric_value for m in members]
        ax.plot(xs, ys, marker="o", linestyle="--", linewidth=0.8, label=f"{detector} {metric}")
    ax.set_xlabel("surrogate metric (nats)")
    ax.set_ylabel("detection score")
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), format="svg", metadata={"Date": None})
    plt.close(fig)
