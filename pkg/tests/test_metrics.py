import math

import numpy as np
import pytest

from lidarplace.geometry import ClassLabel, Pose, RoiSpec, build_grid
from lidarplace.lidar import CoverageMask, LidarSpec, MountedLidar, PlacementConfig
from lidarplace.metrics import (
    conditional_entropy,
    evaluate,
    info_gain,
    pog_entropy,
    report_from_mask,
    report_to_csv,
    report_to_text,
    surrogate_metric,
    voxel_entropy,
)
from lidarplace.pog import Pog

LN2 = math.log(2.0)


def make_pog(grid, indices, counts, t, label=ClassLabel.CAR):
    return Pog(grid, label, t, np.asarray(indices, dtype=np.int64), np.asarray(counts, dtype=np.int64))


def mask_of(grid, covered_indices):
    bits = np.zeros(grid.m, dtype=bool)
    bits[np.asarray(covered_indices, dtype=np.int64)] = True
    return CoverageMask(grid, bits)


def random_pog_and_mask(rng, grid, max_entries=200):
    n = int(rng.integers(1, max_entries))
    indices = np.sort(rng.choice(grid.m, size=n, replace=False))
    t = int(rng.integers(1, 50))
    counts = rng.integers(1, t + 1, size=n)
    pog = make_pog(grid, indices, counts, t)
    bits = rng.random(grid.m) < rng.uniform(0, 1)
    return pog, CoverageMask(grid, bits)


class TestVoxelEntropy:
    def test_half_is_ln2(self):
        assert voxel_entropy(0.5) == pytest.approx(LN2, rel=1e-12)

    def test_degenerate_limits(self):
        assert voxel_entropy(0.0) == 0.0
        assert voxel_entropy(1.0) == 0.0

    def test_quarter_value(self):
        # -0.25 ln 0.25 - 0.75 ln 0.75, high-precision reference
        assert voxel_entropy(0.25) == pytest.approx(0.5623351446188083, rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            voxel_entropy(-0.1)
        with pytest.raises(ValueError):
            voxel_entropy(1.1)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for p in rng.uniform(0, 1, size=200):
            assert voxel_entropy(p) == pytest.approx(voxel_entropy(1.0 - p), rel=1e-12)


class TestPogEntropy:
    def test_two_half_voxels(self, small_grid):
        pog = make_pog(small_grid, [3, 7], [1, 1], 2)
        assert pog_entropy(pog) == pytest.approx(2 * LN2, rel=1e-12)

    def test_all_certain_is_zero(self, small_grid):
        pog = make_pog(small_grid, [3, 7, 9], [4, 4, 4], 4)
        assert pog_entropy(pog) == 0.0

    def test_matches_naive_fsum_oracle(self, small_grid):
        rng = np.random.default_rng(61)
        for _ in range(20):
            pog, _ = random_pog_and_mask(rng, small_grid)
            naive = math.fsum(
                -(p * math.log(p) + (1 - p) * math.log(1 - p)) if 0 < p < 1 else 0.0
                for p in pog.probabilities
            )
            assert pog_entropy(pog) == pytest.approx(naive, rel=1e-12)


class TestConditionalEntropy:
    def test_full_coverage_zero(self, small_grid):
        pog = make_pog(small_grid, [3, 7], [1, 1], 2)
        full = CoverageMask(small_grid, np.ones(small_grid.m, dtype=bool))
        assert conditional_entropy(pog, full) == 0.0
        assert surrogate_metric(pog, full) == 0.0

    def test_empty_coverage_is_total(self, small_grid):
        pog = make_pog(small_grid, [3, 7], [1, 1], 2)
        empty = mask_of(small_grid, [])
        assert conditional_entropy(pog, empty) == pog_entropy(pog)
        assert surrogate_metric(pog, empty) == -pog_entropy(pog)
        assert info_gain(pog, empty) == 0.0

    def test_one_of_two_covered(self, small_grid):
        pog = make_pog(small_grid, [3, 7], [1, 1], 2)
        half = mask_of(small_grid, [3])
        assert conditional_entropy(pog, half) == pytest.approx(LN2, rel=1e-12)
        assert info_gain(pog, half) == pytest.approx(LN2, rel=1e-12)

    def test_grid_mismatch(self, small_grid):
        other = build_grid(RoiSpec(0, 10, 0, 10, 0, 5, 1.0))
        pog = make_pog(small_grid, [3], [1], 2)
        with pytest.raises(ValueError):
            conditional_entropy(pog, mask_of(other, []))


class TestMetricIdentities:
    def test_ledger_identity_randomized(self, small_grid):
        rng = np.random.default_rng(62)
        for _ in range(200):
            pog, mask = random_pog_and_mask(rng, small_grid)
            h = pog_entropy(pog)
            hc = conditional_entropy(pog, mask)
            ig = info_gain(pog, mask)
            assert ig + hc == pytest.approx(h, rel=1e-9, abs=1e-12)
            assert -h - 1e-12 <= surrogate_metric(pog, mask) <= 0.0
            assert -1e-12 <= ig <= h + 1e-12

    def test_info_gain_equals_covered_entropy(self, small_grid):
        rng = np.random.default_rng(63)
        for _ in range(50):
            pog, mask = random_pog_and_mask(rng, small_grid)
            direct = math.fsum(
                voxel_entropy(c / pog.frame_count)
                for c, keep in zip(pog.counts, mask.bits[pog.indices])
                if keep
            )
            assert info_gain(pog, mask) == pytest.approx(direct, rel=1e-9, abs=1e-12)

    def test_mask_monotonicity(self, small_grid):
        rng = np.random.default_rng(64)
        for _ in range(100):
            pog, mask = random_pog_and_mask(rng, small_grid)
            extra = rng.random(small_grid.m) < 0.2
            bigger = CoverageMask(small_grid, mask.bits | extra)
            assert surrogate_metric(pog, bigger) >= surrogate_metric(pog, mask)

    def test_adding_a_sensor_never_decreases_s_mig(self, small_grid):
        from lidarplace.lidar import coverage

        rng = np.random.default_rng(67)
        for _ in range(20):
            pog, _ = random_pog_and_mask(rng, small_grid)
            spec = LidarSpec(2, -30.0, 0.0, 48)
            mounts = [
                Pose(
                    x=float(rng.uniform(2, 18)),
                    y=float(rng.uniform(2, 18)),
                    z=float(rng.uniform(2, 5)),
                )
                for _ in range(3)
            ]
            small = PlacementConfig("s", tuple(MountedLidar(spec, m) for m in mounts[:2]))
            grown = PlacementConfig("g", tuple(MountedLidar(spec, m) for m in mounts))
            assert surrogate_metric(pog, coverage(grown, small_grid)) >= surrogate_metric(
                pog, coverage(small, small_grid)
            )

    def test_scale_free_counts(self, small_grid):
        rng = np.random.default_rng(65)
        pog, mask = random_pog_and_mask(rng, small_grid)
        for k in (2, 7):
            scaled = make_pog(small_grid, pog.indices, pog.counts * k, pog.frame_count * k)
            assert pog_entropy(scaled) == pytest.approx(pog_entropy(pog), rel=1e-12)
            assert surrogate_metric(scaled, mask) == pytest.approx(
                surrogate_metric(pog, mask), rel=1e-12
            )


class TestEvaluate:
    def _one_sensor_config(self):
        return PlacementConfig(
            "probe", (MountedLidar(LidarSpec(2, -30.0, 0.0, 64), Pose(x=10, y=10, z=4.5)),)
        )

    def test_single_class_aggregate_equals_row(self, small_grid):
        pog = make_pog(small_grid, [3, 7, 11], [1, 2, 2], 4)
        report = evaluate(self._one_sensor_config(), [pog], small_grid)
        row = report.rows[0]
        assert report.total.h_pog == row.h_pog
        assert report.total.s_mig == row.s_mig
        assert report.total.nonzero_voxels == row.nonzero_voxels

    def test_two_class_aggregate_sums(self, small_grid):
        pog_a = make_pog(small_grid, [3, 7], [1, 1], 2, ClassLabel.CAR)
        pog_b = make_pog(small_grid, [100, 200], [1, 1], 2, ClassLabel.VAN_CYCLIST)
        mask = mask_of(small_grid, [3, 100])
        report = report_from_mask("hand", [pog_a, pog_b], mask)
        assert report.total.h_pog == pytest.approx(4 * LN2, rel=1e-12)
        assert report.total.s_mig == pytest.approx(-2 * LN2, rel=1e-12)
        assert report.total.s_mig == pytest.approx(
            report.rows[0].s_mig + report.rows[1].s_mig, rel=1e-12
        )
        assert report.total.covered_nonzero_voxels == 2
        assert report.total.nonzero_voxels == 4
        for row in (*report.rows, report.total):
            assert row.info_gain == row.h_pog - row.h_cond
            assert row.s_mig == -row.h_cond
            assert 0 <= row.h_cond <= row.h_pog
            assert row.covered_nonzero_voxels <= row.nonzero_voxels

    def test_empty_pog_all_zero(self, small_grid):
        empty = Pog(small_grid, ClassLabel.CAR, 5, np.empty(0, np.int64), np.empty(0, np.int64))
        report = evaluate(self._one_sensor_config(), [empty], small_grid)
        assert report.total.h_pog == 0.0
        assert report.total.s_mig == 0.0
        assert report.total.info_gain == 0.0

    def test_grid_mismatch_rejected(self, small_grid):
        other = build_grid(RoiSpec(0, 10, 0, 10, 0, 5, 1.0))
        pog = make_pog(other, [1], [1], 2)
        with pytest.raises(ValueError):
            evaluate(self._one_sensor_config(), [pog], small_grid)


class TestReportSerialization:
    def test_csv_shape_and_header(self, small_grid):
        pog = make_pog(small_grid, [3, 7], [1, 1], 2)
        report = report_from_mask("line", [pog], mask_of(small_grid, [3]))
        text = report_to_csv(report)
        lines = text.splitlines()
        assert lines[0] == "config,class,h_pog,h_cond,info_gain,s_mig,nonzero_voxels,covered_nonzero_voxels"
        assert len(lines) == 3  # one class + total
        assert lines[1].startswith("line,Car,")
        assert lines[2].startswith("line,total,")

    def test_csv_byte_deterministic(self, small_grid):
        rng = np.random.default_rng(66)
        pog, mask = random_pog_and_mask(rng, small_grid)
        report = report_from_mask("cfg", [pog], mask)
        assert report_to_csv(report) == report_to_csv(report)

    def test_text_report_scaled(self, small_grid):
        # 10,000 half-probability voxels -> 6.93e3 nats, displayed as 6.93
        grid = build_grid(RoiSpec(0, 50, 0, 50, 0, 5, 0.5))
        idx = np.arange(10_000)
        pog = make_pog(grid, idx, np.ones(10_000, np.int64), 2)
        report = report_from_mask("big", [pog], mask_of(grid, []))
        text = report_to_text(report)
        assert "6.93" in text
        assert "-6.93" in text
