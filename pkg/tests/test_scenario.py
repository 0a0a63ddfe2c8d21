import math

import numpy as np
import pytest

from lidarplace.errors import ConfigurationError, ParseError
from lidarplace.geometry import ClassLabel, Dataset, LabelFrame, Pose, RoiSpec
from lidarplace.metrics import pog_entropy
from lidarplace.pog import estimate_pog
from lidarplace.scenario import (
    ScenarioParams,
    export_dataset,
    generate,
    import_dataset,
    import_kitti_labels,
)


@pytest.fixture
def roi():
    return RoiSpec(0.0, 40.0, -20.0, 20.0, -3.0, 1.0, 0.2)


def params(roi, **kw):
    defaults = dict(frame_count=20, roi=roi, seed=5)
    defaults.update(kw)
    return ScenarioParams(**defaults)


class TestGenerate:
    def test_deterministic(self, roi):
        a = generate(params(roi))
        b = generate(params(roi))
        assert a == b

    def test_seed_changes_output(self, roi):
        assert generate(params(roi, seed=1)) != generate(params(roi, seed=2))

    def test_zero_density_empty(self, roi):
        ds = generate(params(roi, density=0.0))
        assert all(len(f.boxes) == 0 for f in ds.frames)
        from lidarplace.geometry import build_grid

        grid = build_grid(roi)
        pog = estimate_pog(ds, grid, ClassLabel.CAR)
        assert pog.entry_count == 0
        assert pog_entropy(pog) == 0.0

    def test_centers_inside_roi(self, roi):
        ds = generate(params(roi, frame_count=100, density="dense"))
        for frame in ds.frames:
            for box in frame.boxes:
                x, y, z = box.center
                assert roi.x_min <= x <= roi.x_max
                assert roi.y_min <= y <= roi.y_max
                assert roi.z_min <= z <= roi.z_max

    def test_boxes_rest_on_ground(self, roi):
        p = params(roi, frame_count=50, ground_z=-1.0)
        ds = generate(p)
        for frame in ds.frames:
            for box in frame.boxes:
                assert box.center[2] == pytest.approx(-1.0 + box.size[2] / 2)

    def test_density_monotone_statistically(self, roi):
        counts = {}
        for density in ("sparse", "medium", "dense"):
            ds = generate(params(roi, frame_count=1000, density=density))
            counts[density] = np.array([len(f.boxes) for f in ds.frames])
        for lo, hi, rate_lo, rate_hi in (
            ("sparse", "medium", 4.0, 8.0),
            ("medium", "dense", 8.0, 12.0),
        ):
            mean_lo, mean_hi = counts[lo].mean(), counts[hi].mean()
            assert mean_lo < mean_hi
            # Poisson mean within 3 sigma of the target rate
            for mean, rate in ((mean_lo, rate_lo), (mean_hi, rate_hi)):
                assert abs(mean - rate) < 3 * math.sqrt(rate / 1000)

    def test_class_mix_respected(self, roi):
        p = params(
            roi,
            frame_count=300,
            density="dense",
            class_mix=((ClassLabel.CAR, 0.5), (ClassLabel.PEDESTRIAN, 0.5)),
        )
        ds = generate(p)
        labels = [b.class_label for f in ds.frames for b in f.boxes]
        frac = sum(1 for l in labels if l is ClassLabel.CAR) / len(labels)
        assert 0.4 < frac < 0.6

    def test_class_size_override(self, roi):
        p = params(
            roi,
            frame_count=50,
            class_sizes=((ClassLabel.CAR, (4.0, 2.0, 0.5)),),
            size_spread=0.0,
        )
        ds = generate(p)
        cars = [b for f in ds.frames for b in f.boxes if b.class_label is ClassLabel.CAR]
        assert cars and all(b.size == (4.0, 2.0, 0.5) for b in cars)

    def test_invalid_params(self, roi):
        with pytest.raises(ConfigurationError):
            params(roi, frame_count=0)
        with pytest.raises(ConfigurationError):
            params(roi, density="wild")
        with pytest.raises(ConfigurationError):
            params(roi, class_mix=((ClassLabel.CAR, 0.4),))


class TestNativeFormatRoundTrip:
    def test_round_trip(self, roi, tmp_path):
        ds = generate(params(roi, frame_count=12))
        export_dataset(ds, tmp_path)
        assert import_dataset(tmp_path) == ds

    def test_empty_frame_round_trip(self, tmp_path, roi):
        ds = Dataset((LabelFrame("000000", ()),))
        export_dataset(ds, tmp_path)
        back = import_dataset(tmp_path)
        assert back.frame_count == 1 and back.frames[0].boxes == ()

    def test_hand_written_line(self, tmp_path):
        labels = tmp_path / "labels"
        labels.mkdir()
        (labels / "000042.txt").write_text("Car 10.0 -2.5 0.25 4.2 1.8 1.5 0.3\n")
        ds = import_dataset(tmp_path)
        assert ds.frames[0].frame_id == "000042"
        box = ds.frames[0].boxes[0]
        assert box.center == (10.0, -2.5, 0.25)
        assert box.size == (4.2, 1.8, 1.5)
        assert box.yaw == pytest.approx(0.3)
        assert box.class_label is ClassLabel.CAR

    def test_malformed_line_reports_location(self, tmp_path):
        labels = tmp_path / "labels"
        labels.mkdir()
        (labels / "000000.txt").write_text("Car 1 2 3\n")
        with pytest.raises(ParseError, match="000000.txt:1"):
            import_dataset(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ParseError, match="no label files"):
            import_dataset(tmp_path / "nowhere")


class TestKittiImport:
    LINE = "Car 0 0 0 0 0 0 0 1.5 1.8 4.2 10.0 0.5 0.0 0.3\n"

    def test_documented_mapping(self, tmp_path):
        (tmp_path / "000000.txt").write_text(self.LINE)
        ds = import_kitti_labels(tmp_path)
        box = ds.frames[0].boxes[0]
        assert box.center == (10.0, 0.5, 0.75)  # bottom-center z + h/2
        assert box.size == (4.2, 1.8, 1.5)
        assert box.yaw == pytest.approx(0.3)
        assert box.class_label is ClassLabel.CAR

    def test_empty_file(self, tmp_path):
        (tmp_path / "000000.txt").write_text("")
        ds = import_kitti_labels(tmp_path)
        assert ds.frames[0].boxes == ()

    def test_dontcare_skipped(self, tmp_path):
        (tmp_path / "000000.txt").write_text(
            "DontCare -1 -1 -10 0 0 0 0 -1 -1 -1 -1000 -1000 -1000 -10\n" + self.LINE
        )
        ds = import_kitti_labels(tmp_path)
        assert len(ds.frames[0].boxes) == 1

    def test_van_and_cyclist_merge(self, tmp_path):
        (tmp_path / "000000.txt").write_text(
            "Van 0 0 0 0 0 0 0 2.2 2.0 5.1 8.0 1.0 0.0 0.0\n"
            "Cyclist 0 0 0 0 0 0 0 1.7 0.6 1.8 6.0 -1.0 0.0 0.5\n"
        )
        ds = import_kitti_labels(tmp_path)
        assert all(b.class_label is ClassLabel.VAN_CYCLIST for b in ds.frames[0].boxes)

    def test_unknown_type_fail_mode(self, tmp_path):
        (tmp_path / "000000.txt").write_text("Unicorn 0 0 0 0 0 0 0 1 1 1 0 0 0 0\n")
        assert import_kitti_labels(tmp_path).frames[0].boxes == ()
        with pytest.raises(ParseError, match="Unicorn"):
            import_kitti_labels(tmp_path, unknown="fail")

    def test_short_line_rejected(self, tmp_path):
        (tmp_path / "000000.txt").write_text("Car 0 0 0\n")
        with pytest.raises(ParseError, match="15"):
            import_kitti_labels(tmp_path)

    def test_frame_pose_hook(self, tmp_path):
        (tmp_path / "000000.txt").write_text(self.LINE)
        ds = import_kitti_labels(tmp_path, frame_pose=Pose(40.0, 20.0, 0.0))
        assert ds.frames[0].boxes[0].center == (50.0, 20.5, 0.75)
