import json
import shutil
import struct
from pathlib import Path

import numpy as np
import pytest

from s33convert.cli import main
from s33convert.pipeline import convert, make_split
from s33convert.raw import AlignmentError, RawLayoutError, scan

FIXTURE = Path(__file__).parent / "fixture" / "raw"

RUN_CONFIG = {
    "scenario": {
        "num_elements": 16,
        "num_beams": 64,
        "noise_var": 0.0,
        "sensors": {
            "camera_h": 16,
            "camera_w": 16,
            "bev_h": 8,
            "bev_w": 8,
            "bev_fov": [-60.0, 60.0, 0.0, 40.0],
            "radar_grid_h": 8,
            "radar_grid_w": 8,
        },
    }
}


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(RUN_CONFIG))
    return path


@pytest.fixture()
def converted(tmp_path, config_path):
    out = tmp_path / "out"
    with pytest.warns(UserWarning, match="sample 2: no camera"):
        manifest = convert(FIXTURE, out, config_path)
    return out, manifest


class TestFixtureConversion:
    def test_manifest_and_split(self, converted):
        _, manifest = converted
        assert manifest["num_samples"] == 5
        assert manifest["split"] == {"train": [0, 3], "val": [3, 4], "test": [4, 5]}
        assert set(manifest["modalities"]) == {"camera", "lidar", "radar", "gps", "mmwave"}

    def test_labels_equal_power_argmax(self, converted):
        out, _ = converted
        from s33convert.raw import load_power

        # recompute from the raw text files, independent of stored arrays
        expected = []
        for i in range(5):
            p = load_power(FIXTURE / f"unit1/mmwave_power/power_{i}.txt", 64)
            expected.append(int(np.argmax(p)))
        stored = read_bmt(out / "labels.bmt").astype(int).tolist()
        assert stored == expected

    def test_bmt_header_bytes(self, converted):
        out, manifest = converted
        raw = (out / "mmwave.bmt").read_bytes()
        assert raw[:4] == b"BMT1"
        assert raw[4] == 1  # f32
        assert raw[5] == 2  # rank
        dims = struct.unpack_from("<2Q", raw, 6)
        assert list(dims) == manifest["modalities"]["mmwave"]["shape"] == [5, 64]
        assert len(raw) == 6 + 16 + 5 * 64 * 4
        gps_raw = (out / "gps.bmt").read_bytes()
        assert gps_raw[4] == 2  # f64

    def test_presence_flag_cleared_for_missing_camera(self, converted):
        out, manifest = converted
        presence = read_bmt(out / "presence.bmt")
        order = manifest["presence"]["order"]
        cam = order.index("camera")
        assert presence[2, cam] == 0.0
        assert presence[:, order.index("mmwave")].tolist() == [1.0] * 5
        assert presence[0, cam] == 1.0

    def test_shapes_follow_config(self, converted):
        _, manifest = converted
        assert manifest["modalities"]["camera"]["shape"] == [5, 3, 16, 16]
        assert manifest["modalities"]["lidar"]["shape"] == [5, 1, 8, 8]
        assert manifest["modalities"]["radar"]["shape"] == [5, 2, 8, 8]
        assert manifest["modalities"]["gps"]["shape"] == [5, 4]


class TestPrimaryLoaderRoundTrip:
    """The converted tree must open cleanly in the training pipeline."""

    def test_loader_opens_without_validation_errors(self, converted):
        out, _ = converted
        from beambench.dataset import DatasetReader

        reader = DatasetReader(out)
        assert reader.num_samples == 5
        assert reader.split.train == (0, 3)
        assert np.array_equal(reader.labels, np.argmax(reader.arrays["mmwave"], axis=1))

    def test_loader_batches_and_presence(self, converted):
        out, _ = converted
        from beambench.dataset import DatasetReader
        from beambench.errors import MissingModalityError

        reader = DatasetReader(out)
        batch = reader.batch([0, 1], ["camera", "lidar", "radar", "gps", "mmwave"])
        assert all(v.shape[0] == 2 for v in batch.inputs.values())
        with pytest.raises(MissingModalityError):
            reader.batch([2], ["camera"])

    def test_radar_recipe_matches_training_pipeline(self, converted, config_path):
        # parity contract: same cube + same config constants -> same maps
        out, _ = converted
        from beambench.sensing import radar_input, radar_maps

        cube = np.load(FIXTURE / "unit1/radar/cube_0.npy")
        expected = radar_input(radar_maps(cube), 8, 8)
        stored = read_bmt(out / "radar.bmt")[0]
        assert np.allclose(stored, expected, atol=1e-6)

    def test_bev_recipe_matches_training_pipeline(self, converted):
        out, _ = converted
        from beambench.sensing import lidar_to_bev

        cloud = np.load(FIXTURE / "unit1/lidar/cloud_0.npy")
        expected = lidar_to_bev(cloud[:, :3], 8, 8, (-60.0, 60.0, 0.0, 40.0)).grid
        assert np.array_equal(read_bmt(out / "lidar.bmt")[0, 0], expected)


class TestFailureModes:
    def test_missing_mmwave_is_fatal(self, tmp_path, config_path):
        broken = tmp_path / "raw"
        shutil.copytree(FIXTURE, broken)
        (broken / "unit1/mmwave_power/power_1.txt").unlink()
        with pytest.raises(AlignmentError, match="sample 1"):
            convert(broken, tmp_path / "out", config_path)

    def test_index_gap_is_fatal(self, tmp_path, config_path):
        broken = tmp_path / "raw"
        shutil.copytree(FIXTURE, broken)
        csv_path = broken / "scenario33.csv"
        lines = csv_path.read_text().splitlines()
        lines[2] = lines[2].replace("1,", "7,", 1)
        csv_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(AlignmentError, match="index gap"):
            convert(broken, tmp_path / "out", config_path)

    def test_missing_csv(self, tmp_path, config_path):
        with pytest.raises(RawLayoutError, match="scenario33.csv"):
            scan(tmp_path)

    def test_malformed_power_file(self, tmp_path, config_path):
        broken = tmp_path / "raw"
        shutil.copytree(FIXTURE, broken)
        (broken / "unit1/mmwave_power/power_0.txt").write_text("1.0 2.0 3.0\n")
        with pytest.raises(RawLayoutError, match="expected 64"):
            convert(broken, tmp_path / "out", config_path)

    def test_too_few_samples_to_split(self):
        with pytest.raises(ValueError):
            make_split(2)


class TestCli:
    def test_convert_command(self, tmp_path, config_path, recwarn):
        out = tmp_path / "out"
        assert main(["--raw", str(FIXTURE), "--out", str(out), "--config", str(config_path)]) == 0
        assert (out / "manifest.json").exists()

    def test_bad_layout_exit_code(self, tmp_path, config_path):
        assert main(["--raw", str(tmp_path), "--out", str(tmp_path / "o"), "--config", str(config_path)]) == 2


def read_bmt(path):
    """Minimal independent .bmt reader for assertions."""
    raw = Path(path).read_bytes()
    assert raw[:4] == b"BMT1"
    code, rank = raw[4], raw[5]
    dims = struct.unpack_from(f"<{rank}Q", raw, 6)
    dtype = {1: "<f4", 2: "<f8", 3: "<c8"}[code]
    return np.frombuffer(raw, dtype=dtype, offset=6 + 8 * rank).reshape(dims)
