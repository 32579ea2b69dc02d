import io
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from featinject.errors import DecodeError, IngestionError, SplitError
from featinject.imgio import (
    DatasetManifest,
    ImageRGB,
    SplitManifest,
    decode_image,
    load_image,
    scan_dataset,
    split_dataset,
    to_gray,
)

from conftest import rgb, write_png


def encode(array, fmt) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(buf, format=fmt)
    return buf.getvalue()


class TestDecodeImage:
    def test_jpeg_tile(self):
        rng = np.random.default_rng(1)
        img = decode_image(encode(rng.integers(0, 256, size=(64, 64, 3)), "JPEG"))
        assert (img.height, img.width) == (64, 64)
        assert img.pixels.shape == (64, 64, 3)

    def test_one_pixel_white_png_decodes_but_extractors_reject(self):
        img = decode_image(encode(np.full((1, 1, 3), 255), "PNG"))
        assert img.pixels.tolist() == [[[255, 255, 255]]]
        from featinject.featx import lbp_features
        from featinject.errors import ExtractionError

        with pytest.raises(ExtractionError):
            lbp_features(to_gray(img))

    def test_truncated_jpeg_raises(self):
        payload = encode(np.zeros((32, 32, 3)), "JPEG")
        with pytest.raises(DecodeError, match="broken.jpg"):
            decode_image(payload[: len(payload) // 2], name="broken.jpg")

    def test_grayscale_source_expands_to_rgb(self):
        buf = io.BytesIO()
        Image.fromarray(np.full((4, 4), 90, dtype=np.uint8), mode="L").save(buf, "PNG")
        img = decode_image(buf.getvalue())
        assert np.array_equal(img.pixels[..., 0], img.pixels[..., 1])
        assert np.array_equal(img.pixels[..., 0], img.pixels[..., 2])
        assert img.pixels[0, 0, 0] == 90

    def test_missing_file(self, tmp_path):
        with pytest.raises(DecodeError):
            load_image(tmp_path / "absent.png")


class TestToGray:
    @pytest.mark.parametrize(
        "pixel,expected",
        [((255, 255, 255), 255), ((0, 0, 0), 0), ((255, 0, 0), 76)],
    )
    def test_single_pixels(self, pixel, expected):
        img = rgb(np.array(pixel, dtype=np.uint8).reshape(1, 1, 3))
        assert to_gray(img).pixels[0, 0] == expected

    def test_idempotent_on_gray_inputs(self):
        # expand(gray) -> to_gray must return the same level, for all 256
        levels = np.arange(256, dtype=np.uint8)
        img = rgb(np.stack([levels, levels, levels], axis=-1).reshape(16, 16, 3))
        assert np.array_equal(to_gray(img).pixels.ravel(), levels)


class TestScanDataset:
    def test_small_layout(self, tiny_dataset):
        manifest = scan_dataset(tiny_dataset)
        assert manifest.classes == ["alpha", "beta", "gamma"]
        assert len(manifest.records) == 6
        assert manifest.skipped == 1
        labels = manifest.labels()
        assert labels["beta/beta_0.png"] == 1

    def test_missing_root(self, tmp_path):
        with pytest.raises(IngestionError):
            scan_dataset(tmp_path / "nope")

    def test_zero_classes(self, tmp_path):
        with pytest.raises(IngestionError):
            scan_dataset(tmp_path)

    def test_records_sorted_regardless_of_creation_order(self, tmp_path):
        d = tmp_path / "only"
        d.mkdir()
        for name in ("zz.png", "aa.png", "mm.png"):
            write_png(d / name, np.zeros((4, 4, 3)))
        manifest = scan_dataset(tmp_path)
        assert manifest.ids() == ["only/aa.png", "only/mm.png", "only/zz.png"]


def synthetic_manifest(class_sizes: list[int]) -> DatasetManifest:
    records = []
    classes = [f"c{k:02d}" for k in range(len(class_sizes))]
    for k, n in enumerate(class_sizes):
        records.extend((f"c{k:02d}/img{i:05d}.png", k) for i in range(n))
    records.sort()
    return DatasetManifest(root=Path("."), classes=classes, records=records)


class TestSplitDataset:
    def test_eurosat_counts(self):
        # per-class sizes of the 27000-tile benchmark
        manifest = synthetic_manifest([3000, 3000, 3000, 2500, 2500, 2000, 2500, 3000, 2500, 3000])
        split = split_dataset(manifest, 0.8, seed=42)
        assert len(split.train_ids) == 21600
        assert len(split.test_ids) == 5400

    def test_exact_per_class_counts(self):
        manifest = synthetic_manifest([100] * 10)
        split = split_dataset(manifest, 0.8, seed=0)
        assert len(split.train_ids) == 800 and len(split.test_ids) == 200
        for k in range(10):
            prefix = f"c{k:02d}/"
            assert sum(i.startswith(prefix) for i in split.train_ids) == 80
            assert sum(i.startswith(prefix) for i in split.test_ids) == 20

    def test_partition(self):
        manifest = synthetic_manifest([17, 23, 31])
        split = split_dataset(manifest, 0.7, seed=3)
        train, test = set(split.train_ids), set(split.test_ids)
        assert not train & test
        assert train | test == set(manifest.ids())

    def test_same_seed_identical(self):
        manifest = synthetic_manifest([50, 50])
        a = split_dataset(manifest, 0.8, seed=11)
        b = split_dataset(manifest, 0.8, seed=11)
        assert a == b
        assert a.to_json() == b.to_json()

    def test_different_seeds_differ(self):
        manifest = synthetic_manifest([60, 60])
        a = split_dataset(manifest, 0.8, seed=1)
        b = split_dataset(manifest, 0.8, seed=2)
        assert a.train_ids != b.train_ids

    def test_small_class_rejected(self):
        manifest = synthetic_manifest([5, 1])
        with pytest.raises(SplitError, match="c01"):
            split_dataset(manifest, 0.8, seed=0)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.5, 2.0])
    def test_ratio_bounds(self, ratio):
        manifest = synthetic_manifest([10, 10])
        with pytest.raises(SplitError):
            split_dataset(manifest, ratio, seed=0)

    def test_json_round_trip(self):
        manifest = synthetic_manifest([10, 10])
        split = split_dataset(manifest, 0.8, seed=9)
        loaded = SplitManifest.from_json(split.to_json())
        assert loaded == split
        obj = json.loads(split.to_json())
        assert set(obj) == {"seed", "train_ratio", "generator", "train", "test"}
        assert obj["generator"] == "philox4x64"
