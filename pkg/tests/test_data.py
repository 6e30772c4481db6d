"""IDX parsing against hand-built fixtures, splits, augmentations."""

import gzip
import math
import struct

import numpy as np
import pytest

from dnll.data import (
    AugmentConfig,
    Dataset,
    augment_strong,
    augment_weak,
    parse_idx,
    read_split_manifest,
    split_dataset,
    split_indices,
    write_idx,
    write_split_manifest,
)
from dnll.errors import ConfigError, DataError, FormatError, LengthError
from dnll.synthetic import synthetic_digits


def two_image_fixture_bytes() -> tuple[bytes, np.ndarray]:
    """A 2-image, 2x3 IDX file with every byte chosen by hand."""
    pixels = np.array(
        [[[0, 1, 2], [3, 4, 5]], [[250, 251, 252], [253, 254, 255]]], dtype=np.uint8
    )
    header = struct.pack(">IIII", 0x00000803, 2, 2, 3)
    return header + pixels.tobytes(), pixels


class TestParseIdx:
    def test_two_image_fixture_decodes_exactly(self, tmp_path):
        raw, pixels = two_image_fixture_bytes()
        path = tmp_path / "imgs.idx"
        path.write_bytes(raw)
        images = parse_idx(path)
        assert images.shape == (2, 2, 3)
        assert np.array_equal(images, pixels.astype(np.float64) / 255.0)

    def test_label_fixture(self, tmp_path):
        path = tmp_path / "labels.idx"
        path.write_bytes(struct.pack(">II", 0x00000801, 4) + bytes([7, 0, 9, 3]))
        labels = parse_idx(path)
        assert labels.tolist() == [7, 0, 9, 3]
        assert labels.dtype == np.int64

    def test_wrong_magic_names_expected_and_found(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000802, 2, 2, 3) + bytes(12))
        with pytest.raises(FormatError, match="0x00000802"):
            parse_idx(path)
        with pytest.raises(FormatError, match="0x00000803"):
            parse_idx(path)

    def test_truncated_image_payload(self, tmp_path):
        raw, _ = two_image_fixture_bytes()
        path = tmp_path / "short.idx"
        path.write_bytes(raw[:-5])
        with pytest.raises(LengthError):
            parse_idx(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "stub.idx"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(LengthError):
            parse_idx(path)

    def test_gzip_transparent(self, tmp_path):
        raw, pixels = two_image_fixture_bytes()
        path = tmp_path / "imgs.idx.gz"
        path.write_bytes(gzip.compress(raw))
        assert np.array_equal(parse_idx(path), pixels.astype(np.float64) / 255.0)

    def test_write_parse_roundtrip(self, tmp_path, rng):
        images = rng.random((5, 4, 4))
        quantised = np.clip(np.rint(images * 255), 0, 255) / 255.0
        path = tmp_path / "round.idx"
        write_idx(path, images)
        assert np.array_equal(parse_idx(path), quantised)
        labels = rng.integers(0, 10, size=5)
        write_idx(tmp_path / "l.idx", labels)
        assert np.array_equal(parse_idx(tmp_path / "l.idx"), labels)


def small_dataset(n=400, seed=5) -> Dataset:
    return synthetic_digits(n, seed=seed)


class TestSplit:
    def test_balanced_partition(self):
        ds = small_dataset()
        labeled, unlabeled, validation = split_dataset(ds, 20, 5, seed=3)
        assert len(labeled) == 20 and len(validation) == 50
        assert len(labeled) + len(unlabeled) + len(validation) == len(ds)
        assert np.bincount(labeled.labels, minlength=10).tolist() == [2] * 10
        assert np.bincount(validation.labels, minlength=10).tolist() == [5] * 10

    def test_disjoint_and_exhaustive(self):
        ds = small_dataset()
        split = split_indices(ds, 20, 5, seed=3)
        union = np.concatenate([split.labeled, split.unlabeled, split.validation])
        assert len(np.unique(union)) == len(union) == len(ds)

    def test_seed_deterministic(self):
        ds = small_dataset()
        a = split_indices(ds, 20, 5, seed=9)
        b = split_indices(ds, 20, 5, seed=9)
        c = split_indices(ds, 20, 5, seed=10)
        assert np.array_equal(a.labeled, b.labeled)
        assert np.array_equal(a.unlabeled, b.unlabeled)
        assert not np.array_equal(a.labeled, c.labeled)

    def test_unbalanced_count_rejected(self):
        ds = small_dataset()
        with pytest.raises(DataError, match="divisible"):
            split_indices(ds, 7, 5, seed=0)

    def test_insufficient_class_named(self):
        images = np.zeros((30, 4, 4))
        labels = np.array([0] * 25 + [1] * 5)
        ds = Dataset(images, labels, "labeled")
        with pytest.raises(DataError, match="class 1"):
            split_indices(ds, 4, 10, seed=0)

    def test_unlabeled_hides_labels(self):
        ds = small_dataset()
        _, unlabeled, _ = split_dataset(ds, 20, 5, seed=3)
        with pytest.raises(DataError):
            _ = unlabeled.labels
        assert unlabeled.hidden_labels().shape == (len(unlabeled),)

    def test_manifest_roundtrip(self, tmp_path):
        ds = small_dataset()
        split = split_indices(ds, 20, 5, seed=3)
        path = tmp_path / "split.txt"
        write_split_manifest(path, split, seed=3)
        loaded = read_split_manifest(path)
        assert np.array_equal(loaded.labeled, split.labeled)
        assert np.array_equal(loaded.unlabeled, split.unlabeled)
        assert np.array_equal(loaded.validation, split.validation)


class TestAugment:
    def test_identity_weak_bitwise(self, rng):
        cfg = AugmentConfig(weak="identity")
        img = rng.random((8, 8))
        out = augment_weak(img, rng, cfg)
        assert np.array_equal(out, img)
        assert out is not img

    def test_sigma_zero_strong_equals_weak(self, rng):
        cfg = AugmentConfig(weak="crop_flip", strong="crop_flip_noise", noise_sigma=0.0)
        img = rng.random((8, 8))
        weak = augment_weak(img, np.random.default_rng(77), cfg)
        strong = augment_strong(img, np.random.default_rng(77), cfg)
        assert np.array_equal(weak, strong)

    def test_noise_mean_absolute_change(self):
        # sigma = 0.1 on a mid-gray image: E|N(0, s)| = s * sqrt(2/pi),
        # measured over 1e5 pixels where clamping cannot bind.
        cfg = AugmentConfig(weak="identity", strong="noise", noise_sigma=0.1)
        img = np.full((320, 320), 0.5)
        out = augment_strong(img, np.random.default_rng(5), cfg)
        measured = np.mean(np.abs(out - img))
        expected = 0.1 * math.sqrt(2.0 / math.pi)
        assert measured == pytest.approx(expected, rel=0.05)

    def test_shapes_and_range_preserved(self, rng):
        cfg = AugmentConfig(weak="crop_flip", strong="crop_flip_noise", noise_sigma=0.3)
        img = rng.random((9, 7))
        for fn in (augment_weak, augment_strong):
            out = fn(img, rng, cfg)
            assert out.shape == img.shape
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_crop_actually_moves_content(self):
        cfg = AugmentConfig(weak="crop_flip", strong="crop_flip_noise", crop_pad=2, flip_p=0.0)
        img = np.zeros((8, 8))
        img[4, 4] = 1.0
        positions = set()
        for i in range(50):
            out = augment_weak(img, np.random.default_rng(i), cfg)
            hot = np.argwhere(out == 1.0)
            if hot.size:
                positions.add(tuple(hot[0]))
        assert len(positions) > 5

    def test_bad_modes_rejected(self):
        with pytest.raises(ConfigError):
            AugmentConfig(weak="colorjitter")
        with pytest.raises(ConfigError):
            AugmentConfig(noise_sigma=-0.1)


class TestDataset:
    def test_empty_rejected(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((0, 2, 2)), np.zeros(0), "labeled")

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2, 2)), np.zeros(2), "labeled")

    def test_flat_images(self):
        ds = Dataset(np.ones((3, 4, 5)), np.zeros(3), "test")
        assert ds.flat_images().shape == (3, 20)
