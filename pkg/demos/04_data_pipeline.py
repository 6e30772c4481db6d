# %%
# IDX files, splits and augmentations
# ===================================
#
# The dataset container is the classic big-endian IDX format: a magic
# number, dimension sizes, then unsigned bytes. Images decode to float64
# in [0, 1] (pixel / 255), bit-exactly.

import struct
import tempfile
from pathlib import Path

import numpy as np

from dnll import (
    AugmentConfig,
    augment_strong,
    augment_weak,
    parse_idx,
    split_dataset,
    synthetic_digits,
    write_idx,
)

workdir = Path(tempfile.mkdtemp())

# A two-image file built byte by byte:
pixels = np.array([[[0, 128], [255, 64]]], dtype=np.uint8)
raw = struct.pack(">IIII", 0x00000803, 1, 2, 2) + pixels.tobytes()
path = workdir / "tiny.idx"
path.write_bytes(raw)
print(parse_idx(path))

# %%
# write_idx is the inverse; the synthetic digit generator plus these two
# functions make a fully offline stand-in for the usual four-file layout.

digits = synthetic_digits(600, seed=42)
write_idx(workdir / "train-images-idx3-ubyte", digits.images)
write_idx(workdir / "train-labels-idx1-ubyte", digits.labels)
round_tripped = parse_idx(workdir / "train-images-idx3-ubyte")
print("round trip shape:", round_tripped.shape)

# %%
# Splits are class-balanced for the labeled and validation parts and
# deterministic in the seed; the remainder becomes the unlabeled pool.

labeled, unlabeled, validation = split_dataset(digits, n_labeled=20, n_val_per_class=5, seed=0)
print("labeled per class:   ", np.bincount(labeled.labels, minlength=10))
print("validation per class:", np.bincount(validation.labels, minlength=10))
print("unlabeled size:      ", len(unlabeled))

# %%
# Weak augmentation is identity (or pad-crop-flip); strong adds Gaussian
# pixel noise on top of the same geometric transform. On a mid-gray image
# the mean absolute change is sigma * sqrt(2/pi):

cfg = AugmentConfig(weak="identity", strong="noise", noise_sigma=0.1)
img = np.full((200, 200), 0.5)
rng = np.random.default_rng(7)
out = augment_strong(img, rng, cfg)
print(f"mean |change| = {np.abs(out - img).mean():.4f}  (expected {0.1 * np.sqrt(2/np.pi):.4f})")

weak_out = augment_weak(img, rng, cfg)
print("weak identity is exact:", bool((weak_out == img).all()))
