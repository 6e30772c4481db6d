"""Deterministic synthetic digit images for offline experiments.

Ten glyph skeletons (polylines and elliptic arcs on a unit box) are
distorted per sample by a random affine map, rendered at the requested
resolution with varying stroke thickness, and corrupted with pixel noise.
The result is a 10-class image problem with genuine within-class variation
that trains like a small handwritten-digit set, built from nothing but a
seed, useful wherever the real IDX files are not on disk.

Sample ``i`` depends only on ``(seed, i)``, so datasets of different sizes
share a common prefix.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import Dataset


def _arc(cx, cy, rx, ry, deg0, deg1, n=40):
    t = np.radians(np.linspace(deg0, deg1, n))
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def _line(x0, y0, x1, y1, n=30):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return np.stack([x0, y0]) * (1 - t) + np.stack([x1, y1]) * t


# Unit-box skeletons, y pointing down. Angle 0 is +x, 90 deg is +y (down).
_GLYPHS = {
    0: [_arc(0.50, 0.50, 0.26, 0.38, 0, 360, 90)],
    1: [_line(0.52, 0.10, 0.52, 0.90), _line(0.36, 0.26, 0.52, 0.10)],
    2: [
        _arc(0.50, 0.32, 0.25, 0.20, 150, 360),
        _line(0.75, 0.32, 0.26, 0.90),
        _line(0.26, 0.90, 0.78, 0.90),
    ],
    3: [
        _arc(0.47, 0.30, 0.24, 0.19, 160, 420),
        _arc(0.47, 0.68, 0.26, 0.21, -60, 200),
    ],
    4: [
        _line(0.66, 0.10, 0.24, 0.62),
        _line(0.24, 0.62, 0.82, 0.62),
        _line(0.68, 0.34, 0.68, 0.90),
    ],
    5: [
        _line(0.76, 0.12, 0.32, 0.12),
        _line(0.32, 0.12, 0.30, 0.48),
        _arc(0.48, 0.66, 0.26, 0.22, -75, 165),
    ],
    6: [
        _arc(0.58, 0.28, 0.28, 0.30, 180, 262),
        _arc(0.47, 0.66, 0.23, 0.22, 0, 360, 70),
    ],
    7: [_line(0.24, 0.12, 0.78, 0.12), _line(0.78, 0.12, 0.42, 0.90)],
    8: [
        _arc(0.50, 0.30, 0.20, 0.17, 0, 360, 70),
        _arc(0.50, 0.68, 0.24, 0.20, 0, 360, 70),
    ],
    9: [
        _arc(0.50, 0.30, 0.22, 0.19, 0, 360, 70),
        _line(0.72, 0.32, 0.62, 0.90),
    ],
}


def _render(points: np.ndarray, size: int, thickness: float) -> np.ndarray:
    canvas = np.zeros((size, size))
    scale = size - 8
    px = np.clip(np.rint(points[:, 0] * scale + 4).astype(int), 0, size - 1)
    py = np.clip(np.rint(points[:, 1] * scale + 4).astype(int), 0, size - 1)
    np.add.at(canvas, (py, px), 1.0)
    canvas = gaussian_filter(np.minimum(canvas, 1.0), sigma=thickness)
    peak = canvas.max()
    if peak > 0:
        canvas /= peak
    return canvas


def _distort(points: np.ndarray, rng, distortion: float) -> np.ndarray:
    theta = rng.uniform(-0.30, 0.30) * distortion
    shear = rng.uniform(-0.25, 0.25) * distortion
    sx = 1.0 + rng.uniform(-0.22, 0.12) * distortion
    sy = 1.0 + rng.uniform(-0.22, 0.12) * distortion
    tx, ty = rng.uniform(-0.09, 0.09, size=2) * distortion
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shr = np.array([[1.0, shear], [0.0, 1.0]])
    mat = rot @ shr @ np.diag([sx, sy])
    center = np.array([0.5, 0.5])
    return (points - center) @ mat.T + center + np.array([tx, ty])


def synthetic_digit(
    label: int,
    rng: np.random.Generator,
    size: int = 28,
    noise: float = 0.1,
    distortion: float = 1.0,
) -> np.ndarray:
    """One distorted rendering of the glyph for ``label``."""
    points = np.concatenate(_GLYPHS[label])
    points = _distort(points, rng, distortion)
    thickness = rng.uniform(0.55, 1.05)
    img = _render(points, size, thickness)
    img = img * rng.uniform(0.65, 1.0)
    img = img + rng.normal(0.0, noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def synthetic_digits(
    n: int,
    seed: int,
    size: int = 28,
    noise: float = 0.1,
    distortion: float = 1.0,
    role: str = "labeled",
) -> Dataset:
    """A dataset of ``n`` synthetic digits with labels cycling 0..9."""
    images = np.empty((n, size, size))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), i))))
        label = int(rng.integers(0, 10))
        labels[i] = label
        images[i] = synthetic_digit(label, rng, size=size, noise=noise, distortion=distortion)
    return Dataset(images, labels, role)
