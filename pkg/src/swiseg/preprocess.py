"""Intensity normalization and spatial augmentation transforms.

All transforms are pure: randomness comes from an explicitly passed
``numpy.random.Generator`` and image/label pairs are always transformed
identically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .volume import BinaryMask, Dims, Volume, VolumeError, check_same_dims

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentConfig:
    p_flip: float = 0.1
    p_rot: float = 0.1
    crop_size: Dims = (224, 224, 224)
    p_tumor: float = 0.6
    p_bg: float = 0.4

    def __post_init__(self):
        for name in ("p_flip", "p_rot", "p_tumor", "p_bg"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if abs(self.p_tumor + self.p_bg - 1.0) > 1e-9:
            raise ValueError("p_tumor + p_bg must equal 1")
        if any(c < 1 for c in self.crop_size):
            raise ValueError(f"crop_size components must be >= 1: {self.crop_size}")


def percentile_normalize(vol: Volume, lo_pct: float = 0.05, hi_pct: float = 99.95) -> Volume:
    """Clip to the [lo_pct, hi_pct] percentiles and rescale to [0, 1].

    A constant volume (degenerate percentile range) maps to all zeros.
    """
    if not (0.0 <= lo_pct < hi_pct <= 100.0):
        raise ValueError(f"need 0 <= lo_pct < hi_pct <= 100, got {lo_pct}, {hi_pct}")
    lo, hi = np.percentile(vol.values, [lo_pct, hi_pct])
    if hi <= lo:
        return vol.with_values(np.zeros(vol.dims, dtype=np.float32))
    out = np.clip(vol.values, lo, hi)
    out = (out - lo) / (hi - lo)
    return vol.with_values(out)


def biased_random_crop(
    vol: Volume,
    label: BinaryMask,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> Tuple[Volume, BinaryMask]:
    """Crop a subvolume whose center is biased toward tumor voxels.

    With probability ``p_tumor`` the center is a uniformly chosen label
    voxel, otherwise a uniformly chosen background voxel; the center is
    clamped so the crop stays in-bounds.
    """
    check_same_dims(vol, label, "image/label")
    dims = np.array(vol.dims)
    size = np.array(cfg.crop_size)
    if np.any(size > dims):
        raise VolumeError(f"crop {cfg.crop_size} larger than volume {vol.dims}")

    want_tumor = rng.random() < cfg.p_tumor
    pool = label.values if want_tumor else ~label.values
    if want_tumor and not pool.any():
        log.warning("tumor-centered crop requested but label is empty; using background")
        pool = ~label.values
    if not pool.any():
        pool = np.ones(vol.dims, dtype=bool)
    coords = np.argwhere(pool)
    center = coords[rng.integers(len(coords))]

    origin = np.clip(center - size // 2, 0, dims - size)
    x, y, z = origin
    cx, cy, cz = size
    img = vol.values[x : x + cx, y : y + cy, z : z + cz]
    lab = label.values[x : x + cx, y : y + cy, z : z + cz]
    return vol.with_values(img.copy()), BinaryMask(values=lab.copy())


_PLANES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}  # rotation plane per axis


def random_flip_rotate(
    vol: Volume,
    label: BinaryMask,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> Tuple[Volume, BinaryMask]:
    """Independently flip and quarter-turn each axis with the configured
    probabilities, applying identical transforms to image and label.

    Rotating about an axis whose perpendicular plane is non-square would
    change the dims, so such rotations are restricted to 180 degrees.
    """
    check_same_dims(vol, label, "image/label")
    img = vol.values
    lab = label.values

    for axis in range(3):
        if rng.random() < cfg.p_flip:
            img = np.flip(img, axis=axis)
            lab = np.flip(lab, axis=axis)
    for axis in range(3):
        if rng.random() < cfg.p_rot:
            k = int(rng.integers(1, 4))
            plane = _PLANES[axis]
            if img.shape[plane[0]] != img.shape[plane[1]] and k % 2 == 1:
                log.warning(
                    "non-square plane for axis %d; restricting rotation to 180 degrees",
                    axis,
                )
                k = 2
            img = np.rot90(img, k=k, axes=plane)
            lab = np.rot90(lab, k=k, axes=plane)
    return vol.with_values(img.copy()), BinaryMask(values=lab.copy())


def center_crop(vol: Volume, label: BinaryMask | None, size: Dims):
    """Deterministic center crop used by the crop-evaluation protocol."""
    dims = np.array(vol.dims)
    sz = np.minimum(np.array(size), dims)
    origin = (dims - sz) // 2
    x, y, z = origin
    cx, cy, cz = sz
    img = vol.values[x : x + cx, y : y + cy, z : z + cz].copy()
    out_vol = vol.with_values(img)
    out_lab = None
    if label is not None:
        out_lab = BinaryMask(values=label.values[x : x + cx, y : y + cy, z : z + cz].copy())
    return out_vol, out_lab
