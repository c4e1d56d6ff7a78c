"""Segmentation quality metrics: Dice overlap and normalized surface distance."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .volume import BinaryMask, Spacing, check_same_dims

DEFAULT_NSD_TOLERANCE_MM = 2.0


def dice(pred: BinaryMask, label: BinaryMask) -> float:
    """2|P∩L| / (|P| + |L|); 1.0 when both masks are empty."""
    check_same_dims(pred, label, "pred/label")
    p = pred.values
    l = label.values
    denom = int(p.sum()) + int(l.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & l).sum()) / denom


def boundary_voxels(mask: BinaryMask) -> np.ndarray:
    """Coordinates of in-mask voxels with a face neighbor outside the mask.

    Voxels on the volume border count as boundary (outside the grid is
    treated as background).
    """
    m = mask.values
    interior = ndimage.binary_erosion(m, structure=ndimage.generate_binary_structure(3, 1), border_value=0)
    return np.argwhere(m & ~interior)


def nsd(
    pred: BinaryMask,
    label: BinaryMask,
    tolerance_mm: float = DEFAULT_NSD_TOLERANCE_MM,
    spacing: Spacing = (1.0, 1.0, 1.0),
) -> float:
    """Symmetric fraction of boundary voxels within ``tolerance_mm`` of the
    other mask's boundary (Euclidean, spacing-aware).

    Both masks empty -> 1.0; exactly one empty -> 0.0.
    """
    check_same_dims(pred, label, "pred/label")
    if tolerance_mm <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance_mm}")
    p_empty = not pred.values.any()
    l_empty = not label.values.any()
    if p_empty and l_empty:
        return 1.0
    if p_empty or l_empty:
        return 0.0

    sp = np.asarray(spacing, dtype=float)
    bp = boundary_voxels(pred) * sp
    bl = boundary_voxels(label) * sp
    d_p = cKDTree(bl).query(bp)[0]
    d_l = cKDTree(bp).query(bl)[0]
    frac_p = float(np.mean(d_p <= tolerance_mm))
    frac_l = float(np.mean(d_l <= tolerance_mm))
    return 0.5 * (frac_p + frac_l)
