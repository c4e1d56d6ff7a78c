"""Sliding-window planning and importance-weighted blending.

Large volumes are processed as overlapping fixed-size windows; per-window
probability maps are blended back into a full-volume map with a constant
or Gaussian importance weighting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .volume import Dims, Volume, VolumeError

log = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class WindowConfig:
    window_dims: Dims = (128, 128, 128)
    overlap: float = 0.25
    weighting: str = "gaussian"
    sigma_scale: float = 0.125

    def __post_init__(self):
        if any(w < 1 for w in self.window_dims):
            raise ValueError(f"window dims must be >= 1: {self.window_dims}")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must be in [0, 1): {self.overlap}")
        if self.weighting not in ("constant", "gaussian"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.sigma_scale <= 0:
            raise ValueError("sigma_scale must be positive")


@dataclass(frozen=True)
class WindowGrid:
    """Deterministic plan of window origins fully covering a volume."""

    volume_dims: Dims
    window_dims: Dims
    origins: Tuple[Tuple[int, int, int], ...]

    def __len__(self) -> int:
        return len(self.origins)

    def to_json(self) -> dict:
        return {
            "volume_dims": list(self.volume_dims),
            "window_dims": list(self.window_dims),
            "origins": [list(o) for o in self.origins],
        }


def _axis_origins(length: int, window: int, overlap: float) -> List[int]:
    stride = max(1, int(window * (1.0 - overlap)))
    origins = []
    o = 0
    while True:
        if o + window >= length:
            last = length - window
            if not origins or origins[-1] != last:
                origins.append(last)
            break
        origins.append(o)
        o += stride
    return origins


def plan_windows(volume_dims: Dims, cfg: WindowConfig) -> WindowGrid:
    """Plan origins per axis with stride floor(w*(1-overlap)), clamping the
    final window to the volume end.  Windows larger than the volume are
    shrunk to fit.
    """
    if any(d < 1 for d in volume_dims):
        raise VolumeError(f"volume dims must be >= 1: {volume_dims}")
    eff = []
    for w, d in zip(cfg.window_dims, volume_dims):
        if w > d:
            log.info("window extent %d exceeds axis length %d; shrinking", w, d)
            w = d
        eff.append(w)
    per_axis = [_axis_origins(d, w, cfg.overlap) for d, w in zip(volume_dims, eff)]
    origins = tuple(
        (x, y, z)
        for z in per_axis[2]
        for y in per_axis[1]
        for x in per_axis[0]
    )
    return WindowGrid(volume_dims=tuple(volume_dims), window_dims=tuple(eff), origins=origins)


def importance_map(cfg: WindowConfig, window_dims: Dims | None = None) -> np.ndarray:
    """Per-voxel window weights, max-normalized to 1 and floored at 1e-6.

    Gaussian weighting is separable with per-axis sigma = sigma_scale * w,
    centered at the window midpoint.
    """
    dims = tuple(window_dims if window_dims is not None else cfg.window_dims)
    if cfg.weighting == "constant":
        return np.ones(dims, dtype=np.float64)
    axes = []
    for w in dims:
        center = (w - 1) / 2.0
        sigma = cfg.sigma_scale * w
        x = np.arange(w, dtype=np.float64)
        axes.append(np.exp(-((x - center) ** 2) / (2.0 * sigma * sigma)))
    m = axes[0][:, None, None] * axes[1][None, :, None] * axes[2][None, None, :]
    m /= m.max()
    return np.maximum(m, WEIGHT_FLOOR)


def blend(
    grid: WindowGrid,
    weights: np.ndarray,
    predictions: Sequence[np.ndarray],
) -> Volume:
    """Importance-weighted average of per-window predictions.

    Each output voxel is a convex combination of the predictions of the
    windows containing it.
    """
    if len(predictions) != len(grid.origins):
        raise VolumeError(
            f"{len(predictions)} predictions for {len(grid.origins)} windows"
        )
    if tuple(weights.shape) != grid.window_dims:
        raise VolumeError(
            f"weight map shape {weights.shape} != window dims {grid.window_dims}"
        )
    wx, wy, wz = grid.window_dims
    num = np.zeros(grid.volume_dims, dtype=np.float64)
    den = np.zeros(grid.volume_dims, dtype=np.float64)
    for origin, pred in zip(grid.origins, predictions):
        pred = np.asarray(pred, dtype=np.float64)
        if tuple(pred.shape) != grid.window_dims:
            raise VolumeError(
                f"prediction shape {pred.shape} != window dims {grid.window_dims}"
            )
        x, y, z = origin
        num[x : x + wx, y : y + wy, z : z + wz] += weights * pred
        den[x : x + wx, y : y + wy, z : z + wz] += weights
    return Volume(values=(num / den).astype(np.float32))


def extract_window(values: np.ndarray, origin, window_dims) -> np.ndarray:
    x, y, z = origin
    wx, wy, wz = window_dims
    return values[x : x + wx, y : y + wy, z : z + wz]


def sw_predict(channels: Sequence[Volume], segmenter, cfg: WindowConfig) -> Volume:
    """Run a segmenter over the planned windows and blend the per-window
    probability maps into a full-volume probability map.
    """
    from .segmenters import PatchRequest, SegmenterError

    if not channels:
        raise VolumeError("need at least one input channel")
    dims = channels[0].dims
    for c in channels[1:]:
        if c.dims != dims:
            raise VolumeError(f"channel dims differ: {c.dims} vs {dims}")

    grid = plan_windows(dims, cfg)
    weights = importance_map(cfg, grid.window_dims)

    begin = getattr(segmenter, "begin", None)
    if begin is not None:
        begin(channels)

    preds = []
    for i, origin in enumerate(grid.origins):
        stack = np.stack(
            [extract_window(c.values, origin, grid.window_dims) for c in channels]
        )
        req = PatchRequest(
            id=f"w{i:04d}",
            dims=grid.window_dims,
            data=stack.astype(np.float32),
            origin=origin,
        )
        try:
            resp = segmenter.predict(req)
        except Exception as e:
            raise SegmenterError(f"segmenter failed on window {i} at origin {origin}: {e}") from e
        preds.append(resp.data)
    return blend(grid, weights, preds)


class SlidingWindowPredictor(BaseEstimator):
    """Estimator-style wrapper around :func:`sw_predict`.

    Stateless; ``predict`` maps a list of input channel volumes to a
    full-volume probability map.
    """

    def __init__(self, segmenter=None, window_dims=(128, 128, 128), overlap=0.25,
                 weighting="gaussian", sigma_scale=0.125):
        self.segmenter = segmenter
        self.window_dims = window_dims
        self.overlap = overlap
        self.weighting = weighting
        self.sigma_scale = sigma_scale

    def _config(self) -> WindowConfig:
        return WindowConfig(
            window_dims=tuple(self.window_dims),
            overlap=self.overlap,
            weighting=self.weighting,
            sigma_scale=self.sigma_scale,
        )

    def fit(self, X=None, y=None):
        return self

    def predict(self, channels: Sequence[Volume]) -> Volume:
        if self.segmenter is None:
            raise ValueError("no segmenter configured")
        return sw_predict(channels, self.segmenter, self._config())
