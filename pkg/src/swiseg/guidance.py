"""Click representation, guidance-channel encoding, and error-driven sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .volume import BinaryMask, Dims, Spacing, Volume, VolumeError, check_same_dims

TUMOR = "tumor"
BACKGROUND = "background"
CLASSES = (TUMOR, BACKGROUND)

# Offsets of a Euclidean ball of radius 1: the voxel plus its 6 face neighbors.
BALL_OFFSETS = np.array(
    [(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
)


@dataclass(frozen=True)
class Click:
    pos: Tuple[int, int, int]
    cls: str
    iteration: int = 0

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"click class must be one of {CLASSES}, got {self.cls!r}")
        if self.iteration < 0:
            raise ValueError("click iteration must be non-negative")
        object.__setattr__(self, "pos", tuple(int(p) for p in self.pos))

    def to_json(self) -> dict:
        return {"pos": list(self.pos), "cls": self.cls, "iteration": self.iteration}

    @classmethod
    def from_json(cls, d: dict) -> "Click":
        return cls(pos=tuple(d["pos"]), cls=d["cls"], iteration=int(d.get("iteration", 0)))


@dataclass
class ClickSet:
    """Ordered clicks with non-decreasing iteration numbers."""

    clicks: List[Click] = field(default_factory=list)

    def add(self, click: Click) -> None:
        if self.clicks and click.iteration < self.clicks[-1].iteration:
            raise ValueError(
                f"iteration {click.iteration} < last iteration {self.clicks[-1].iteration}"
            )
        self.clicks.append(click)

    def by_class(self, cls: str) -> List[Click]:
        return [c for c in self.clicks if c.cls == cls]

    def __len__(self) -> int:
        return len(self.clicks)

    def __iter__(self):
        return iter(self.clicks)

    def to_json(self) -> list:
        return [c.to_json() for c in self.clicks]

    @classmethod
    def from_json(cls, items: Sequence[dict]) -> "ClickSet":
        out = cls()
        for item in items:
            out.add(Click.from_json(item))
        return out


@dataclass(frozen=True)
class GuidanceChannels:
    tumor: Volume
    background: Volume


def check_in_bounds(pos, dims: Dims) -> None:
    if any(not 0 <= p < d for p, d in zip(pos, dims)):
        raise VolumeError(f"position {tuple(pos)} out of bounds for dims {dims}")


def encode_clicks(clicks: ClickSet, dims: Dims, spacing: Spacing = (1.0, 1.0, 1.0)) -> GuidanceChannels:
    """Render clicks as binary radius-1 spheres, one channel per class.

    Each click sets the clicked voxel and its in-bounds face neighbors to
    1.0; overlapping spheres saturate.  Empty click sets produce all-zero
    channels.
    """
    channels = {cls: np.zeros(dims, dtype=np.float32) for cls in CLASSES}
    for click in clicks:
        check_in_bounds(click.pos, dims)
        pts = BALL_OFFSETS + np.array(click.pos)
        keep = np.all((pts >= 0) & (pts < np.array(dims)), axis=1)
        pts = pts[keep]
        channels[click.cls][pts[:, 0], pts[:, 1], pts[:, 2]] = 1.0
    return GuidanceChannels(
        tumor=Volume(values=channels[TUMOR], spacing=spacing),
        background=Volume(values=channels[BACKGROUND], spacing=spacing),
    )


@dataclass(frozen=True)
class ErrorMasks:
    under: BinaryMask  # false negatives: in label, missed by prediction
    over: BinaryMask  # false positives: predicted, not in label

    @property
    def empty(self) -> bool:
        return not (self.under.values.any() or self.over.values.any())


def error_masks(pred: BinaryMask, label: BinaryMask) -> ErrorMasks:
    check_same_dims(pred, label, "pred/label")
    return ErrorMasks(
        under=BinaryMask(values=label.values & ~pred.values),
        over=BinaryMask(values=pred.values & ~label.values),
    )


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance to the nearest background voxel, with the
    outside of the grid treated as background."""
    padded = np.pad(mask.astype(bool), 1, constant_values=False)
    edt = ndimage.distance_transform_edt(padded)
    return edt[1:-1, 1:-1, 1:-1]


def sample_click(
    mask: BinaryMask,
    cls: str,
    iteration: int,
    rng: np.random.Generator,
) -> Optional[Click]:
    """Sample an in-mask voxel with probability proportional to
    exp(distance transform), biasing clicks toward region interiors.

    Returns None for an empty mask (nothing to correct for this class).
    """
    if not mask.values.any():
        return None
    edt = distance_transform(mask.values)
    coords = np.argwhere(mask.values)
    d = edt[coords[:, 0], coords[:, 1], coords[:, 2]]
    w = np.exp(d - d.max())  # shift-invariant after normalization
    p = w / w.sum()
    idx = rng.choice(len(coords), p=p)
    return Click(pos=tuple(coords[idx]), cls=cls, iteration=iteration)
