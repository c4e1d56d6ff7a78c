"""The interaction loop: click strategies, stopping criteria, and trajectories.

An interaction starts with a clickless prediction (iteration 0), then the
chosen strategy places clicks and re-predicts until a stopping criterion
fires or no errors remain.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import metrics
from .guidance import (
    BACKGROUND,
    TUMOR,
    Click,
    ClickSet,
    encode_clicks,
    error_masks,
    sample_click,
)
from .segmenters import SegmenterError
from .volume import BinaryMask, Volume, VolumeError, check_same_dims
from .windowing import WindowConfig, WindowGrid, extract_window, plan_windows, sw_predict

BINARIZE_THRESHOLD = 0.5

NON_CORRECTIVE = "non_corrective"
CORRECTIVE = "corrective"

GLOBAL = "global"
LOCAL_PATCHWISE = "local_patchwise"


@dataclass(frozen=True)
class StoppingCriterion:
    max_iter: Optional[int] = None
    stop_probability: Optional[float] = None
    dice_threshold: Optional[float] = None

    def __post_init__(self):
        if self.max_iter is None and self.stop_probability is None and self.dice_threshold is None:
            raise ValueError("at least one stopping criterion field must be set")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.stop_probability is not None and not 0.0 <= self.stop_probability <= 1.0:
            raise ValueError("stop_probability must be in [0, 1]")
        if self.dice_threshold is not None and not 0.0 < self.dice_threshold <= 1.0:
            raise ValueError("dice_threshold must be in (0, 1]")


@dataclass(frozen=True)
class CorrectionScope:
    mode: str = GLOBAL
    patch_config: Optional[WindowConfig] = None

    def __post_init__(self):
        if self.mode not in (GLOBAL, LOCAL_PATCHWISE):
            raise ValueError(f"unknown correction mode {self.mode!r}")
        if self.mode == LOCAL_PATCHWISE and self.patch_config is None:
            raise ValueError("local patch-wise mode requires a patch WindowConfig")


@dataclass
class InteractionState:
    iteration: int = 0
    clicks: ClickSet = field(default_factory=ClickSet)
    prediction: Optional[Volume] = None
    dice_history: List[float] = field(default_factory=list)
    stopped_reason: Optional[str] = None


@dataclass
class IterationRecord:
    iteration: int
    clicks_placed: List[Click]
    dice: float
    nsd: float
    seconds: float

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "clicks_placed": [c.to_json() for c in self.clicks_placed],
            "dice": self.dice,
            "nsd": self.nsd,
            "seconds": self.seconds,
        }


@dataclass
class Trajectory:
    records: List[IterationRecord] = field(default_factory=list)
    state: InteractionState = field(default_factory=InteractionState)

    @property
    def dice_history(self) -> List[float]:
        return self.state.dice_history

    def to_json(self) -> dict:
        return {
            "records": [r.to_json() for r in self.records],
            "dice_history": self.state.dice_history,
            "iterations": self.state.iteration,
            "clicks_total": len(self.state.clicks),
            "stopped_reason": self.state.stopped_reason,
        }


REASON_MAX_ITER = "max_iter"
REASON_PROBABILITY = "probability"
REASON_DICE = "dice"
REASON_NO_ERROR = "no_error"


def should_stop(
    state: InteractionState,
    crit: StoppingCriterion,
    rng: np.random.Generator,
) -> Tuple[bool, Optional[str]]:
    """OR-composed stopping rules, evaluated max_iter, dice, probability.

    The fixed order makes the reported reason deterministic when several
    criteria would fire at once.
    """
    if crit.max_iter is not None and state.iteration >= crit.max_iter:
        return True, REASON_MAX_ITER
    if (
        crit.dice_threshold is not None
        and state.dice_history
        and state.dice_history[-1] >= crit.dice_threshold
    ):
        return True, REASON_DICE
    if crit.stop_probability is not None and rng.random() < crit.stop_probability:
        return True, REASON_PROBABILITY
    return False, None


def non_corrective_clicks(
    label: BinaryMask, n: int, rng: np.random.Generator
) -> ClickSet:
    """Sample n tumor clicks from the ground-truth mask, all at iteration 0."""
    if not label.values.any():
        raise VolumeError("non-corrective clicks require a non-empty label")
    clicks = ClickSet()
    for _ in range(n):
        clicks.add(sample_click(label, TUMOR, 0, rng))
    return clicks


def binarize(prediction: Volume) -> BinaryMask:
    return BinaryMask(values=prediction.values >= BINARIZE_THRESHOLD)


def _predict(volume: Volume, clicks: ClickSet, segmenter, cfg: WindowConfig) -> Volume:
    channels = encode_clicks(clicks, volume.dims, volume.spacing)
    return sw_predict([volume, channels.tumor, channels.background], segmenter, cfg)


def select_worst_patches(
    pred: BinaryMask, label: BinaryMask, grid: WindowGrid
) -> Tuple[Optional[int], Optional[int]]:
    """Indices of the lowest-Dice patches containing under- resp.
    over-segmentation errors; ties broken by lowest grid index.

    An error-free class yields None for its slot.
    """
    check_same_dims(pred, label, "pred/label")
    errs = error_masks(pred, label)
    best = {TUMOR: (None, None), BACKGROUND: (None, None)}  # (score, index)
    for i, origin in enumerate(grid.origins):
        p = extract_window(pred.values, origin, grid.window_dims)
        l = extract_window(label.values, origin, grid.window_dims)
        score = metrics.dice(BinaryMask(values=p), BinaryMask(values=l))
        has_under = extract_window(errs.under.values, origin, grid.window_dims).any()
        has_over = extract_window(errs.over.values, origin, grid.window_dims).any()
        for cls, qualifies in ((TUMOR, has_under), (BACKGROUND, has_over)):
            if qualifies and (best[cls][0] is None or score < best[cls][0]):
                best[cls] = (score, i)
    return best[TUMOR][1], best[BACKGROUND][1]


def _window_mask(mask_values: np.ndarray, grid: WindowGrid, index: int) -> np.ndarray:
    out = np.zeros_like(mask_values)
    origin = grid.origins[index]
    x, y, z = origin
    wx, wy, wz = grid.window_dims
    out[x : x + wx, y : y + wy, z : z + wz] = mask_values[
        x : x + wx, y : y + wy, z : z + wz
    ]
    return out


def _corrective_clicks(
    state: InteractionState,
    label: BinaryMask,
    scope: CorrectionScope,
    rng: np.random.Generator,
) -> List[Click]:
    """One tumor and one background click from the current error regions,
    skipping a class with no errors; local mode restricts sampling to the
    worst-scoring patch per class."""
    pred = binarize(state.prediction)
    errs = error_masks(pred, label)
    under = errs.under.values
    over = errs.over.values

    if scope.mode == LOCAL_PATCHWISE:
        grid = plan_windows(label.dims, scope.patch_config)
        t_idx, b_idx = select_worst_patches(pred, label, grid)
        under = _window_mask(under, grid, t_idx) if t_idx is not None else np.zeros_like(under)
        over = _window_mask(over, grid, b_idx) if b_idx is not None else np.zeros_like(over)

    iteration = state.iteration + 1
    placed = []
    for cls, mask in ((TUMOR, under), (BACKGROUND, over)):
        click = sample_click(BinaryMask(values=mask), cls, iteration, rng)
        if click is not None:
            placed.append(click)
    return placed


def corrective_step(
    state: InteractionState,
    label: BinaryMask,
    segmenter,
    cfg: WindowConfig,
    volume: Volume,
    scope: CorrectionScope,
    rng: np.random.Generator,
) -> List[Click]:
    """Place corrective clicks, re-predict, and append the new Dice.

    Returns the clicks placed; an empty list means the prediction already
    matches the label and the state is marked stopped (no_error).
    """
    pred = binarize(state.prediction)
    if error_masks(pred, label).empty:
        state.stopped_reason = REASON_NO_ERROR
        return []
    placed = _corrective_clicks(state, label, scope, rng)
    for c in placed:
        state.clicks.add(c)
    state.prediction = _predict(volume, state.clicks, segmenter, cfg)
    state.iteration += 1
    state.dice_history.append(metrics.dice(binarize(state.prediction), label))
    return placed


def corrective_step_global(state, label, segmenter, cfg, volume, rng):
    return corrective_step(state, label, segmenter, cfg, volume, CorrectionScope(GLOBAL), rng)


def corrective_step_local(state, label, segmenter, cfg, volume, grid_cfg, rng):
    scope = CorrectionScope(LOCAL_PATCHWISE, grid_cfg)
    return corrective_step(state, label, segmenter, cfg, volume, scope, rng)


def run_interaction(
    volume: Volume,
    label: BinaryMask,
    segmenter,
    strategy: str = CORRECTIVE,
    scope: CorrectionScope = CorrectionScope(GLOBAL),
    crit: StoppingCriterion = StoppingCriterion(max_iter=10),
    eval_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
    window: WindowConfig = WindowConfig(),
    nsd_tolerance_mm: float = metrics.DEFAULT_NSD_TOLERANCE_MM,
) -> Trajectory:
    """Run a full simulated interaction and record its trajectory.

    Iteration 0 is the clickless prediction.  In eval_mode only max_iter
    is honored, so exactly max_iter correction iterations run even when
    errors vanish earlier.
    """
    check_same_dims(volume, label, "volume/label")
    if strategy not in (NON_CORRECTIVE, CORRECTIVE):
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = rng if rng is not None else np.random.default_rng()

    crit_eff = crit
    if eval_mode:
        if crit.max_iter is None:
            raise ValueError("eval_mode requires max_iter")
        crit_eff = StoppingCriterion(max_iter=crit.max_iter)

    state = InteractionState()
    traj = Trajectory(state=state)

    def record(placed: List[Click], t0: float):
        pred = binarize(state.prediction)
        n = metrics.nsd(pred, label, nsd_tolerance_mm, volume.spacing)
        traj.records.append(
            IterationRecord(
                iteration=state.iteration,
                clicks_placed=list(placed),
                dice=state.dice_history[-1],
                nsd=n,
                seconds=time.perf_counter() - t0,
            )
        )

    # iteration 0: empty guidance
    t0 = time.perf_counter()
    state.prediction = _predict(volume, state.clicks, segmenter, window)
    state.dice_history.append(metrics.dice(binarize(state.prediction), label))
    record([], t0)

    if strategy == NON_CORRECTIVE:
        t0 = time.perf_counter()
        n_clicks = crit.max_iter if crit.max_iter is not None else 10
        clicks = non_corrective_clicks(label, n_clicks, rng)
        for c in clicks:
            state.clicks.add(c)
        state.prediction = _predict(volume, state.clicks, segmenter, window)
        state.iteration += 1
        state.dice_history.append(metrics.dice(binarize(state.prediction), label))
        record(list(clicks), t0)
        state.stopped_reason = REASON_MAX_ITER
        return traj

    while True:
        t0 = time.perf_counter()
        pred = binarize(state.prediction)
        if not eval_mode and error_masks(pred, label).empty:
            state.stopped_reason = REASON_NO_ERROR
            break
        placed = _corrective_clicks(state, label, scope, rng)
        for c in placed:
            state.clicks.add(c)
        state.prediction = _predict(volume, state.clicks, segmenter, window)
        state.iteration += 1
        state.dice_history.append(metrics.dice(binarize(state.prediction), label))
        record(placed, t0)
        stop, reason = should_stop(state, crit_eff, rng)
        if stop:
            state.stopped_reason = reason
            break
    return traj
