"""Interactive sliding-window segmentation for large volumetric images."""

from .guidance import Click, ClickSet, encode_clicks, error_masks, sample_click
from .metrics import dice, nsd
from .preprocess import (
    AugmentConfig,
    biased_random_crop,
    percentile_normalize,
    random_flip_rotate,
)
from .segmenters import (
    ClickResponsiveOracle,
    HttpSegmenter,
    OracleSegmenter,
    PatchRequest,
    PatchResponse,
    SubprocessSegmenter,
    ThresholdSegmenter,
    external_segmenter,
    make_click_responsive_oracle,
)
from .strategy import (
    CorrectionScope,
    StoppingCriterion,
    Trajectory,
    run_interaction,
    select_worst_patches,
    should_stop,
)
from .volume import BinaryMask, Volume, load_mask, load_volume, save_nifti, save_volume
from .windowing import (
    SlidingWindowPredictor,
    WindowConfig,
    WindowGrid,
    blend,
    importance_map,
    plan_windows,
    sw_predict,
)

__version__ = "0.1.0"
