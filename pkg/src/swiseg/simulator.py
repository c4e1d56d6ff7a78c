"""Batch experiment harness: simulated-user runs over a dataset with CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import preprocess
from .guidance import ClickSet
from .segmenters import (
    ClickResponsiveOracle,
    OracleSegmenter,
    ThresholdSegmenter,
    external_segmenter,
)
from .strategy import (
    CORRECTIVE,
    GLOBAL,
    LOCAL_PATCHWISE,
    CorrectionScope,
    StoppingCriterion,
    Trajectory,
    run_interaction,
)
from .volume import load_pair
from .windowing import WindowConfig

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "volume_id",
    "strategy",
    "scope",
    "criterion",
    "dice_at_0",
    "dice_at_n",
    "nsd_at_n",
    "iterations",
    "clicks_total",
    "seconds",
]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_dir: str
    output_dir: str
    strategy: str = CORRECTIVE
    scope: str = GLOBAL
    max_iter: int = 10
    stop_probability: Optional[float] = None
    dice_threshold: Optional[float] = None
    window_dims: Tuple[int, int, int] = (128, 128, 128)
    overlap: float = 0.25
    weighting: str = "gaussian"
    segmenter: str = "oracle"  # oracle | click_oracle[:comps,blobs] | threshold[:t] | endpoint
    seed: int = 0
    center_crop: Optional[Tuple[int, int, int]] = None
    jobs: int = 1
    record_timing: bool = True

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        kwargs = dict(d)
        for key in ("window_dims", "center_crop"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def criterion(self) -> StoppingCriterion:
        return StoppingCriterion(
            max_iter=self.max_iter,
            stop_probability=self.stop_probability,
            dice_threshold=self.dice_threshold,
        )

    def criterion_label(self) -> str:
        parts = [f"max_iter={self.max_iter}"]
        if self.stop_probability is not None:
            parts.append(f"p={self.stop_probability}")
        if self.dice_threshold is not None:
            parts.append(f"dice_max={self.dice_threshold}")
        return ",".join(parts)

    def window_config(self) -> WindowConfig:
        return WindowConfig(
            window_dims=self.window_dims, overlap=self.overlap, weighting=self.weighting
        )


def build_segmenter(spec: str, label=None, seed: int = 0):
    """Instantiate a segmenter from its config string."""
    name, _, args = spec.partition(":")
    if name == "oracle":
        if label is None:
            raise ValueError("oracle segmenter requires a label")
        return OracleSegmenter(label)
    if name == "click_oracle":
        comps, blobs = 3, 3
        if args:
            parts = args.split(",")
            comps = int(parts[0])
            if len(parts) > 1:
                blobs = int(parts[1])
        if label is None:
            raise ValueError("click_oracle segmenter requires a label")
        return ClickResponsiveOracle(label, comps, blobs, seed=seed)
    if name == "threshold":
        return ThresholdSegmenter(float(args) if args else 0.5)
    return external_segmenter(spec)


def discover_pairs(dataset_dir) -> List[Tuple[str, Path, Path]]:
    """Find (id, image, label) triples for ``<id>_pet.*`` / ``<id>_label.*``
    pairs in either NIfTI or the internal raw format."""
    root = Path(dataset_dir)
    pairs = []
    for suffix in (".nii.gz", ".nii", ".json"):
        for img in sorted(root.glob(f"*_pet{suffix}")):
            vid = img.name[: -len(f"_pet{suffix}")]
            lab = root / f"{vid}_label{suffix}"
            if lab.exists():
                pairs.append((vid, img, lab))
    pairs.sort(key=lambda t: t[0])
    return pairs


def volume_rng(seed: int, volume_id: str) -> np.random.Generator:
    # per-volume stream derived from (global seed, volume id) so worker
    # scheduling cannot reorder randomness
    entropy = [seed] + list(volume_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass
class VolumeRow:
    volume_id: str
    trajectory: Optional[Trajectory]
    seconds: float
    error: Optional[str] = None

    def csv_row(self, cfg: ExperimentConfig) -> List:
        t = self.trajectory
        return [
            self.volume_id,
            cfg.strategy,
            cfg.scope,
            cfg.criterion_label(),
            f"{t.dice_history[0]:.6f}",
            f"{t.dice_history[-1]:.6f}",
            f"{t.records[-1].nsd:.6f}",
            t.state.iteration,
            len(t.state.clicks),
            f"{self.seconds:.3f}" if cfg.record_timing else "0.000",
        ]


@dataclass
class Report:
    config: ExperimentConfig
    rows: List[VolumeRow]
    skipped: List[Tuple[str, str]] = field(default_factory=list)

    def aggregate(self) -> Dict[str, float]:
        d0 = [r.trajectory.dice_history[0] for r in self.rows]
        dn = [r.trajectory.dice_history[-1] for r in self.rows]
        nn = [r.trajectory.records[-1].nsd for r in self.rows]
        out = {}
        for name, vals in (("dice_at_0", d0), ("dice_at_n", dn), ("nsd_at_n", nn)):
            out[f"{name}_mean"] = float(np.mean(vals))
            out[f"{name}_std"] = float(np.std(vals))
        out["n_volumes"] = len(self.rows)
        out["n_skipped"] = len(self.skipped)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.csv_row(self.config))
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "aggregate": self.aggregate(),
            "skipped": [{"volume_id": v, "reason": r} for v, r in self.skipped],
            "volumes": {
                r.volume_id: r.trajectory.to_json() for r in self.rows
            },
        }


def _run_one(cfg: ExperimentConfig, vid: str, img_path: Path, lab_path: Path) -> VolumeRow:
    t0 = time.perf_counter()
    volume, label = load_pair(img_path, lab_path)
    volume = preprocess.percentile_normalize(volume)
    if cfg.center_crop is not None:
        volume, label = preprocess.center_crop(volume, label, cfg.center_crop)
    rng = volume_rng(cfg.seed, vid)
    segmenter = build_segmenter(cfg.segmenter, label=label, seed=cfg.seed)
    scope = (
        CorrectionScope(GLOBAL)
        if cfg.scope == GLOBAL
        else CorrectionScope(LOCAL_PATCHWISE, cfg.window_config())
    )
    traj = run_interaction(
        volume,
        label,
        segmenter,
        strategy=cfg.strategy,
        scope=scope,
        crit=cfg.criterion(),
        eval_mode=True,
        rng=rng,
        window=cfg.window_config(),
    )
    return VolumeRow(vid, traj, seconds=time.perf_counter() - t0)


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run the configured simulated-user experiment over the whole dataset
    and write report.csv / report.json into the output directory."""
    pairs = discover_pairs(cfg.dataset_dir)
    if not pairs:
        raise FileNotFoundError(f"no volume/label pairs found in {cfg.dataset_dir}")

    rows: List[VolumeRow] = []
    skipped: List[Tuple[str, str]] = []

    def safe(args):
        vid, img, lab = args
        try:
            return _run_one(cfg, vid, img, lab)
        except Exception as e:  # skip stragglers, keep the run alive
            log.warning("skipping %s: %s", vid, e)
            return VolumeRow(vid, None, 0.0, error=str(e))

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(safe, pairs))
    else:
        results = [safe(p) for p in pairs]

    for r in results:
        if r.error is None:
            rows.append(r)
        else:
            skipped.append((r.volume_id, r.error))
    if not rows:
        raise RuntimeError("all volume/label pairs failed to process")

    rows.sort(key=lambda r: r.volume_id)
    report = Report(config=cfg, rows=rows, skipped=skipped)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return report


def compare_strategies(cfgs: Sequence[ExperimentConfig]) -> List[dict]:
    """Run several configs over the same dataset/seed and tabulate them."""
    if len({(c.dataset_dir, c.seed) for c in cfgs}) != 1:
        raise ValueError("compared configs must share dataset_dir and seed")
    table = []
    for cfg in cfgs:
        report = run_experiment(cfg)
        agg = report.aggregate()
        table.append(
            {
                "strategy": cfg.strategy,
                "scope": cfg.scope,
                "criterion": cfg.criterion_label(),
                "dice_at_0": agg["dice_at_0_mean"],
                "dice_at_0_std": agg["dice_at_0_std"],
                "dice_at_n": agg["dice_at_n_mean"],
                "dice_at_n_std": agg["dice_at_n_std"],
                "nsd_at_n": agg["nsd_at_n_mean"],
                "n_volumes": agg["n_volumes"],
            }
        )
    return table


def format_comparison(table: Sequence[dict]) -> str:
    lines = [
        f"{'strategy':<16} {'scope':<16} {'criterion':<36} "
        f"{'Dice@0':>14} {'Dice@N':>14} {'NSD@N':>8}"
    ]
    for row in table:
        lines.append(
            f"{row['strategy']:<16} {row['scope']:<16} {row['criterion']:<36} "
            f"{row['dice_at_0']*100:6.2f}±{row['dice_at_0_std']*100:5.2f}% "
            f"{row['dice_at_n']*100:6.2f}±{row['dice_at_n_std']*100:5.2f}% "
            f"{row['nsd_at_n']*100:6.2f}%"
        )
    return "\n".join(lines)
