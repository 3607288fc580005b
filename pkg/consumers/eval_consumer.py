"""
eval_consumer.py

Consume a trained checkpoint and a sequence with ground truth, and report
the standard monocular depth metrics for a daytime and a nighttime split.

Inference mirrors training: every test image is paired with a translated
partner. A day frame gets its stub night frame (or the pre-translated one)
for the transformer branch; a night frame gets a stub day frame, translated
back, for the CNN branch. Ground truth is subsampled with a seeded sparse mask
(LIDAR-like), predictions are median scaled unless disabled, and metrics are
computed over gt in (d_floor, cap].

Outputs (when an output folder is given):

    eval_frames.csv     one row per (split, frame)
    eval_summary.csv    mean per split, plus frame and skipped counts
    eval_summary.txt    the same summary as a fixed-width table
    depth_png/          optional colorized predictions
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import pathlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

# Import external packages
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import torch  # noqa: E402

# Import functions from local modules
from consumers.train_consumer import load_checkpoint, model_from_checkpoint  # noqa: E402
from models.glocalfuse import GlocalFuse  # noqa: E402
from producers.night_producer import translate_night_to_day  # noqa: E402
from producers.sequence_producer import FrameRecord, SequenceDataset  # noqa: E402
from utils.utils_config import PairMode  # noqa: E402
from utils.utils_errors import EvaluationError  # noqa: E402
from utils.utils_logger import log_banner, logger  # noqa: E402

#####################################
# Default Configurations
#####################################

DEFAULT_CAP = 60.0
DEFAULT_FLOOR = 0.1
DEFAULT_GT_DENSITY = 0.05
SPLITS = ("day", "night")
METRIC_NAMES = ("abs_rel", "sq_rel", "rmse", "rmse_log", "a1", "a2", "a3")

FRAMES_REPORT = "eval_frames.csv"
SUMMARY_REPORT = "eval_summary.csv"
SUMMARY_TABLE = "eval_summary.txt"
PNG_DIR = "depth_png"


@dataclass(frozen=True)
class EvalMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    a1: float
    a2: float
    a3: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class EvalFlags:
    scale: bool = True
    cap: float = DEFAULT_CAP
    d_floor: float = DEFAULT_FLOOR
    gt_density: float = DEFAULT_GT_DENSITY
    seed: int = 0
    out_dir: Optional[pathlib.Path] = None
    emit_png: bool = False
    splits: tuple[str, ...] = SPLITS


@dataclass
class EvalReport:
    frames: pd.DataFrame
    summary: pd.DataFrame
    skipped: dict[str, int] = field(default_factory=dict)

    def split_metrics(self, split: str) -> EvalMetrics:
        row = self.summary.set_index("split").loc[split]
        return EvalMetrics(**{name: float(row[name]) for name in METRIC_NAMES})


#####################################
# Metrics
#####################################


def valid_gt_mask(
    gt: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
    cap: float = DEFAULT_CAP,
    d_floor: float = DEFAULT_FLOOR,
) -> torch.Tensor:
    valid = torch.isfinite(gt) & (gt > d_floor) & (gt <= cap)
    if mask is not None:
        valid = valid & mask.to(torch.bool)
    return valid


def compute_metrics(
    pred: torch.Tensor,
    gt: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
    cap: float = DEFAULT_CAP,
    d_floor: float = DEFAULT_FLOOR,
) -> EvalMetrics:
    """Error and accuracy metrics over pixels with gt in (d_floor, cap]."""
    valid = valid_gt_mask(gt, mask, cap, d_floor)
    if not valid.any():
        msg = "No valid ground-truth pixels"
        logger.warning(msg)
        raise EvaluationError(msg)

    g = gt[valid].to(torch.float64)
    p = pred.expand_as(gt)[valid].to(torch.float64).clamp(d_floor, cap)

    thresh = torch.maximum(g / p, p / g)
    a1 = (thresh < 1.25).double().mean()
    a2 = (thresh < 1.25**2).double().mean()
    a3 = (thresh < 1.25**3).double().mean()

    rmse = torch.sqrt(((g - p) ** 2).mean())
    rmse_log = torch.sqrt(((torch.log(g) - torch.log(p)) ** 2).mean())
    abs_rel = ((g - p).abs() / g).mean()
    sq_rel = (((g - p) ** 2) / g).mean()

    return EvalMetrics(
        abs_rel=float(abs_rel),
        sq_rel=float(sq_rel),
        rmse=float(rmse),
        rmse_log=float(rmse_log),
        a1=float(a1),
        a2=float(a2),
        a3=float(a3),
    )


def median_scale(
    pred: torch.Tensor, gt: torch.Tensor, mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """pred * median(gt) / median(pred) over the valid pixels."""
    valid = gt > 0 if mask is None else mask.to(torch.bool) & (gt > 0)
    if not valid.any():
        msg = "Median scaling needs at least one valid pixel"
        logger.warning(msg)
        raise EvaluationError(msg)
    med_pred = pred.expand_as(gt)[valid].median()
    if med_pred == 0:
        msg = "Median prediction is zero; cannot scale"
        logger.warning(msg)
        raise EvaluationError(msg)
    return pred * (gt[valid].median() / med_pred)


def sparse_mask(shape: torch.Size, density: float, seed: int) -> torch.Tensor:
    if density >= 1.0:
        return torch.ones(shape, dtype=torch.bool)
    generator = torch.Generator().manual_seed(seed)
    return torch.rand(shape, generator=generator) < density


def evaluate_frame(
    pred: torch.Tensor, gt: torch.Tensor, flags: EvalFlags, frame_index: int
) -> EvalMetrics:
    mask = sparse_mask(gt.shape, flags.gt_density, flags.seed * 100_003 + frame_index)
    valid = valid_gt_mask(gt, mask, flags.cap, flags.d_floor)
    if flags.scale:
        pred = median_scale(pred, gt, valid)
    return compute_metrics(pred, gt, valid, flags.cap, flags.d_floor)


#####################################
# Inference
#####################################

# (day image, night image) -> depth, both inputs 1 x 3 x H x W
Predictor = Callable[[torch.Tensor, torch.Tensor, str, FrameRecord], torch.Tensor]


def split_inputs(
    record: FrameRecord, split: str, pair_mode: PairMode
) -> tuple[torch.Tensor, torch.Tensor]:
    """(day, night) network inputs for one test frame of a split."""
    test_image = record.day if split == "day" else record.night
    if pair_mode != PairMode.DAY_NIGHT:
        return test_image, test_image.clone()
    if split == "day":
        return record.day, record.night
    return translate_night_to_day(record.night), record.night


def model_predictor(model: GlocalFuse) -> Predictor:
    model.eval()

    def predict(day: torch.Tensor, night: torch.Tensor, split: str, record: FrameRecord) -> torch.Tensor:
        with torch.no_grad():
            return model.predict_depth(day, night)

    return predict


#####################################
# Colorized Depth
#####################################


def colorize_depth(depth: np.ndarray, path: pathlib.Path) -> pathlib.Path:
    """Save depth as a turbo-coloured PNG of normalized inverse depth (near = warm)."""
    depth = np.asarray(depth, dtype=np.float64).squeeze()
    inv = 1.0 / np.clip(depth, 1e-6, None)
    lo, hi = np.percentile(inv, 1), np.percentile(inv, 99)
    norm = np.clip((inv - lo) / max(hi - lo, 1e-12), 0.0, 1.0)
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.imsave(path, norm, cmap="turbo", vmin=0.0, vmax=1.0)
    return path


#####################################
# Evaluation Protocol
#####################################


def evaluate_with_predictor(
    predictor: Predictor, dataset: SequenceDataset, flags: EvalFlags
) -> EvalReport:
    """Evaluate every frame with ground truth on each split."""
    rows = []
    skipped = {split: 0 for split in flags.splits}
    gt_frames = 0

    for index in dataset.frame_indices:
        record = dataset.frame(index)
        if record.depth is None:
            continue
        gt_frames += 1
        gt = record.depth[None]  # 1 x 1 x H x W
        for split in flags.splits:
            day, night = split_inputs(record, split, dataset.cfg.pair_mode)
            depth = predictor(day[None], night[None], split, record)
            try:
                metrics = evaluate_frame(depth, gt, flags, index)
            except EvaluationError as e:
                logger.warning(f"Skipping {split} frame {index}: {e}")
                skipped[split] += 1
                continue
            rows.append({"split": split, "frame": index, **metrics.to_dict()})
            if flags.emit_png and flags.out_dir is not None:
                png = pathlib.Path(flags.out_dir) / PNG_DIR / f"{split}_{index:06d}.png"
                colorize_depth(depth.squeeze().numpy(), png)

    if gt_frames == 0:
        msg = f"No ground-truth depth found in {dataset.root}"
        logger.error(msg)
        raise EvaluationError(msg)

    frames = pd.DataFrame(rows, columns=["split", "frame", *METRIC_NAMES])
    report = EvalReport(frames=frames, summary=summarize(frames, skipped), skipped=skipped)
    for _, row in report.summary.iterrows():
        logger.info(
            f"{row['split']}: abs_rel={row['abs_rel']:.4f} rmse={row['rmse']:.4f} "
            f"a1={row['a1']:.4f} over {int(row['frames'])} frames ({int(row['skipped'])} skipped)"
        )
    if flags.out_dir is not None:
        write_report(report, pathlib.Path(flags.out_dir))
    return report


def summarize(frames: pd.DataFrame, skipped: dict[str, int]) -> pd.DataFrame:
    """Unweighted per-split mean of the per-frame metrics."""
    rows = []
    for split, count in skipped.items():
        part = frames[frames["split"] == split]
        means = {name: float(part[name].mean()) if len(part) else float("nan") for name in METRIC_NAMES}
        rows.append({"split": split, **means, "frames": len(part), "skipped": count})
    return pd.DataFrame(rows, columns=["split", *METRIC_NAMES, "frames", "skipped"])


def write_report(report: EvalReport, out_dir: pathlib.Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    report.frames.to_csv(out_dir / FRAMES_REPORT, index=False, float_format="%.6f")
    report.summary.to_csv(out_dir / SUMMARY_REPORT, index=False, float_format="%.6f")
    table = report.summary.to_string(index=False, float_format=lambda v: f"{v:.4f}")
    (out_dir / SUMMARY_TABLE).write_text(table + "\n")
    logger.info(f"Wrote evaluation report to {out_dir}")


def evaluate(
    checkpoint: pathlib.Path, data_dir: pathlib.Path, flags: Optional[EvalFlags] = None
) -> EvalReport:
    """Evaluate a checkpoint on a sequence directory with ground-truth depth."""
    flags = flags or EvalFlags()
    log_banner("Evaluation", checkpoint=checkpoint, data=data_dir, scale=flags.scale, cap=flags.cap)
    model, cfg = model_from_checkpoint(load_checkpoint(checkpoint))
    dataset = SequenceDataset(data_dir, cfg)
    return evaluate_with_predictor(model_predictor(model), dataset, flags)
