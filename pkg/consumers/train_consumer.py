"""
train_consumer.py

Consume batches of day-night triplets and train the depth network.

Each step predicts depth for the target from the (day, night) pair, estimates
the pose to both temporal neighbours from the day frames, reconstructs the
day AND night targets from their sources with that one depth and pose, and
minimises the summed photometric losses with Adam. The learning rate ramps
linearly from 0 over the warmup epochs and then follows a cosine down to 0.

Files written into the output folder:

    checkpoint_00000000.pt     initial weights (always)
    checkpoint_XXXXXXXX.pt     every checkpoint_every steps and at the end
    metrics.csv                step, lr, loss, loss_day, loss_night
    diagnostics_step_XXXXXXXX.json   only when a step produces a bad loss
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import csv
import json
import math
import pathlib
from dataclasses import dataclass, field
from typing import Any, Optional

# Import external packages
import pandas as pd
import torch

# Import functions from local modules
from models.geometry import reproject
from models.glocalfuse import GlocalFuse, build_model
from models.losses import PhotometricConfig, edge_aware_smoothness, photometric_loss, total_loss
from models.decoder import disp_to_depth
from producers.sequence_producer import SequenceDataset, epoch_loader, steps_per_epoch
from utils.utils_config import TrainingConfig, log_config
from utils.utils_errors import IngestionError, TrainingStepError
from utils.utils_io import atomic_write
from utils.utils_logger import log_banner, logger

#####################################
# Default Configurations
#####################################

CHECKPOINT_MAGIC = "GLOCALFUSE-CKPT"
CHECKPOINT_VERSION = 1
METRICS_FILE = "metrics.csv"
METRICS_COLUMNS = ["step", "lr", "loss", "loss_day", "loss_night"]


def checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:08d}.pt"


#####################################
# Learning-Rate Schedule
#####################################


def lr_at(step: float, steps_per_epoch: int, cfg: TrainingConfig) -> float:
    """Linear warmup from 0 to lr_peak, then cosine decay reaching 0 at the last step."""
    total = cfg.epochs * steps_per_epoch
    warmup = cfg.warmup_epochs * steps_per_epoch
    if total <= 0 or step >= total:
        return 0.0
    if step < warmup:
        return cfg.lr_peak * step / warmup
    n_decay = total - warmup
    progress = (step - warmup) / n_decay
    return cfg.lr_peak * 0.5 * (1.0 + math.cos(math.pi * progress))


def set_learning_rate(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def build_optimizer(model: GlocalFuse, cfg: TrainingConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.lr_peak, betas=(cfg.beta1, cfg.beta2))


def photometric_config(cfg: TrainingConfig) -> PhotometricConfig:
    return PhotometricConfig(
        alpha=cfg.alpha, source_aggregation=cfg.source_aggregation, window=cfg.ssim_window
    )


#####################################
# One Optimisation Step
#####################################


@dataclass
class StepResult:
    step: int
    lr: float
    loss: float
    loss_day: float
    loss_night: float

    def as_row(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "lr": self.lr,
            "loss": self.loss,
            "loss_day": self.loss_day,
            "loss_night": self.loss_night,
        }


def compute_losses(
    batch: dict[str, torch.Tensor], model: GlocalFuse, cfg: TrainingConfig
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Forward pass of one batch. Returns (loss, loss_day, loss_night)."""
    day = batch["day"]
    night = batch["night"]
    intrinsics = batch["K"]
    day_target, night_target = day[:, 0], night[:, 0]

    disp = model.predict_disparity(day_target, night_target)
    depth = disp_to_depth(disp, model.min_depth, model.max_depth)

    day_recons, night_recons = [], []
    for s in (1, 2):
        pose = model.estimate_pose(day_target, day[:, s])
        day_recons.append(reproject(day[:, s], depth, pose, intrinsics))
        night_recons.append(reproject(night[:, s], depth, pose, intrinsics))

    pcfg = photometric_config(cfg)
    loss_day = photometric_loss(day_target, day_recons, pcfg)
    loss_night = photometric_loss(night_target, night_recons, pcfg)
    loss = total_loss(loss_day, loss_night)
    if cfg.smoothness_weight > 0:
        loss = loss + cfg.smoothness_weight * edge_aware_smoothness(disp, day_target)
    return loss, loss_day, loss_night


def train_step(
    batch: dict[str, torch.Tensor],
    model: GlocalFuse,
    optimizer: torch.optim.Optimizer,
    cfg: TrainingConfig,
    step: int,
    n_steps_per_epoch: int,
) -> StepResult:
    """Forward, loss, backward and one Adam update at the scheduled learning rate."""
    model.train()
    frames = [int(i) for i in batch["index"]]
    try:
        loss, loss_day, loss_night = compute_losses(batch, model, cfg)
    except TrainingStepError as e:
        e.diagnostics.update({"step": step, "frames": frames})
        raise

    if not torch.isfinite(loss):
        diagnostics = {
            "step": step,
            "frames": frames,
            "loss": float(loss.detach()),
            "loss_day": float(loss_day.detach()),
            "loss_night": float(loss_night.detach()),
        }
        msg = f"Non-finite loss at step {step}: {diagnostics}"
        logger.error(msg)
        raise TrainingStepError(msg, diagnostics=diagnostics)

    lr = lr_at(step, n_steps_per_epoch, cfg)
    set_learning_rate(optimizer, lr)
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    if cfg.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    optimizer.step()

    return StepResult(
        step=step,
        lr=lr,
        loss=float(loss.detach()),
        loss_day=float(loss_day.detach()),
        loss_night=float(loss_night.detach()),
    )


#####################################
# Checkpoints
#####################################


def save_checkpoint(
    path: pathlib.Path,
    model: GlocalFuse,
    optimizer: torch.optim.Optimizer,
    step: int,
    cfg: TrainingConfig,
    n_steps_per_epoch: int,
) -> pathlib.Path:
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "format_version": CHECKPOINT_VERSION,
        "step": step,
        "schedule": {
            "steps_per_epoch": n_steps_per_epoch,
            "lr": lr_at(step, n_steps_per_epoch, cfg),
        },
        "config": cfg.to_dict(),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict(),
        "rng": torch.get_rng_state(),
    }
    atomic_write(path, lambda tmp: torch.save(payload, tmp))
    logger.info(f"Saved checkpoint at step {step} to {path}")
    return pathlib.Path(path)


def load_checkpoint(path: pathlib.Path) -> dict[str, Any]:
    """Load and validate a checkpoint file onto the CPU."""
    path = pathlib.Path(path)
    if not path.is_file():
        msg = f"Checkpoint not found: {path}"
        logger.error(msg)
        raise IngestionError(msg)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        msg = f"Cannot read checkpoint {path}: {e}"
        logger.error(msg)
        raise IngestionError(msg) from e

    if not isinstance(payload, dict) or payload.get("magic") != CHECKPOINT_MAGIC:
        msg = f"{path} is not a checkpoint written by this project"
        logger.error(msg)
        raise IngestionError(msg)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        msg = (
            f"Unsupported checkpoint version {payload.get('format_version')} in {path}; "
            f"expected {CHECKPOINT_VERSION}"
        )
        logger.error(msg)
        raise IngestionError(msg)
    return payload


def model_from_checkpoint(payload: dict[str, Any]) -> tuple[GlocalFuse, TrainingConfig]:
    cfg = TrainingConfig.from_dict(payload["config"])
    model = build_model(cfg)
    model.load_state_dict(payload["model"])
    return model, cfg


#####################################
# Metrics Log
#####################################


def prepare_metrics_log(path: pathlib.Path, resume_step: Optional[int]) -> None:
    """Start a fresh log, or on resume drop every row at or after resume_step."""
    if resume_step is None or not path.is_file():
        with path.open("w", newline="") as f:
            csv.DictWriter(f, fieldnames=METRICS_COLUMNS).writeheader()
        return
    log = pd.read_csv(path)
    log[log["step"] < resume_step].to_csv(path, index=False)


def append_metrics(path: pathlib.Path, result: StepResult) -> None:
    with path.open("a", newline="") as f:
        csv.DictWriter(f, fieldnames=METRICS_COLUMNS).writerow(result.as_row())


def dump_diagnostics(out_dir: pathlib.Path, step: int, diagnostics: dict[str, Any]) -> pathlib.Path:
    path = out_dir / f"diagnostics_step_{step:08d}.json"
    path.write_text(json.dumps(diagnostics, indent=2, default=str))
    logger.error(f"Wrote training diagnostics to {path}")
    return path


#####################################
# Training Loop
#####################################


@dataclass
class FitResult:
    out_dir: pathlib.Path
    final_step: int
    checkpoints: list[pathlib.Path] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)

    @property
    def metrics_log(self) -> pathlib.Path:
        return self.out_dir / METRICS_FILE


def planned_steps(cfg: TrainingConfig, n_steps_per_epoch: int) -> int:
    total = cfg.epochs * n_steps_per_epoch
    if cfg.max_steps is not None:
        total = min(total, cfg.max_steps)
    return total


def fit(
    cfg: TrainingConfig,
    data_dir: pathlib.Path,
    out_dir: pathlib.Path,
    resume: Optional[pathlib.Path] = None,
) -> FitResult:
    """Train on one sequence directory, writing checkpoints and metrics into out_dir."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_banner("Training", data=data_dir, out=out_dir, resume=resume)
    log_config(cfg)

    torch.manual_seed(cfg.seed)
    torch.use_deterministic_algorithms(cfg.deterministic, warn_only=True)

    dataset = SequenceDataset(data_dir, cfg)
    if len(dataset) == 0:
        msg = f"No training triplets in {data_dir}"
        logger.error(msg)
        raise IngestionError(msg)

    n_steps_per_epoch = steps_per_epoch(len(dataset), cfg.batch_size)
    total_steps = planned_steps(cfg, n_steps_per_epoch)
    model = build_model(cfg)
    optimizer = build_optimizer(model, cfg)
    result = FitResult(out_dir=out_dir, final_step=0)

    step = 0
    if resume is not None:
        payload = load_checkpoint(resume)
        model.load_state_dict(payload["model"])
        optimizer.load_state_dict(payload["optimizer"])
        torch.set_rng_state(payload["rng"])
        step = int(payload["step"])
        logger.info(f"Resumed from {resume} at step {step}")
    else:
        result.checkpoints.append(
            save_checkpoint(out_dir / checkpoint_name(0), model, optimizer, 0, cfg, n_steps_per_epoch)
        )

    metrics_path = out_dir / METRICS_FILE
    prepare_metrics_log(metrics_path, step if resume is not None else None)

    logger.info(
        f"{len(dataset)} triplets, {n_steps_per_epoch} steps per epoch, "
        f"running steps {step}..{total_steps}"
    )
    last_saved = step if resume is not None else 0
    while step < total_steps:
        epoch, offset = divmod(step, n_steps_per_epoch)
        loader = epoch_loader(dataset, cfg.batch_size, cfg.seed, epoch, offset, cfg.workers)
        for batch in loader:
            if step >= total_steps:
                break
            try:
                outcome = train_step(batch, model, optimizer, cfg, step, n_steps_per_epoch)
            except TrainingStepError as e:
                dump_diagnostics(out_dir, step, e.diagnostics)
                raise
            append_metrics(metrics_path, outcome)
            result.losses.append(outcome.loss)
            step += 1

            if step % cfg.log_every == 0 or step == total_steps:
                logger.info(
                    f"step {step}/{total_steps} lr={outcome.lr:.3e} loss={outcome.loss:.5f} "
                    f"(day {outcome.loss_day:.5f}, night {outcome.loss_night:.5f})"
                )
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                result.checkpoints.append(
                    save_checkpoint(
                        out_dir / checkpoint_name(step), model, optimizer, step, cfg, n_steps_per_epoch
                    )
                )
                last_saved = step

    if step != last_saved:
        result.checkpoints.append(
            save_checkpoint(out_dir / checkpoint_name(step), model, optimizer, step, cfg, n_steps_per_epoch)
        )
    result.final_step = step
    logger.info(f"Training finished at step {step}")
    return result
