"""
losses.py - photometric reprojection loss (SSIM + L1) and the day/night sum.

Per pixel and per reconstruction:

    e = (alpha / 2) * (1 - SSIM) + (1 - alpha) * |target - reconstruction|

averaged over colour channels. Reconstructions from the two source frames are
combined per pixel (mean over valid sources, or the per-pixel minimum), and the
result is averaged over pixels that at least one source could see.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import math
from dataclasses import dataclass
from typing import Sequence

# Import external packages
import torch
import torch.nn.functional as F

# Import functions from local modules
from utils.utils_config import SourceAggregation
from utils.utils_errors import ConfigurationError, ContractViolation, TrainingStepError
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class PhotometricConfig:
    alpha: float = 0.85
    source_aggregation: SourceAggregation = SourceAggregation.MEAN
    window: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigurationError(f"SSIM window must be odd and >= 3, got {self.window}")
        object.__setattr__(
            self, "source_aggregation", SourceAggregation(self.source_aggregation)
        )


#####################################
# SSIM
#####################################


def ssim_map(a: torch.Tensor, b: torch.Tensor, window: int = 3) -> torch.Tensor:
    """Per-pixel SSIM with window x window mean pooling over reflection-padded inputs."""
    if a.shape != b.shape:
        msg = f"SSIM inputs differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}"
        logger.error(msg)
        raise ContractViolation(msg)

    pad = window // 2
    a = F.pad(a, (pad, pad, pad, pad), mode="reflect")
    b = F.pad(b, (pad, pad, pad, pad), mode="reflect")

    mu_a = F.avg_pool2d(a, window, stride=1)
    mu_b = F.avg_pool2d(b, window, stride=1)
    sigma_a = F.avg_pool2d(a * a, window, stride=1) - mu_a * mu_a
    sigma_b = F.avg_pool2d(b * b, window, stride=1) - mu_b * mu_b
    sigma_ab = F.avg_pool2d(a * b, window, stride=1) - mu_a * mu_b

    numerator = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * sigma_ab + SSIM_C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (sigma_a + sigma_b + SSIM_C2)
    return (numerator / denominator).clamp(-1.0, 1.0)


#####################################
# Photometric Loss
#####################################


def photometric_error(
    target: torch.Tensor, reconstruction: torch.Tensor, cfg: PhotometricConfig
) -> torch.Tensor:
    """Per-pixel SSIM + L1 error, B x 1 x H x W."""
    ssim_term = ((1.0 - ssim_map(target, reconstruction, cfg.window)) / 2.0).clamp(0.0, 1.0)
    l1_term = (target - reconstruction).abs()
    error = cfg.alpha * ssim_term + (1.0 - cfg.alpha) * l1_term
    return error.mean(dim=1, keepdim=True)


def photometric_loss_map(
    target: torch.Tensor,
    reconstructions: Sequence[tuple[torch.Tensor, torch.Tensor]],
    cfg: PhotometricConfig,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Aggregate per-source errors per pixel. Returns (loss map, pixel validity)."""
    if len(reconstructions) == 0:
        msg = "photometric loss needs at least one reconstruction"
        logger.error(msg)
        raise ContractViolation(msg)

    errors = []
    masks = []
    for reconstruction, mask in reconstructions:
        if reconstruction.shape != target.shape:
            msg = (
                f"Reconstruction {tuple(reconstruction.shape)} does not match "
                f"target {tuple(target.shape)}"
            )
            logger.error(msg)
            raise ContractViolation(msg)
        errors.append(photometric_error(target, reconstruction, cfg))
        masks.append(mask.to(torch.bool).expand_as(errors[-1]))

    error = torch.stack(errors)  # S x B x 1 x H x W
    valid = torch.stack(masks)
    any_valid = valid.any(dim=0)

    if cfg.source_aggregation == SourceAggregation.PER_PIXEL_MIN:
        blocked = torch.where(valid, error, torch.full_like(error, math.inf))
        per_pixel = blocked.min(dim=0).values
        per_pixel = torch.where(any_valid, per_pixel, torch.zeros_like(per_pixel))
    else:
        weights = valid.to(error.dtype)
        count = weights.sum(dim=0).clamp(min=1.0)
        per_pixel = (error * weights).sum(dim=0) / count
    return per_pixel, any_valid


def photometric_loss(
    target: torch.Tensor,
    reconstructions: Sequence[tuple[torch.Tensor, torch.Tensor]],
    cfg: PhotometricConfig,
) -> torch.Tensor:
    """Scalar photometric loss averaged over pixels seen by at least one source."""
    per_pixel, valid = photometric_loss_map(target, reconstructions, cfg)
    weights = valid.to(per_pixel.dtype)
    return (per_pixel * weights).sum() / weights.sum().clamp(min=1.0)


def total_loss(day_loss: torch.Tensor, night_loss: torch.Tensor) -> torch.Tensor:
    """Sum of the daytime and nighttime photometric losses."""
    components = {"loss_day": float(day_loss.detach()), "loss_night": float(night_loss.detach())}
    bad = {k: v for k, v in components.items() if not math.isfinite(v) or v < 0}
    if bad:
        msg = f"Invalid loss components: {bad}"
        logger.error(msg)
        raise TrainingStepError(msg, diagnostics=components)
    return day_loss + night_loss


#####################################
# Optional Regulariser
#####################################


def edge_aware_smoothness(disp: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    """First-order disparity smoothness, down-weighted at image edges."""
    norm_disp = disp / (disp.mean(dim=(2, 3), keepdim=True) + 1e-7)

    grad_disp_x = (norm_disp[:, :, :, :-1] - norm_disp[:, :, :, 1:]).abs()
    grad_disp_y = (norm_disp[:, :, :-1, :] - norm_disp[:, :, 1:, :]).abs()

    grad_img_x = (image[:, :, :, :-1] - image[:, :, :, 1:]).abs().mean(1, keepdim=True)
    grad_img_y = (image[:, :, :-1, :] - image[:, :, 1:, :]).abs().mean(1, keepdim=True)

    grad_disp_x = grad_disp_x * torch.exp(-grad_img_x)
    grad_disp_y = grad_disp_y * torch.exp(-grad_img_y)
    return grad_disp_x.mean() + grad_disp_y.mean()
