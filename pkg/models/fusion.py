"""
fusion.py - per-level fusion of the CNN (g) and Transformer (t) features.

For one pyramid level:

    u_hat = t + g
    z     = FC(GAP(u_hat))                           gate vector, C/r wide
    s_t, s_g = two-way softmax(W_t z, W_g z)         per channel, s_t + s_g = 1
    a_t, a_g = sigmoid(conv_kxk([max, mean]_c(.)))   spatial maps in (0, 1)
    u     = a_t * s_t * t + a_g * s_g * g

FusionMode selects the comparison variants: channel-concat + 1x1 conv,
element-wise product, or channel selection without the spatial maps.
"""

#####################################
# Import Modules
#####################################

# Import external packages
import torch
import torch.nn as nn

# Import functions from local modules
from models.transformer_branch import PYRAMID_CHANNELS, FeaturePyramid
from utils.utils_config import FusionMode
from utils.utils_errors import ContractViolation
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

REDUCTION = 16
MIN_GATE_WIDTH = 8
SPATIAL_KERNEL = 7


def gate_width(channels: int, reduction: int = REDUCTION) -> int:
    return max(channels // reduction, MIN_GATE_WIDTH)


#####################################
# Stateless Pieces
#####################################


def aggregate(t: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    if t.shape != g.shape:
        msg = f"Cannot fuse features of shapes {tuple(t.shape)} and {tuple(g.shape)}"
        logger.error(msg)
        raise ContractViolation(msg)
    return t + g


def global_average_pool(x: torch.Tensor) -> torch.Tensor:
    """B x C x H x W -> B x C spatial mean."""
    return x.mean(dim=(2, 3))


def channel_pool(x: torch.Tensor) -> torch.Tensor:
    """Per-pixel max and mean over channels, stacked as a B x 2 x H x W map."""
    return torch.cat([x.amax(dim=1, keepdim=True), x.mean(dim=1, keepdim=True)], dim=1)


def two_way_softmax(logit_t: torch.Tensor, logit_g: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    weights = torch.softmax(torch.stack([logit_t, logit_g]), dim=0)
    return weights[0], weights[1]


#####################################
# Fusion Modules
#####################################


class LevelFusion(nn.Module):
    """Fusion weights and forward pass for one pyramid level."""

    def __init__(
        self,
        channels: int,
        mode: FusionMode = FusionMode.SELECTIVE,
        reduction: int = REDUCTION,
        spatial_kernel: int = SPATIAL_KERNEL,
    ):
        super().__init__()
        self.channels = channels
        self.mode = FusionMode(mode)
        width = gate_width(channels, reduction)

        self.fc_reduce = nn.Sequential(
            nn.Linear(channels, width, bias=True),
            nn.LayerNorm(width),
            nn.ReLU(inplace=True),
        )
        self.w_t = nn.Linear(width, channels, bias=False)
        self.w_g = nn.Linear(width, channels, bias=False)
        self.spatial_conv = nn.Conv2d(
            2,
            1,
            kernel_size=spatial_kernel,
            padding=spatial_kernel // 2,
            padding_mode="replicate",
            bias=False,
        )
        if self.mode == FusionMode.CONCATENATION:
            self.project = nn.Conv2d(2 * channels, channels, kernel_size=1, bias=True)

    def gate_vector(self, u_hat: torch.Tensor) -> torch.Tensor:
        return self.fc_reduce(global_average_pool(u_hat))

    def channel_select(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return two_way_softmax(self.w_t(z), self.w_g(z))

    def spatial_attention(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.spatial_conv(channel_pool(x)))

    def forward(self, t: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        u_hat = aggregate(t, g)
        if self.mode == FusionMode.DOT_PRODUCT:
            return t * g
        if self.mode == FusionMode.CONCATENATION:
            return self.project(torch.cat([t, g], dim=1))

        s_t, s_g = self.channel_select(self.gate_vector(u_hat))
        s_t = s_t[:, :, None, None]
        s_g = s_g[:, :, None, None]
        if self.mode == FusionMode.CHANNEL_ONLY:
            return s_t * t + s_g * g

        attended_t = self.spatial_attention(t) * s_t * t
        attended_g = self.spatial_attention(g) * s_g * g
        return attended_t + attended_g


class PyramidFusion(nn.Module):
    """Independent LevelFusion per pyramid level."""

    def __init__(
        self,
        mode: FusionMode = FusionMode.SELECTIVE,
        channels: tuple[int, int, int] = PYRAMID_CHANNELS,
    ):
        super().__init__()
        self.levels = nn.ModuleList(LevelFusion(c, mode) for c in channels)

    def forward(self, tp: FeaturePyramid, gp: FeaturePyramid) -> FeaturePyramid:
        fused = [fuse(t, g) for fuse, t, g in zip(self.levels, tp, gp)]
        return FeaturePyramid(*fused)


def fuse_level(t: torch.Tensor, g: torch.Tensor, weights: LevelFusion) -> torch.Tensor:
    return weights(t, g)


def fuse_pyramid(tp: FeaturePyramid, gp: FeaturePyramid, weights: PyramidFusion) -> FeaturePyramid:
    return weights(tp, gp)
