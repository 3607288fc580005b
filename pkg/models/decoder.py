"""
decoder.py - attention-gated skip-connection decoder and disparity -> depth.

Starting from the fused H/16 map, each finer fused level is gated by the
current (coarser) decoder state, concatenated with the upsampled state and
convolved. Two more upsample + conv stages reach full resolution, and a 3x3
conv + sigmoid emits disparity in (0, 1).
"""

#####################################
# Import Modules
#####################################

# Import external packages
import torch
import torch.nn as nn
import torch.nn.functional as F

# Import functions from local modules
from models.transformer_branch import PYRAMID_CHANNELS, FeaturePyramid
from utils.utils_errors import ConfigurationError, ContractViolation
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

DECODER_CHANNELS = (256, 128, 64, 32, 16)

#####################################
# Building Blocks
#####################################


def conv_block(in_channels: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=True),
    )


def upsample2x(x: torch.Tensor) -> torch.Tensor:
    return F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


class AttentionGate(nn.Module):
    """Additive attention: skip * sigmoid(psi(relu(W_x skip + up(W_g gating))))."""

    def __init__(self, skip_channels: int, gating_channels: int, inter_channels: int):
        super().__init__()
        self.w_x = nn.Conv2d(skip_channels, inter_channels, kernel_size=1, bias=True)
        self.w_g = nn.Conv2d(gating_channels, inter_channels, kernel_size=1, bias=True)
        self.psi = nn.Conv2d(inter_channels, 1, kernel_size=1, bias=True)

    def coefficients(self, skip: torch.Tensor, gating: torch.Tensor) -> torch.Tensor:
        skip_hw = tuple(skip.shape[-2:])
        gating_hw = tuple(gating.shape[-2:])
        if (gating_hw[0] * 2, gating_hw[1] * 2) != skip_hw:
            msg = f"Gating map {gating_hw} must be half the skip map {skip_hw}"
            logger.error(msg)
            raise ContractViolation(msg)
        combined = self.w_x(skip) + upsample2x(self.w_g(gating))
        return torch.sigmoid(self.psi(F.relu(combined)))

    def forward(self, skip: torch.Tensor, gating: torch.Tensor) -> torch.Tensor:
        return skip * self.coefficients(skip, gating)


#####################################
# Decoder
#####################################


class DepthDecoder(nn.Module):
    def __init__(
        self,
        pyramid_channels: tuple[int, int, int] = PYRAMID_CHANNELS,
        channels: tuple[int, ...] = DECODER_CHANNELS,
    ):
        super().__init__()
        c0, c1, c2 = pyramid_channels
        d0, d1, d2, d3, d4 = channels

        self.entry = conv_block(c0, d0)
        self.gate1 = AttentionGate(c1, d0, max(c1 // 2, 1))
        self.fuse1 = conv_block(d0 + c1, d1)
        self.gate2 = AttentionGate(c2, d1, max(c2 // 2, 1))
        self.fuse2 = conv_block(d1 + c2, d2)
        self.up3 = conv_block(d2, d3)
        self.up4 = conv_block(d3, d4)
        self.head = nn.Conv2d(d4, 1, kernel_size=3, padding=1)

    def forward(self, fp: FeaturePyramid) -> torch.Tensor:
        x = self.entry(fp.level0)

        gated = self.gate1(fp.level1, x)
        x = self.fuse1(torch.cat([upsample2x(x), gated], dim=1))

        gated = self.gate2(fp.level2, x)
        x = self.fuse2(torch.cat([upsample2x(x), gated], dim=1))

        x = self.up3(upsample2x(x))
        x = self.up4(upsample2x(x))
        return torch.sigmoid(self.head(x))


def decode(fp: FeaturePyramid, decoder: DepthDecoder) -> torch.Tensor:
    return decoder(fp)


#####################################
# Disparity to Depth
#####################################


def disp_to_depth(disp: torch.Tensor, d_min: float = 0.1, d_max: float = 100.0) -> torch.Tensor:
    """depth = 1 / (1/d_max + (1/d_min - 1/d_max) * disp), so disp 1 -> d_min, disp 0 -> d_max."""
    if not 0.0 < d_min <= d_max:
        msg = f"Depth bounds need 0 < d_min <= d_max, got ({d_min}, {d_max})"
        logger.error(msg)
        raise ConfigurationError(msg)
    min_inv = 1.0 / d_max
    max_inv = 1.0 / d_min
    return 1.0 / (min_inv + (max_inv - min_inv) * disp)
