"""
cnn_branch.py - local-detail encoder built from the first four ResNet34 blocks.

    block1: 7x7 stride-2 stem, 64 ch                       (H/2)
    block2: 3x3 max-pool + 64-ch residual stage            (H/4)  -> g2
    block3: 128-ch residual stage, stride 2                (H/8)  -> g1
    block4: 256-ch residual stage, stride 2                (H/16) -> g0

The 512-channel fifth stage is left out.
"""

#####################################
# Import Modules
#####################################

# Import external packages
import torch
import torch.nn as nn

# Import functions from local modules
from models.transformer_branch import FeaturePyramid
from utils.utils_errors import ConfigurationError
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

CNN_PRESETS: dict[str, tuple[int, int, int]] = {
    "resnet34": (3, 4, 6),
    "tiny": (1, 1, 1),
}

STAGE_CHANNELS = (64, 128, 256)


def cnn_units(preset: str) -> tuple[int, int, int]:
    if preset not in CNN_PRESETS:
        msg = f"Unknown CNN preset {preset!r}; choose one of {sorted(CNN_PRESETS)}"
        logger.error(msg)
        raise ConfigurationError(msg)
    return CNN_PRESETS[preset]


#####################################
# Residual Units
#####################################


class ResidualUnit(nn.Module):
    """ResNet basic block: two 3x3 convs plus an identity or 1x1 projection shortcut."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU(inplace=True)

        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


def residual_stage(in_channels: int, out_channels: int, units: int, stride: int) -> nn.Sequential:
    layers = [ResidualUnit(in_channels, out_channels, stride)]
    layers += [ResidualUnit(out_channels, out_channels) for _ in range(units - 1)]
    return nn.Sequential(*layers)


#####################################
# Branch
#####################################


class CNNBranch(nn.Module):
    def __init__(self, units: tuple[int, int, int] = CNN_PRESETS["resnet34"]):
        super().__init__()
        c64, c128, c256 = STAGE_CHANNELS
        self.stem = nn.Sequential(
            nn.Conv2d(3, c64, kernel_size=7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(c64),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.MaxPool2d(kernel_size=3, stride=2, padding=1)
        self.stage2 = residual_stage(c64, c64, units[0], stride=1)
        self.stage3 = residual_stage(c64, c128, units[1], stride=2)
        self.stage4 = residual_stage(c128, c256, units[2], stride=2)

        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_normal_(module.weight, mode="fan_out", nonlinearity="relu")

    def forward(self, image: torch.Tensor) -> FeaturePyramid:
        height, width = image.shape[-2:]
        if height % 16 or width % 16:
            msg = f"CNN branch needs H, W divisible by 16, got {height}x{width}"
            logger.error(msg)
            raise ConfigurationError(msg)
        x = self.stem(image)
        g2 = self.stage2(self.pool(x))
        g1 = self.stage3(g2)
        g0 = self.stage4(g1)
        return FeaturePyramid(g0, g1, g2)
