"""
pose_net.py - relative camera motion between a target and a source frame.

Five stride-2 convolutions over the 6-channel concatenation, a global average,
and a linear head to (axis-angle, translation). The head starts at zero, so an
untrained network returns the identity pose.
"""

#####################################
# Import Modules
#####################################

# Import external packages
import torch
import torch.nn as nn

# Import functions from local modules
from models.geometry import PoseTransform
from utils.utils_errors import ContractViolation
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

POSE_CHANNELS = (16, 32, 64, 128, 256)
POSE_SCALE = 0.01


class PoseNet(nn.Module):
    def __init__(self, channels: tuple[int, ...] = POSE_CHANNELS, scale: float = POSE_SCALE):
        super().__init__()
        layers: list[nn.Module] = []
        in_channels = 6
        for out_channels in channels:
            layers += [
                nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=2, padding=1),
                nn.ReLU(inplace=True),
            ]
            in_channels = out_channels
        self.encoder = nn.Sequential(*layers)
        self.head = nn.Linear(in_channels, 6)
        self.scale = scale
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, target: torch.Tensor, source: torch.Tensor) -> PoseTransform:
        """Pose mapping target-camera points into the source camera."""
        if target.shape != source.shape:
            msg = f"Pose inputs differ in shape: {tuple(target.shape)} vs {tuple(source.shape)}"
            logger.error(msg)
            raise ContractViolation(msg)
        features = self.encoder(torch.cat([target, source], dim=1)).mean(dim=(2, 3))
        params = self.scale * self.head(features)
        return PoseTransform(axis_angle=params[:, :3], translation=params[:, 3:])


def estimate_pose(frame_a: torch.Tensor, frame_b: torch.Tensor, net: PoseNet) -> PoseTransform:
    return net(frame_a, frame_b)
