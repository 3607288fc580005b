"""
glocalfuse.py - the full two-branch depth network plus its pose network.

The daytime image goes through one encoder and the nighttime image through
the other; both pyramids are fused level by level and decoded to disparity.
EncoderDesign swaps the branch types for the single-family comparisons.
"""

#####################################
# Import Modules
#####################################

# Import external packages
import torch
import torch.nn as nn

# Import functions from local modules
from models.cnn_branch import CNNBranch, cnn_units
from models.decoder import DepthDecoder, disp_to_depth
from models.fusion import PyramidFusion
from models.geometry import PoseTransform
from models.pose_net import PoseNet
from models.transformer_branch import TransformerBranch, transformer_config
from utils.utils_config import EncoderDesign, TrainingConfig
from utils.utils_logger import logger


class GlocalFuse(nn.Module):
    def __init__(self, cfg: TrainingConfig):
        super().__init__()
        self.min_depth = cfg.min_depth
        self.max_depth = cfg.max_depth
        self.encoder_design = cfg.encoder_design

        def cnn() -> nn.Module:
            return CNNBranch(cnn_units(cfg.cnn_preset))

        def transformer() -> nn.Module:
            return TransformerBranch(
                transformer_config(cfg.transformer_preset, cfg.image_height, cfg.image_width)
            )

        if cfg.encoder_design == EncoderDesign.CNN_ONLY:
            self.day_encoder, self.night_encoder = cnn(), cnn()
        elif cfg.encoder_design == EncoderDesign.TRANSFORMER_ONLY:
            self.day_encoder, self.night_encoder = transformer(), transformer()
        else:
            self.day_encoder, self.night_encoder = cnn(), transformer()

        self.fusion = PyramidFusion(cfg.fusion_mode)
        self.decoder = DepthDecoder()
        self.pose_net = PoseNet()

        n_params = sum(p.numel() for p in self.parameters())
        logger.info(
            f"Built GlocalFuse ({cfg.encoder_design.value}, fusion={cfg.fusion_mode.value}) "
            f"with {n_params:,} parameters"
        )

    def predict_disparity(self, day: torch.Tensor, night: torch.Tensor) -> torch.Tensor:
        # Fusion expects (transformer-side, cnn-side); day feeds the CNN side.
        g = self.day_encoder(day)
        t = self.night_encoder(night)
        return self.decoder(self.fusion(t, g))

    def predict_depth(self, day: torch.Tensor, night: torch.Tensor) -> torch.Tensor:
        return disp_to_depth(self.predict_disparity(day, night), self.min_depth, self.max_depth)

    def estimate_pose(self, target: torch.Tensor, source: torch.Tensor) -> PoseTransform:
        return self.pose_net(target, source)


def build_model(cfg: TrainingConfig) -> GlocalFuse:
    return GlocalFuse(cfg)
