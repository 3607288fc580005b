"""
transformer_branch.py - global-context encoder.

Image -> P x P patches -> linear embedding + learnable positional embedding
-> L pre-norm encoder blocks (multi-head self-attention, MLP) -> token grid
reshaped to an H/16 x W/16 map -> two 2x upsampling stages. The three maps
(H/16, H/8, H/4) form the branch's FeaturePyramid.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

# Import external packages
import torch
import torch.nn as nn
from einops import rearrange
from einops.layers.torch import Rearrange

# Import functions from local modules
from utils.utils_errors import ConfigurationError
from utils.utils_logger import logger

#####################################
# Domain Types
#####################################

PYRAMID_CHANNELS = (256, 128, 64)
PYRAMID_STRIDES = (16, 8, 4)


class FeaturePyramid(NamedTuple):
    """Per-branch features at strides 16, 8 and 4 (coarse to fine)."""

    level0: torch.Tensor
    level1: torch.Tensor
    level2: torch.Tensor


def check_pyramid(pyramid: FeaturePyramid, height: int, width: int) -> None:
    """Raise ConfigurationError unless the pyramid has the expected strides and channels."""
    for level, (feature, stride, channels) in enumerate(
        zip(pyramid, PYRAMID_STRIDES, PYRAMID_CHANNELS)
    ):
        expected = (channels, height // stride, width // stride)
        if tuple(feature.shape[1:]) != expected:
            msg = f"Pyramid level {level} has shape {tuple(feature.shape[1:])}, expected {expected}"
            logger.error(msg)
            raise ConfigurationError(msg)


@dataclass(frozen=True)
class TransformerConfig:
    image_height: int = 256
    image_width: int = 512
    patch_size: int = 16
    latent_dim: int = 192
    depth: int = 4
    heads: int = 4
    head_dim: int = 48
    mlp_ratio: float = 4.0
    channels: tuple[int, int, int] = PYRAMID_CHANNELS

    @property
    def grid(self) -> tuple[int, int]:
        return self.image_height // self.patch_size, self.image_width // self.patch_size

    @property
    def num_tokens(self) -> int:
        rows, cols = self.grid
        return rows * cols

    def validate(self) -> None:
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            msg = (
                f"Patch size {self.patch_size} does not divide image "
                f"{self.image_height}x{self.image_width}"
            )
            logger.error(msg)
            raise ConfigurationError(msg)
        if min(self.latent_dim, self.depth, self.heads, self.head_dim) < 1:
            raise ConfigurationError(f"Transformer sizes must be positive: {self}")


TRANSFORMER_PRESETS: dict[str, dict] = {
    "tiny": {"latent_dim": 64, "depth": 2, "heads": 2, "head_dim": 32, "mlp_ratio": 2.0},
    "desk": {"latent_dim": 192, "depth": 4, "heads": 4, "head_dim": 48, "mlp_ratio": 4.0},
    "full": {"latent_dim": 768, "depth": 12, "heads": 12, "head_dim": 64, "mlp_ratio": 4.0},
}


def transformer_config(preset: str, image_height: int, image_width: int) -> TransformerConfig:
    if preset not in TRANSFORMER_PRESETS:
        msg = f"Unknown transformer preset {preset!r}; choose one of {sorted(TRANSFORMER_PRESETS)}"
        logger.error(msg)
        raise ConfigurationError(msg)
    base = TransformerConfig(image_height=image_height, image_width=image_width)
    return replace(base, **TRANSFORMER_PRESETS[preset])


#####################################
# Attention
#####################################


def self_attention(
    q: torch.Tensor, k: torch.Tensor, v: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """softmax(q k^T / sqrt(D_h)) v over the token axis. Returns (output, attention)."""
    scale = q.shape[-1] ** -0.5
    attention = torch.softmax((q @ k.transpose(-2, -1)) * scale, dim=-1)
    return attention @ v, attention


class PatchEmbed(nn.Module):
    """Flatten P x P x 3 patches, project them to D0 and add the positional embedding."""

    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        p = cfg.patch_size
        self.to_patches = Rearrange("b c (h p1) (w p2) -> b (h w) (p1 p2 c)", p1=p, p2=p)
        self.proj = nn.Linear(p * p * 3, cfg.latent_dim)
        self.pos_embedding = nn.Parameter(torch.zeros(1, cfg.num_tokens, cfg.latent_dim))
        nn.init.trunc_normal_(self.pos_embedding, std=0.02)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        expected = (self.cfg.image_height, self.cfg.image_width)
        if tuple(image.shape[-2:]) != expected:
            msg = f"Transformer branch built for {expected}, got image {tuple(image.shape[-2:])}"
            logger.error(msg)
            raise ConfigurationError(msg)
        return self.proj(self.to_patches(image)) + self.pos_embedding


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int, head_dim: int):
        super().__init__()
        self.heads = heads
        self.to_qkv = nn.Linear(dim, 3 * heads * head_dim)
        self.to_out = nn.Linear(heads * head_dim, dim)

    def attend(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        q, k, v = self.to_qkv(z).chunk(3, dim=-1)
        q, k, v = (rearrange(t, "b n (h d) -> b h n d", h=self.heads) for t in (q, k, v))
        out, attention = self_attention(q, k, v)
        return rearrange(out, "b h n d -> b n (h d)"), attention

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        out, _ = self.attend(z)
        return self.to_out(out)


class EncoderBlock(nn.Module):
    """Pre-norm block: z + MSA(LN(z)), then + MLP(LN(.))."""

    def __init__(self, dim: int, heads: int, head_dim: int, mlp_ratio: float):
        super().__init__()
        hidden = int(dim * mlp_ratio)
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadSelfAttention(dim, heads, head_dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z = z + self.attn(self.norm1(z))
        return z + self.mlp(self.norm2(z))


#####################################
# Upsampling Decoder
#####################################


def upsample_stage(in_channels: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
        nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=True),
    )


class PyramidDecoder(nn.Module):
    """Token grid -> t0 (H/16, C0) -> t1 (H/8, C1) -> t2 (H/4, C2)."""

    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        if cfg.patch_size != 16:
            msg = (
                f"Token grid of patch size {cfg.patch_size} cannot be reshaped to the "
                "H/16 x W/16 map the pyramid starts from"
            )
            logger.error(msg)
            raise ConfigurationError(msg)
        c0, c1, c2 = cfg.channels
        self.grid = cfg.grid
        self.to_level0 = nn.Sequential(
            nn.Conv2d(cfg.latent_dim, c0, kernel_size=1, bias=False),
            nn.BatchNorm2d(c0),
            nn.ReLU(inplace=True),
        )
        self.up1 = upsample_stage(c0, c1)
        self.up2 = upsample_stage(c1, c2)

    def forward(self, tokens: torch.Tensor) -> FeaturePyramid:
        rows, cols = self.grid
        if tokens.shape[1] != rows * cols:
            msg = f"Got {tokens.shape[1]} tokens, expected {rows}x{cols}"
            logger.error(msg)
            raise ConfigurationError(msg)
        feature_map = rearrange(tokens, "b (h w) d -> b d h w", h=rows, w=cols)
        t0 = self.to_level0(feature_map)
        t1 = self.up1(t0)
        t2 = self.up2(t1)
        return FeaturePyramid(t0, t1, t2)


#####################################
# Branch
#####################################


class TransformerBranch(nn.Module):
    def __init__(self, cfg: Optional[TransformerConfig] = None):
        super().__init__()
        cfg = cfg or TransformerConfig()
        cfg.validate()
        self.cfg = cfg
        self.patch_embed = PatchEmbed(cfg)
        self.blocks = nn.ModuleList(
            EncoderBlock(cfg.latent_dim, cfg.heads, cfg.head_dim, cfg.mlp_ratio)
            for _ in range(cfg.depth)
        )
        self.norm = nn.LayerNorm(cfg.latent_dim)
        self.decoder = PyramidDecoder(cfg)

    def encode(self, image: torch.Tensor) -> torch.Tensor:
        z = self.patch_embed(image)
        for block in self.blocks:
            z = block(z)
        return self.norm(z)

    def forward(self, image: torch.Tensor) -> FeaturePyramid:
        return self.decoder(self.encode(image))
