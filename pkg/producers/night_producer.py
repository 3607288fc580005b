"""
night_producer.py

Produce the nighttime half of a day-night image pair.

The default translator is a photometric stub: desaturate, apply a gamma
curve, add a few warm light-source blobs and sensor noise. It never moves a
pixel, so a translated pair keeps exactly the geometry (and depth) of the
daytime frame. Pre-translated frames from another tool can be used instead
by pointing the loader at a directory of PNGs with the same frame names.

Run directly to translate a folder of frames:

    python -m producers.night_producer --in DIR --out DIR --seed 0
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import argparse
import pathlib
from dataclasses import dataclass
from typing import Optional

# Import external packages
import torch

# Import functions from local modules
from utils.utils_errors import IngestionError
from utils.utils_io import FRAMES_DIR, frame_name, list_frame_indices, read_image, write_image
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

BLOB_TINT = (1.0, 0.85, 0.6)  # sodium-lamp orange


@dataclass(frozen=True)
class NightStyle:
    gamma: float = 2.2
    desaturation: float = 0.5
    noise_sigma: float = 0.02
    blobs: int = 4
    blob_radius: float = 0.06  # fraction of image width
    blob_strength: float = 0.8


def frame_seed(base_seed: int, frame_index: int) -> int:
    """Seed used for the stub translation of one frame."""
    return base_seed * 100_003 + frame_index


#####################################
# Translators
#####################################


def _light_blobs(
    batch: int, height: int, width: int, style: NightStyle, generator: torch.Generator
) -> torch.Tensor:
    """Sum of Gaussian blobs clipped to [0, 1], shape B x 1 x H x W."""
    if style.blobs <= 0:
        return torch.zeros(batch, 1, height, width)
    ys = torch.arange(height, dtype=torch.float32).view(1, 1, height, 1)
    xs = torch.arange(width, dtype=torch.float32).view(1, 1, 1, width)
    centers = torch.rand(batch, style.blobs, 2, generator=generator)
    cy = (centers[..., 0] * height).view(batch, style.blobs, 1, 1)
    cx = (centers[..., 1] * width).view(batch, style.blobs, 1, 1)
    radius = style.blob_radius * width
    dist_sq = (ys - cy) ** 2 + (xs - cx) ** 2
    blobs = torch.exp(-dist_sq / (2.0 * radius * radius)).sum(dim=1, keepdim=True)
    return blobs.clamp(max=1.0)


def translate_day_to_night(
    day: torch.Tensor, seed: int = 0, style: Optional[NightStyle] = None
) -> torch.Tensor:
    """Darken a [0, 1] image (3 x H x W or B x 3 x H x W) into a stub nighttime image."""
    style = style or NightStyle()
    unbatched = day.dim() == 3
    x = day.unsqueeze(0) if unbatched else day
    x = x.to(torch.float32).clamp(0.0, 1.0)
    batch, _, height, width = x.shape
    generator = torch.Generator().manual_seed(seed)

    gray = x.mean(dim=1, keepdim=True)
    desaturated = gray + (1.0 - style.desaturation) * (x - gray)
    dark = desaturated.pow(style.gamma)

    # lamps give back part of the removed light, never more than the day value
    tint = torch.tensor(BLOB_TINT).view(1, 3, 1, 1)
    blobs = _light_blobs(batch, height, width, style, generator)
    night = dark + style.blob_strength * blobs * tint * (desaturated - dark)

    if style.noise_sigma > 0:
        noise = torch.randn(night.shape, generator=generator) * style.noise_sigma
        night = night + noise
    # sensor noise may darken a pixel but never lift it above the desaturated day value
    night = torch.minimum(night.clamp(min=0.0), desaturated)
    return night[0] if unbatched else night


def translate_night_to_day(night: torch.Tensor, style: Optional[NightStyle] = None) -> torch.Tensor:
    """Approximate inverse of the stub: undo the gamma curve and restore chroma."""
    style = style or NightStyle()
    x = night.to(torch.float32).clamp(0.0, 1.0)
    bright = x.pow(1.0 / style.gamma)
    gray = bright.mean(dim=-3, keepdim=True)
    keep = max(1.0 - style.desaturation, 1e-6)
    return (gray + (bright - gray) / keep).clamp(0.0, 1.0)


#####################################
# Directory Translation
#####################################


def translate_directory(
    in_dir: pathlib.Path,
    out_dir: pathlib.Path,
    seed: int = 0,
    style: Optional[NightStyle] = None,
) -> int:
    """Translate every %06d.png in in_dir (or in_dir/frames) into out_dir. Returns the count."""
    in_dir = pathlib.Path(in_dir)
    out_dir = pathlib.Path(out_dir)
    if in_dir.joinpath(FRAMES_DIR).is_dir():
        in_dir = in_dir.joinpath(FRAMES_DIR)
    if in_dir.resolve() == out_dir.resolve():
        msg = f"Refusing to translate {in_dir} in place"
        logger.error(msg)
        raise IngestionError(msg)

    indices = list_frame_indices(in_dir)
    if not indices:
        msg = f"No frames found in {in_dir}"
        logger.error(msg)
        raise IngestionError(msg)

    out_dir.mkdir(parents=True, exist_ok=True)
    for index in indices:
        day = torch.from_numpy(read_image(in_dir.joinpath(frame_name(index)))).permute(2, 0, 1)
        night = translate_day_to_night(day, frame_seed(seed, index), style)
        write_image(out_dir.joinpath(frame_name(index)), night.permute(1, 2, 0).numpy())
    logger.info(f"Translated {len(indices)} frames from {in_dir} to {out_dir}")
    return len(indices)


#####################################
# Main Function
#####################################


def main() -> None:
    parser = argparse.ArgumentParser(description="Stub day-to-night translation of a frame folder.")
    parser.add_argument("--in", dest="in_dir", required=True, type=pathlib.Path)
    parser.add_argument("--out", dest="out_dir", required=True, type=pathlib.Path)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    logger.info("START night producer.")
    translate_directory(args.in_dir, args.out_dir, args.seed)
    logger.info("END night producer.")


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    main()
