"""
sequence_producer.py

Turn a sequence directory into training samples.

Each sample is a target frame with its two temporal neighbours (t-1, t+1),
preprocessed to the network resolution, together with the matching night
frames. Night frames come from the stub translator or from a pre-translated
directory; the pair-mode ablations replace one side with a copy of the other.

Every sample is a dict of tensors so the default torch collate works:

    index  int                frame number of the target
    day    3 x 3 x H x W      (target, previous, next) in [0, 1]
    night  3 x 3 x H x W      same order, pixel aligned with day
    K      3 x 3              intrinsics after preprocessing
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import pathlib
from dataclasses import dataclass
from typing import Iterator, Optional

# Import external packages
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, Dataset

# Import functions from local modules
from models.geometry import CameraIntrinsics
from producers.night_producer import NightStyle, frame_seed, translate_day_to_night
from utils.utils_config import PairMode, TrainingConfig, TranslatorKind
from utils.utils_errors import IngestionError
from utils.utils_io import (
    DEPTH_DIR,
    FRAMES_DIR,
    INTRINSICS_FILE,
    NIGHT_DIR,
    frame_name,
    list_frame_indices,
    read_depth,
    read_image,
    read_intrinsics,
)
from utils.utils_logger import logger

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class PreprocessConfig:
    image_height: int = 256
    image_width: int = 512
    crop: bool = True
    crop_height: int = 640
    crop_width: int = 1280

    @classmethod
    def from_training(cls, cfg: TrainingConfig) -> "PreprocessConfig":
        return cls(
            image_height=cfg.image_height,
            image_width=cfg.image_width,
            crop=cfg.crop,
            crop_height=cfg.crop_height,
            crop_width=cfg.crop_width,
        )


@dataclass
class FrameTriplet:
    target: torch.Tensor  # 3 x H x W
    sources: tuple[torch.Tensor, torch.Tensor]  # (t-1, t+1)
    intrinsics: CameraIntrinsics
    index: int


@dataclass
class DayNightPair:
    day: torch.Tensor  # 3 x 3 x H x W, order (t, t-1, t+1)
    night: torch.Tensor


@dataclass
class FrameRecord:
    """One preprocessed frame with whatever ground truth exists for it."""

    index: int
    day: torch.Tensor
    night: torch.Tensor
    depth: Optional[torch.Tensor]  # 1 x H x W


def night_style(cfg: TrainingConfig) -> NightStyle:
    return NightStyle(
        gamma=cfg.night_gamma,
        desaturation=cfg.night_desaturation,
        noise_sigma=cfg.night_noise_sigma,
        blobs=cfg.night_blobs,
    )


#####################################
# Preprocessing
#####################################


def crop_window(height: int, width: int, cfg: PreprocessConfig) -> tuple[int, int, int, int]:
    """(top, left, height, width) of the centre crop, or the full frame when cropping is off."""
    if not cfg.crop:
        return 0, 0, height, width
    if height < cfg.crop_height or width < cfg.crop_width:
        msg = (
            f"Image {height}x{width} is smaller than the "
            f"{cfg.crop_height}x{cfg.crop_width} crop"
        )
        logger.error(msg)
        raise IngestionError(msg)
    top = (height - cfg.crop_height) // 2
    left = (width - cfg.crop_width) // 2
    return top, left, cfg.crop_height, cfg.crop_width


def preprocess(
    raw: torch.Tensor,
    intrinsics: Optional[CameraIntrinsics],
    cfg: PreprocessConfig,
) -> tuple[torch.Tensor, Optional[CameraIntrinsics]]:
    """Centre crop then bilinear resize a 3 x H x W image, rescaling the intrinsics to match."""
    height, width = raw.shape[-2:]
    top, left, crop_h, crop_w = crop_window(height, width, cfg)
    image = raw[..., top : top + crop_h, left : left + crop_w]

    out_size = (cfg.image_height, cfg.image_width)
    if (crop_h, crop_w) != out_size:
        image = F.interpolate(
            image.unsqueeze(0), size=out_size, mode="bilinear", align_corners=False, antialias=True
        ).squeeze(0)
    image = image.clamp(0.0, 1.0).contiguous()

    if intrinsics is None:
        return image, None
    new_k = intrinsics.crop(top, left, crop_h, crop_w).resize(*out_size)
    return image, new_k


def preprocess_depth(raw: torch.Tensor, cfg: PreprocessConfig) -> torch.Tensor:
    """Same window as preprocess(), nearest resampling so no depth is invented at edges."""
    height, width = raw.shape[-2:]
    top, left, crop_h, crop_w = crop_window(height, width, cfg)
    depth = raw[..., top : top + crop_h, left : left + crop_w]
    out_size = (cfg.image_height, cfg.image_width)
    if (crop_h, crop_w) != out_size:
        depth = F.interpolate(depth[None], size=out_size, mode="nearest")[0]
    return depth.contiguous()


def load_image_tensor(path: pathlib.Path) -> torch.Tensor:
    return torch.from_numpy(read_image(path)).permute(2, 0, 1).contiguous()


#####################################
# Dataset
#####################################


class SequenceDataset(Dataset):
    """Triplets of a sequence directory, preprocessed and paired with night frames."""

    def __init__(self, root: pathlib.Path, cfg: TrainingConfig):
        self.root = pathlib.Path(root)
        self.cfg = cfg
        self.pre = PreprocessConfig.from_training(cfg)
        self.style = night_style(cfg)

        self.raw_intrinsics = read_intrinsics(self.root.joinpath(INTRINSICS_FILE))
        raw_k = self.raw_intrinsics
        _, self.intrinsics = preprocess(torch.zeros(3, raw_k.height, raw_k.width), raw_k, self.pre)

        self.night_dir: Optional[pathlib.Path] = None
        if cfg.translator == TranslatorKind.EXTERNAL_DIR:
            self.night_dir = pathlib.Path(cfg.night_dir) if cfg.night_dir else self.root / NIGHT_DIR
            if not self.night_dir.is_dir():
                msg = f"External night directory not found: {self.night_dir}"
                logger.error(msg)
                raise IngestionError(msg)

        self.frame_indices = self._usable_frames()
        self.triplets = self._triplet_targets()
        logger.info(
            f"Loaded sequence {self.root}: {len(self.frame_indices)} frames, "
            f"{len(self.triplets)} triplets ({cfg.pair_mode.value}, {cfg.translator.value})"
        )

    def _usable_frames(self) -> list[int]:
        indices = list_frame_indices(self.root / FRAMES_DIR)
        if self.night_dir is None:
            return indices
        night = set(list_frame_indices(self.night_dir))
        missing = [i for i in indices if i not in night]
        for index in missing:
            logger.warning(f"Skipping frame {index}: no night frame in {self.night_dir}")
        return [i for i in indices if i in night]

    def _triplet_targets(self) -> list[int]:
        present = set(self.frame_indices)
        if not present:
            return []
        first, last = min(present), max(present)
        targets = []
        for index in self.frame_indices:
            if index - 1 in present and index + 1 in present:
                targets.append(index)
            elif index not in (first, last):
                logger.warning(f"Skipping target frame {index}: a neighbouring frame is missing")
        return targets

    def __len__(self) -> int:
        return len(self.triplets)

    #####################################
    # Frame Access
    #####################################

    def _load_raw(self, path: pathlib.Path) -> torch.Tensor:
        raw = load_image_tensor(path)
        expected = (self.raw_intrinsics.height, self.raw_intrinsics.width)
        if tuple(raw.shape[-2:]) != expected:
            msg = (
                f"Frame {path} is {raw.shape[-1]}x{raw.shape[-2]} but {INTRINSICS_FILE} "
                f"describes {expected[1]}x{expected[0]}"
            )
            logger.error(msg)
            raise IngestionError(msg)
        return raw

    def day_frame(self, index: int) -> torch.Tensor:
        raw = self._load_raw(self.root / FRAMES_DIR / frame_name(index))
        image, _ = preprocess(raw, None, self.pre)
        return image

    def night_frame(self, index: int, day: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.night_dir is not None:
            raw = self._load_raw(self.night_dir / frame_name(index))
            image, _ = preprocess(raw, None, self.pre)
            return image
        day = self.day_frame(index) if day is None else day
        return translate_day_to_night(day, frame_seed(self.cfg.seed, index), self.style)

    def depth_frame(self, index: int) -> Optional[torch.Tensor]:
        path = self.root / DEPTH_DIR / frame_name(index, ".bin")
        if not path.is_file():
            return None
        raw = torch.from_numpy(read_depth(path))[None]
        return preprocess_depth(raw, self.pre)

    def pair_frames(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        """(day, night) for one frame after applying the pair mode."""
        if self.cfg.pair_mode == PairMode.NIGHT_NIGHT:
            night = self.night_frame(index)
            return night.clone(), night
        day = self.day_frame(index)
        if self.cfg.pair_mode == PairMode.DAY_DAY:
            return day, day.clone()
        return day, self.night_frame(index, day)

    def frame(self, index: int) -> FrameRecord:
        day = self.day_frame(index)
        return FrameRecord(
            index=index,
            day=day,
            night=self.night_frame(index, day),
            depth=self.depth_frame(index),
        )

    def __getitem__(self, item: int) -> dict[str, torch.Tensor]:
        index = self.triplets[item]
        days, nights = [], []
        for frame in (index, index - 1, index + 1):
            day, night = self.pair_frames(frame)
            days.append(day)
            nights.append(night)
        return {
            "index": index,
            "day": torch.stack(days),
            "night": torch.stack(nights),
            "K": self.intrinsics.matrix(),
        }


#####################################
# Iteration and Batching
#####################################


def load_sequence(
    root: pathlib.Path, cfg: TrainingConfig
) -> Iterator[tuple[FrameTriplet, DayNightPair]]:
    """Yield (FrameTriplet, DayNightPair) for every target with both neighbours present."""
    dataset = SequenceDataset(root, cfg)
    for item in range(len(dataset)):
        sample = dataset[item]
        day = sample["day"]
        triplet = FrameTriplet(
            target=day[0],
            sources=(day[1], day[2]),
            intrinsics=dataset.intrinsics,
            index=sample["index"],
        )
        yield triplet, DayNightPair(day=day, night=sample["night"])


def steps_per_epoch(n_samples: int, batch_size: int) -> int:
    """Full batches per epoch; a dataset smaller than one batch still gives one step."""
    if n_samples == 0:
        return 0
    return max(n_samples // batch_size, 1)


def epoch_batches(n_samples: int, batch_size: int, seed: int, epoch: int) -> list[list[int]]:
    """Shuffled sample indices for one epoch, seeded by (seed, epoch)."""
    generator = torch.Generator().manual_seed(seed + epoch)
    order = torch.randperm(n_samples, generator=generator).tolist()
    batches = [order[i : i + batch_size] for i in range(0, n_samples, batch_size)]
    if n_samples >= batch_size:
        batches = [b for b in batches if len(b) == batch_size]
    return batches


def epoch_loader(
    dataset: SequenceDataset,
    batch_size: int,
    seed: int,
    epoch: int,
    skip_batches: int = 0,
    workers: int = 0,
) -> DataLoader:
    """DataLoader over one epoch, optionally resuming after skip_batches batches."""
    batches = epoch_batches(len(dataset), batch_size, seed, epoch)[skip_batches:]
    return DataLoader(dataset, batch_sampler=batches, num_workers=workers)

