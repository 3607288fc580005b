"""
utils_config.py - configuration shared by producers, consumers, and the CLI.

Environment variables come from a .env file (python-dotenv) with one small
getter per variable. Training runs are described by a typed TrainingConfig;
config files are key=value text in the same syntax as .env files.

Precedence when building a TrainingConfig: CLI flag > config file > preset.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import dataclasses
import enum
import os
import pathlib
import typing
from dataclasses import dataclass
from typing import Any, Mapping, Optional

# Import external packages
from dotenv import dotenv_values, load_dotenv

# Import functions from local modules
from utils.utils_errors import ConfigurationError
from utils.utils_logger import logger

#####################################
# Load Environment Variables
#####################################

load_dotenv()

#####################################
# Getter Functions for .env Variables
#####################################


def get_output_root() -> pathlib.Path:
    """Fetch the default output root from environment or use default."""
    root = pathlib.Path(os.getenv("GLOCALFUSE_OUTPUT_ROOT", "outputs"))
    logger.info(f"Output root: {root}")
    return root


def get_default_workers() -> int:
    """Fetch the default number of loader workers from environment or use default."""
    workers = int(os.getenv("GLOCALFUSE_WORKERS", 0))
    logger.info(f"Loader workers: {workers}")
    return workers


#####################################
# Enumerated Options
#####################################


class EncoderDesign(str, enum.Enum):
    GLOCAL = "glocal"
    CNN_ONLY = "cnn_only"
    TRANSFORMER_ONLY = "transformer_only"


class FusionMode(str, enum.Enum):
    SELECTIVE = "selective"
    CONCATENATION = "concatenation"
    DOT_PRODUCT = "dot_product"
    CHANNEL_ONLY = "channel_only"


class PairMode(str, enum.Enum):
    DAY_NIGHT = "day-night"
    DAY_DAY = "day-day"
    NIGHT_NIGHT = "night-night"


class TranslatorKind(str, enum.Enum):
    STUB = "stub"
    EXTERNAL_DIR = "external-dir"


class SourceAggregation(str, enum.Enum):
    MEAN = "mean"
    PER_PIXEL_MIN = "per_pixel_min"


#####################################
# Training Configuration
#####################################


@dataclass
class TrainingConfig:
    """Everything a training run needs; also snapshotted into every checkpoint."""

    # optimisation
    epochs: int = 30
    batch_size: int = 16
    lr_peak: float = 1e-5
    warmup_epochs: int = 5
    beta1: float = 0.9
    beta2: float = 0.99
    grad_clip: Optional[float] = None
    seed: int = 0
    max_steps: Optional[int] = None

    # loss
    alpha: float = 0.85
    source_aggregation: SourceAggregation = SourceAggregation.MEAN
    ssim_window: int = 3
    smoothness_weight: float = 0.0

    # network
    encoder_design: EncoderDesign = EncoderDesign.GLOCAL
    fusion_mode: FusionMode = FusionMode.SELECTIVE
    cnn_preset: str = "resnet34"
    transformer_preset: str = "desk"
    min_depth: float = 0.1
    max_depth: float = 100.0

    # data
    image_height: int = 256
    image_width: int = 512
    crop: bool = True
    crop_height: int = 640
    crop_width: int = 1280
    pair_mode: PairMode = PairMode.DAY_NIGHT
    translator: TranslatorKind = TranslatorKind.STUB
    night_dir: Optional[str] = None
    night_gamma: float = 2.2
    night_desaturation: float = 0.5
    night_noise_sigma: float = 0.02
    night_blobs: int = 4
    workers: int = 0

    # bookkeeping
    checkpoint_every: int = 0
    log_every: int = 10
    deterministic: bool = True

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            field_type = _field_types()[field.name]
            if isinstance(field_type, type) and issubclass(field_type, enum.Enum):
                setattr(self, field.name, _coerce_enum(field_type, value, field.name))
        self.validate()

    def validate(self) -> None:
        """Check field invariants and raise ConfigurationError on the first violation."""
        problems: list[str] = []
        if self.lr_peak <= 0:
            problems.append(f"lr_peak must be > 0, got {self.lr_peak}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0 or self.warmup_epochs < 0:
            problems.append("epochs and warmup_epochs must be non-negative")
        if self.epochs > 0 and self.warmup_epochs >= self.epochs:
            problems.append(
                f"warmup_epochs ({self.warmup_epochs}) must be < epochs ({self.epochs})"
            )
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            problems.append(f"ssim_window must be odd and >= 3, got {self.ssim_window}")
        if self.image_height % 16 or self.image_width % 16:
            problems.append(
                f"image size {self.image_height}x{self.image_width} must be divisible by 16"
            )
        if not 0.0 < self.min_depth <= self.max_depth:
            problems.append(
                f"depth bounds need 0 < min_depth <= max_depth, got "
                f"({self.min_depth}, {self.max_depth})"
            )
        if self.max_steps is not None and self.max_steps < 0:
            problems.append(f"max_steps must be >= 0, got {self.max_steps}")
        if problems:
            msg = "Invalid training configuration: " + "; ".join(problems)
            logger.error(msg)
            raise ConfigurationError(msg)

    def to_dict(self) -> dict[str, Any]:
        """Plain-type snapshot (enums as their string values)."""
        out: dict[str, Any] = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            out[field.name] = value.value if isinstance(value, enum.Enum) else value
        return out

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            msg = f"Unknown configuration keys: {unknown}"
            logger.error(msg)
            raise ConfigurationError(msg)
        return cls(**{k: coerce_field(k, v) for k, v in values.items()})


PRESETS: dict[str, dict[str, Any]] = {
    "full": {
        "transformer_preset": "full",
    },
    "desk": {
        "epochs": 60,
        "batch_size": 2,
        "lr_peak": 2e-4,
        "warmup_epochs": 1,
        "grad_clip": 10.0,
        "cnn_preset": "tiny",
        "transformer_preset": "tiny",
        "image_height": 96,
        "image_width": 160,
        "crop": False,
        "log_every": 25,
        "smoothness_weight": 1e-3,
    },
}


#####################################
# Coercion Helpers
#####################################


def _field_types() -> dict[str, Any]:
    return typing.get_type_hints(TrainingConfig)


def _coerce_enum(enum_type: type, value: Any, name: str) -> enum.Enum:
    if isinstance(value, enum_type):
        return value
    try:
        return enum_type(str(value).strip().lower())
    except ValueError:
        options = [member.value for member in enum_type]
        msg = f"Invalid value {value!r} for {name}; choose one of {options}"
        logger.error(msg)
        raise ConfigurationError(msg) from None


def _parse_bool(raw: str, name: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in {"1", "true", "yes", "on"}:
        return True
    if lowered in {"0", "false", "no", "off"}:
        return False
    msg = f"Invalid boolean {raw!r} for {name}"
    logger.error(msg)
    raise ConfigurationError(msg)


def coerce_field(name: str, value: Any) -> Any:
    """Convert a raw (usually string) value to the declared type of a TrainingConfig field."""
    types = _field_types()
    if name not in types:
        msg = f"Unknown configuration key: {name}"
        logger.error(msg)
        raise ConfigurationError(msg)
    if not isinstance(value, str):
        return value

    target = types[name]
    raw = value.strip()
    if typing.get_origin(target) is typing.Union:
        if raw.lower() in {"", "none", "null"}:
            return None
        target = next(arg for arg in typing.get_args(target) if arg is not type(None))

    try:
        if target is bool:
            return _parse_bool(raw, name)
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
        if isinstance(target, type) and issubclass(target, enum.Enum):
            return _coerce_enum(target, raw, name)
    except ValueError as e:
        if isinstance(e, ConfigurationError):
            raise
        msg = f"Cannot parse {raw!r} for {name}: {e}"
        logger.error(msg)
        raise ConfigurationError(msg) from e
    return raw


#####################################
# Config Files and Resolution
#####################################


def read_config_file(path: pathlib.Path) -> dict[str, str]:
    """Read a key=value config file (dotenv syntax). Keys are lower-cased."""
    path = pathlib.Path(path)
    if not path.is_file():
        msg = f"Config file not found: {path}"
        logger.error(msg)
        raise ConfigurationError(msg)
    values = dotenv_values(path)
    parsed = {key.strip().lower(): (val or "") for key, val in values.items()}
    logger.info(f"Read {len(parsed)} settings from config file {path}")
    return parsed


def build_training_config(
    preset: str = "desk",
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> TrainingConfig:
    """Merge preset < config file < overrides into a validated TrainingConfig."""
    if preset not in PRESETS:
        msg = f"Unknown preset {preset!r}; choose one of {sorted(PRESETS)}"
        logger.error(msg)
        raise ConfigurationError(msg)

    merged: dict[str, Any] = dict(PRESETS[preset])
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return TrainingConfig.from_dict(merged)


def log_config(cfg: TrainingConfig) -> None:
    """Print the resolved configuration, one field per line."""
    logger.info("Resolved training configuration:")
    for key, value in cfg.to_dict().items():
        logger.info(f"  {key} = {value}")
