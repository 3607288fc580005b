"""
utils_io.py - readers and writers for the files inside a sequence directory.

Layout of a sequence directory:

    frames/000000.png      8-bit RGB daytime frames
    night/000000.png       optional pre-translated night frames
    depth/000000.bin       optional float32 depth (16-byte header, little endian)
    intrinsics.txt         key=value pinhole parameters
    poses.txt              optional, camera-to-world 4x4 matrices as four rows of four numbers
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import os
import pathlib
import struct
import tempfile
from typing import Callable, Optional

# Import external packages
import numpy as np
from dotenv import dotenv_values
from PIL import Image

# Import functions from local modules
from models.geometry import CameraIntrinsics
from utils.utils_errors import IngestionError
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

FRAMES_DIR = "frames"
NIGHT_DIR = "night"
DEPTH_DIR = "depth"
INTRINSICS_FILE = "intrinsics.txt"
POSES_FILE = "poses.txt"

DEPTH_MAGIC = b"GFDEPTH\x00"
DEPTH_HEADER = struct.Struct("<8sII")  # magic, height, width -> 16 bytes

INTRINSICS_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def frame_name(index: int, suffix: str = ".png") -> str:
    return f"{index:06d}{suffix}"


#####################################
# Atomic Writes
#####################################


def atomic_write(path: pathlib.Path, write: Callable[[pathlib.Path], None]) -> None:
    """Write through a temporary file in the same folder, then rename into place."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    tmp_path = pathlib.Path(tmp_name)
    try:
        write(tmp_path)
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


#####################################
# Images
#####################################


def read_image(path: pathlib.Path) -> np.ndarray:
    """Read an image as float32 HxWx3 in [0, 1]."""
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float32)
    except (OSError, ValueError) as e:
        msg = f"Cannot read image {path}: {e}"
        logger.error(msg)
        raise IngestionError(msg) from e
    return rgb / 255.0


def write_image(path: pathlib.Path, image: np.ndarray) -> None:
    """Write a float HxWx3 image in [0, 1] as an 8-bit PNG."""
    data = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    pathlib.Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path, format="PNG")


#####################################
# Depth Binaries
#####################################


def write_depth(path: pathlib.Path, depth: np.ndarray) -> None:
    depth = np.asarray(depth, dtype="<f4")
    if depth.ndim != 2:
        raise IngestionError(f"Depth map must be 2-D, got shape {depth.shape}")
    height, width = depth.shape
    header = DEPTH_HEADER.pack(DEPTH_MAGIC, height, width)

    def _write(tmp: pathlib.Path) -> None:
        with tmp.open("wb") as f:
            f.write(header)
            f.write(depth.tobytes(order="C"))

    atomic_write(path, _write)


def read_depth(path: pathlib.Path) -> np.ndarray:
    raw = pathlib.Path(path).read_bytes()
    if len(raw) < DEPTH_HEADER.size:
        msg = f"Depth file too short: {path}"
        logger.error(msg)
        raise IngestionError(msg)
    magic, height, width = DEPTH_HEADER.unpack_from(raw)
    if magic != DEPTH_MAGIC:
        msg = f"Bad depth file magic in {path}: {magic!r}"
        logger.error(msg)
        raise IngestionError(msg)
    expected = DEPTH_HEADER.size + 4 * height * width
    if len(raw) != expected:
        msg = f"Depth file {path} has {len(raw)} bytes, expected {expected}"
        logger.error(msg)
        raise IngestionError(msg)
    values = np.frombuffer(raw, dtype="<f4", offset=DEPTH_HEADER.size)
    return values.reshape(height, width).astype(np.float32)


#####################################
# Intrinsics and Poses
#####################################


def write_intrinsics(path: pathlib.Path, intrinsics: CameraIntrinsics) -> None:
    lines = [f"{key}={getattr(intrinsics, key)!r}" for key in INTRINSICS_KEYS]
    pathlib.Path(path).write_text("\n".join(lines) + "\n")


def read_intrinsics(path: pathlib.Path) -> CameraIntrinsics:
    """Parse a key=value intrinsics file. Any problem is a hard ingestion error."""
    path = pathlib.Path(path)
    if not path.is_file():
        msg = f"Missing intrinsics file: {path}"
        logger.error(msg)
        raise IngestionError(msg)
    values = dotenv_values(path)
    missing = [key for key in INTRINSICS_KEYS if not values.get(key)]
    if missing:
        msg = f"Malformed intrinsics file {path}: missing {missing}"
        logger.error(msg)
        raise IngestionError(msg)
    try:
        return CameraIntrinsics(
            fx=float(values["fx"]),
            fy=float(values["fy"]),
            cx=float(values["cx"]),
            cy=float(values["cy"]),
            width=int(float(values["width"])),
            height=int(float(values["height"])),
        )
    except ValueError as e:
        msg = f"Malformed intrinsics file {path}: {e}"
        logger.error(msg)
        raise IngestionError(msg) from e


def write_poses(path: pathlib.Path, poses: np.ndarray) -> None:
    """Write N camera-to-world 4x4 matrices as four rows each, poses separated by a blank line."""
    poses = np.asarray(poses, dtype=np.float64).reshape(-1, 4, 4)
    blocks = ["\n".join(" ".join(f"{v:.17g}" for v in row) for row in pose) for pose in poses]
    pathlib.Path(path).write_text("\n\n".join(blocks) + "\n")


def read_poses(path: pathlib.Path) -> Optional[np.ndarray]:
    """Read 4x4 pose rows. Older files with one flattened 16-value matrix per line also load."""
    path = pathlib.Path(path)
    if not path.is_file():
        return None
    rows = [line.split() for line in path.read_text().splitlines() if line.strip()]
    try:
        values = np.array(rows, dtype=np.float64)
    except ValueError as e:
        msg = f"Malformed pose file {path}: {e}"
        logger.error(msg)
        raise IngestionError(msg) from e
    if values.ndim == 2 and values.shape[1] == 16:
        return values.reshape(-1, 4, 4)
    if values.ndim != 2 or values.shape[1] != 4 or len(values) % 4 != 0:
        msg = f"Malformed pose file {path}: expected rows of 4 values, 4 rows per pose"
        logger.error(msg)
        raise IngestionError(msg)
    return values.reshape(-1, 4, 4)


def list_frame_indices(folder: pathlib.Path) -> list[int]:
    """Sorted frame indices of the %06d.png files in a folder."""
    folder = pathlib.Path(folder)
    if not folder.is_dir():
        return []
    indices = []
    for path in folder.glob("*.png"):
        if path.stem.isdigit():
            indices.append(int(path.stem))
    return sorted(indices)
