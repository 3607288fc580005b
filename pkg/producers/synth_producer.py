"""
synth_producer.py

Render a synthetic driving-like sequence with exact ground truth.

The scene is a textured fronto-parallel back wall plus a few axis-aligned
boxes, seen by a pinhole camera that moves forward with a gentle lateral
sway and yaw. Every pixel is ray cast analytically, so the depth map and the
camera poses written next to the frames are exact (up to float32 storage).

Textures are smooth sums of 3-D sinusoids evaluated at the world-space hit
point. That keeps the photometric signal consistent between frames, which is
what view synthesis needs.

Output directory layout:

    frames/000000.png
    depth/000000.bin
    intrinsics.txt
    poses.txt          camera-to-world 4x4 matrices, four rows each

Run directly:

    python -m producers.synth_producer --out DIR --frames 20 --seed 0
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import argparse
import pathlib
from dataclasses import dataclass, replace
from typing import Optional

# Import external packages
import numpy as np

# Import functions from local modules
from models.geometry import CameraIntrinsics
from utils.utils_errors import ConfigurationError
from utils.utils_io import (
    DEPTH_DIR,
    FRAMES_DIR,
    INTRINSICS_FILE,
    POSES_FILE,
    frame_name,
    write_depth,
    write_image,
    write_intrinsics,
    write_poses,
)
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

MAX_TRAVEL = 3.0  # metres; keeps the camera well in front of every surface
SWAY_PERIOD = 24.0  # frames
TEXTURE_WAVES = 6


@dataclass(frozen=True)
class SceneSpec:
    height: int = 96
    width: int = 160
    focal_ratio: float = 0.6  # fx = fy = focal_ratio * width
    wall_depth: float = 14.0
    boxes: int = 4
    box_depth_range: tuple[float, float] = (6.0, 10.0)
    box_size_range: tuple[float, float] = (0.8, 1.8)
    speed: float = 0.15  # metres per frame before the travel cap
    sway: float = 0.3  # lateral amplitude, metres
    yaw: float = 0.03  # radians
    min_wavelength: float = 1.2  # metres
    max_wavelength: float = 4.0


SCENES: dict[str, SceneSpec] = {
    "default": SceneSpec(),
    "plane": SceneSpec(boxes=0, yaw=0.0),
}


def scene_spec(name: str, height: Optional[int] = None, width: Optional[int] = None) -> SceneSpec:
    if name not in SCENES:
        msg = f"Unknown scene {name!r}; choose one of {sorted(SCENES)}"
        logger.error(msg)
        raise ConfigurationError(msg)
    spec = SCENES[name]
    if height is not None:
        spec = replace(spec, height=height)
    if width is not None:
        spec = replace(spec, width=width)
    return spec


def scene_intrinsics(spec: SceneSpec) -> CameraIntrinsics:
    focal = spec.focal_ratio * spec.width
    return CameraIntrinsics(
        fx=focal,
        fy=focal,
        cx=(spec.width - 1) / 2.0,
        cy=(spec.height - 1) / 2.0,
        width=spec.width,
        height=spec.height,
    )


#####################################
# Scene Content
#####################################


@dataclass
class Texture:
    """Smooth colour field: base + sum_k amp_k * sin(freq_k . p + phase_k), per channel."""

    base: np.ndarray  # 3
    freqs: np.ndarray  # K x 3
    phases: np.ndarray  # K x 3 (one phase per channel)
    amps: np.ndarray  # K x 3

    def __call__(self, points: np.ndarray) -> np.ndarray:
        angles = points @ self.freqs.T  # N x K
        waves = np.sin(angles[:, :, None] + self.phases[None])  # N x K x 3
        return self.base + (waves * self.amps[None]).sum(axis=1)


def random_texture(rng: np.random.Generator, spec: SceneSpec) -> Texture:
    directions = rng.normal(size=(TEXTURE_WAVES, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    wavelengths = rng.uniform(spec.min_wavelength, spec.max_wavelength, size=(TEXTURE_WAVES, 1))
    return Texture(
        base=rng.uniform(0.35, 0.65, size=3),
        freqs=directions * (2.0 * np.pi / wavelengths),
        phases=rng.uniform(0.0, 2.0 * np.pi, size=(TEXTURE_WAVES, 3)),
        amps=rng.uniform(0.02, 0.3 / TEXTURE_WAVES * 2.0, size=(TEXTURE_WAVES, 3)),
    )


@dataclass
class Box:
    lower: np.ndarray  # 3
    upper: np.ndarray  # 3
    texture: Texture


def random_boxes(rng: np.random.Generator, spec: SceneSpec, K: CameraIntrinsics) -> list[Box]:
    boxes = []
    for _ in range(spec.boxes):
        depth = rng.uniform(*spec.box_depth_range)
        size = rng.uniform(*spec.box_size_range, size=3)
        half_w = 0.6 * depth * spec.width / (2.0 * K.fx)
        half_h = 0.6 * depth * spec.height / (2.0 * K.fy)
        center = np.array(
            [rng.uniform(-half_w, half_w), rng.uniform(-half_h, half_h), depth + size[2] / 2.0]
        )
        boxes.append(
            Box(
                lower=center - size / 2.0,
                upper=center + size / 2.0,
                texture=random_texture(rng, spec),
            )
        )
    return boxes


#####################################
# Camera Trajectory
#####################################


def yaw_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def camera_to_world(index: int, n_frames: int, spec: SceneSpec) -> np.ndarray:
    """Pose of frame `index` as a camera-to-world 4x4 (camera looks along +z)."""
    speed = min(spec.speed, MAX_TRAVEL / max(n_frames - 1, 1))
    phase = 2.0 * np.pi * index / SWAY_PERIOD
    pose = np.eye(4)
    pose[:3, :3] = yaw_matrix(spec.yaw * np.sin(phase + 0.7))
    pose[:3, 3] = [spec.sway * np.sin(phase), 0.0, speed * index]
    return pose


#####################################
# Ray Casting
#####################################


def camera_rays(K: CameraIntrinsics) -> np.ndarray:
    """Ray directions with unit z component, H x W x 3, in camera coordinates."""
    v, u = np.meshgrid(np.arange(K.height), np.arange(K.width), indexing="ij")
    return np.stack(
        [(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones((K.height, K.width))], axis=-1
    )


def intersect_box(origin: np.ndarray, dirs: np.ndarray, box: Box) -> np.ndarray:
    """Ray parameter of the entry hit per ray (inf on a miss), slab method."""
    safe = np.where(np.abs(dirs) < 1e-12, 1e-12, dirs)
    t1 = (box.lower - origin) / safe
    t2 = (box.upper - origin) / safe
    t_near = np.minimum(t1, t2).max(axis=-1)
    t_far = np.maximum(t1, t2).min(axis=-1)
    hit = (t_far >= t_near) & (t_near > 0)
    return np.where(hit, t_near, np.inf)


def render_frame(
    pose: np.ndarray,
    K: CameraIntrinsics,
    spec: SceneSpec,
    wall: Texture,
    boxes: list[Box],
) -> tuple[np.ndarray, np.ndarray]:
    """Return (image H x W x 3 in [0, 1], depth H x W) for one camera pose."""
    rays_cam = camera_rays(K).reshape(-1, 3)
    rotation = pose[:3, :3]
    origin = pose[:3, 3]
    dirs = rays_cam @ rotation.T

    # the ray parameter equals camera-frame depth because rays have unit z
    t_best = (spec.wall_depth - origin[2]) / dirs[:, 2]
    surface = np.full(t_best.shape, -1)
    for i, box in enumerate(boxes):
        t_box = intersect_box(origin, dirs, box)
        closer = t_box < t_best
        t_best = np.where(closer, t_box, t_best)
        surface = np.where(closer, i, surface)

    points = origin + t_best[:, None] * dirs
    colour = np.empty_like(points)
    on_wall = surface < 0
    colour[on_wall] = wall(points[on_wall])
    for i, box in enumerate(boxes):
        on_box = surface == i
        if on_box.any():
            colour[on_box] = box.texture(points[on_box])

    image = np.clip(colour, 0.0, 1.0).reshape(K.height, K.width, 3)
    depth = t_best.reshape(K.height, K.width)
    return image, depth


#####################################
# Sequence Generation
#####################################


def synth_generate(
    out_dir: pathlib.Path,
    n_frames: int,
    seed: int = 0,
    scene: str = "default",
    height: Optional[int] = None,
    width: Optional[int] = None,
) -> pathlib.Path:
    """Render n_frames (>= 3) of a seeded scene into out_dir and return it."""
    if n_frames < 3:
        msg = f"A sequence needs at least 3 frames, got {n_frames}"
        logger.error(msg)
        raise ConfigurationError(msg)

    spec = scene_spec(scene, height, width)
    K = scene_intrinsics(spec)
    rng = np.random.default_rng(seed)
    wall = random_texture(rng, spec)
    boxes = random_boxes(rng, spec, K)

    out_dir = pathlib.Path(out_dir)
    out_dir.joinpath(FRAMES_DIR).mkdir(parents=True, exist_ok=True)
    out_dir.joinpath(DEPTH_DIR).mkdir(parents=True, exist_ok=True)
    logger.info(
        f"Rendering {n_frames} frames of scene '{scene}' at {spec.height}x{spec.width} "
        f"(seed {seed}) into {out_dir}"
    )

    poses = []
    for index in range(n_frames):
        pose = camera_to_world(index, n_frames, spec)
        image, depth = render_frame(pose, K, spec, wall, boxes)
        write_image(out_dir.joinpath(FRAMES_DIR, frame_name(index)), image)
        write_depth(out_dir.joinpath(DEPTH_DIR, frame_name(index, ".bin")), depth)
        poses.append(pose)

    write_intrinsics(out_dir.joinpath(INTRINSICS_FILE), K)
    write_poses(out_dir.joinpath(POSES_FILE), np.stack(poses))
    logger.info(f"Wrote synthetic sequence to {out_dir}")
    return out_dir


#####################################
# Main Function
#####################################


def main() -> None:
    parser = argparse.ArgumentParser(description="Render a synthetic sequence with ground truth.")
    parser.add_argument("--out", required=True, type=pathlib.Path)
    parser.add_argument("--frames", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scene", choices=sorted(SCENES), default="default")
    args = parser.parse_args()

    logger.info("START synth producer.")
    synth_generate(args.out, args.frames, args.seed, args.scene)
    logger.info("END synth producer.")


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    main()
