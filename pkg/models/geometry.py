"""
geometry.py - pinhole camera model and inverse-warping view synthesis.

A target frame is reconstructed from a source frame by lifting every target
pixel to 3-D with the predicted depth, moving it into the source camera with
the relative pose, projecting it with K, and bilinearly sampling the source
image there (inverse warping). Every function is differentiable in its
tensor inputs and keeps no state.

Conventions:
- images and depth maps are B x C x H x W tensors
- pixel (u, v) is column u, row v, with integer coordinates at pixel centres
- a coordinate is in bounds on [-0.5, W - 0.5] x [-0.5, H - 0.5], the full image area
- a PoseTransform maps points from the target camera into the source camera
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
from dataclasses import dataclass
from typing import Optional, Union

# Import external packages
import torch
import torch.nn.functional as F

# Import functions from local modules
from utils.utils_errors import ConfigurationError, ContractViolation, DepthDomainError
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

Z_EPS = 1e-3  # metres; projected depth is clamped here
SMALL_ANGLE_SQ = 1e-6
BORDER_MARGIN = 0.5  # pixels; a pixel covers its centre +- half a pixel

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics for images of size height x width (all in pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            msg = f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            logger.error(msg)
            raise ConfigurationError(msg)
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            msg = (
                f"Principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )
            logger.error(msg)
            raise ConfigurationError(msg)

    def matrix(
        self, dtype: torch.dtype = torch.float32, device: Optional[torch.device] = None
    ) -> torch.Tensor:
        return torch.tensor(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=dtype,
            device=device,
        )

    def crop(self, top: int, left: int, height: int, width: int) -> "CameraIntrinsics":
        """Intrinsics of the window [top, top+height) x [left, left+width)."""
        return CameraIntrinsics(
            fx=self.fx,
            fy=self.fy,
            cx=self.cx - left,
            cy=self.cy - top,
            width=width,
            height=height,
        )

    def resize(self, height: int, width: int) -> "CameraIntrinsics":
        """Intrinsics after resizing the whole image to height x width."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=self.cx * sx,
            cy=self.cy * sy,
            width=width,
            height=height,
        )


@dataclass
class PoseTransform:
    """Rigid motion as axis-angle (radians) plus translation (metres), each B x 3."""

    axis_angle: torch.Tensor
    translation: torch.Tensor

    @classmethod
    def identity(
        cls,
        batch: int = 1,
        dtype: torch.dtype = torch.float32,
        device: Optional[torch.device] = None,
    ) -> "PoseTransform":
        zeros = torch.zeros(batch, 3, dtype=dtype, device=device)
        return cls(axis_angle=zeros, translation=zeros.clone())

    @classmethod
    def from_matrix(cls, transform: torch.Tensor) -> "PoseTransform":
        """Invert pose_to_matrix for rotations away from pi."""
        transform = transform if transform.dim() == 3 else transform.unsqueeze(0)
        return cls(
            axis_angle=rotation_to_axis_angle(transform[:, :3, :3]),
            translation=transform[:, :3, 3].clone(),
        )

    def matrix(self) -> torch.Tensor:
        return pose_to_matrix(self)


@dataclass
class PixelGrid:
    """Continuous pixel coordinates (B x 2 x H x W, channels u then v) and validity (B x 1 x H x W)."""

    coords: torch.Tensor
    mask: torch.Tensor


Intrinsics = Union[CameraIntrinsics, torch.Tensor]

#####################################
# Rotations
#####################################


def skew(v: torch.Tensor) -> torch.Tensor:
    """Cross-product matrix of (..., 3) vectors."""
    x, y, z = v.unbind(-1)
    zero = torch.zeros_like(x)
    rows = torch.stack([zero, -z, y, z, zero, -x, -y, x, zero], dim=-1)
    return rows.reshape(*v.shape[:-1], 3, 3)


def axis_angle_to_rotation(axis_angle: torch.Tensor) -> torch.Tensor:
    """Rodrigues' formula, R = I + a K + b K^2, with series coefficients near zero."""
    theta_sq = (axis_angle * axis_angle).sum(-1)[..., None, None]
    small = theta_sq < SMALL_ANGLE_SQ
    safe_sq = torch.where(small, torch.ones_like(theta_sq), theta_sq)
    theta = torch.sqrt(safe_sq)

    a = torch.where(
        small, 1.0 - theta_sq / 6.0 + theta_sq * theta_sq / 120.0, torch.sin(theta) / theta
    )
    half_sin = torch.sin(theta / 2.0)
    b = torch.where(
        small,
        0.5 - theta_sq / 24.0 + theta_sq * theta_sq / 720.0,
        2.0 * half_sin * half_sin / safe_sq,
    )

    k = skew(axis_angle)
    eye = torch.eye(3, dtype=axis_angle.dtype, device=axis_angle.device).expand_as(k)
    return eye + a * k + b * (k @ k)


def rotation_to_axis_angle(rotation: torch.Tensor) -> torch.Tensor:
    """Log map of (..., 3, 3) rotations. Not stable within ~1e-3 rad of pi."""
    trace = rotation[..., 0, 0] + rotation[..., 1, 1] + rotation[..., 2, 2]
    cos = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0)
    theta = torch.acos(cos)
    w = torch.stack(
        [
            rotation[..., 2, 1] - rotation[..., 1, 2],
            rotation[..., 0, 2] - rotation[..., 2, 0],
            rotation[..., 1, 0] - rotation[..., 0, 1],
        ],
        dim=-1,
    )
    sin = torch.sin(theta)
    small = (theta < 1e-4)[..., None]
    safe_sin = torch.where(small, torch.ones_like(sin[..., None]), sin[..., None])
    scale = torch.where(small, torch.full_like(safe_sin, 0.5), theta[..., None] / (2.0 * safe_sin))
    return scale * w


def pose_to_matrix(pose: PoseTransform) -> torch.Tensor:
    """Materialise a pose as 4 x 4 homogeneous transforms (B x 4 x 4, or 4 x 4 for 1-D input)."""
    axis_angle, translation = pose.axis_angle, pose.translation
    unbatched = axis_angle.dim() == 1
    if unbatched:
        axis_angle, translation = axis_angle.unsqueeze(0), translation.unsqueeze(0)

    rotation = axis_angle_to_rotation(axis_angle)
    top = torch.cat([rotation, translation.unsqueeze(-1)], dim=-1)
    bottom = torch.zeros_like(top[..., :1, :])
    bottom[..., 0, 3] = 1.0
    transform = torch.cat([top, bottom], dim=-2)
    return transform[0] if unbatched else transform


def relative_pose(target_to_world: torch.Tensor, source_to_world: torch.Tensor) -> torch.Tensor:
    """Transform taking target-camera points into the source camera, from two camera-to-world poses."""
    return torch.linalg.inv(source_to_world) @ target_to_world


#####################################
# Projection
#####################################


def intrinsics_matrix(
    intrinsics: Intrinsics, batch: int, dtype: torch.dtype, device: torch.device
) -> torch.Tensor:
    """Return K as a B x 3 x 3 tensor from either a CameraIntrinsics or a tensor."""
    if isinstance(intrinsics, CameraIntrinsics):
        k = intrinsics.matrix(dtype=dtype, device=device)
    else:
        k = intrinsics.to(dtype=dtype, device=device)
    if k.dim() == 2:
        k = k.unsqueeze(0)
    if k.shape[-2:] != (3, 3) or k.shape[0] not in (1, batch):
        raise ContractViolation(f"Intrinsics must be 3x3 or {batch}x3x3, got {tuple(k.shape)}")
    return k.expand(batch, 3, 3)


def pixel_lattice(
    height: int, width: int, dtype: torch.dtype, device: Optional[torch.device] = None
) -> tuple[torch.Tensor, torch.Tensor]:
    """Integer pixel coordinates (u, v), each H x W."""
    v, u = torch.meshgrid(
        torch.arange(height, dtype=dtype, device=device),
        torch.arange(width, dtype=dtype, device=device),
        indexing="ij",
    )
    return u, v


def backproject(depth: torch.Tensor, intrinsics: Intrinsics) -> torch.Tensor:
    """Lift every pixel to a camera-frame point: depth * K^-1 [u, v, 1]. Returns B x 3 x H x W."""
    if depth.dim() != 4 or depth.shape[1] != 1:
        raise ContractViolation(f"Depth must be B x 1 x H x W, got {tuple(depth.shape)}")
    if not bool((depth > 0).all()):
        msg = "Backprojection needs strictly positive depth"
        logger.error(msg)
        raise DepthDomainError(msg)

    batch, _, height, width = depth.shape
    k = intrinsics_matrix(intrinsics, batch, depth.dtype, depth.device)
    fx = k[:, 0, 0].view(batch, 1, 1)
    fy = k[:, 1, 1].view(batch, 1, 1)
    cx = k[:, 0, 2].view(batch, 1, 1)
    cy = k[:, 1, 2].view(batch, 1, 1)

    u, v = pixel_lattice(height, width, depth.dtype, depth.device)
    d = depth[:, 0]
    x = (u - cx) / fx * d
    y = (v - cy) / fy * d
    return torch.stack([x, y, d], dim=1)


def project(points: torch.Tensor, intrinsics: Intrinsics, z_eps: float = Z_EPS) -> PixelGrid:
    """Project camera-frame points to pixels. Points with Z <= z_eps are clamped and masked."""
    if points.dim() != 4 or points.shape[1] != 3:
        raise ContractViolation(f"Points must be B x 3 x H x W, got {tuple(points.shape)}")
    batch, _, height, width = points.shape
    k = intrinsics_matrix(intrinsics, batch, points.dtype, points.device)

    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    in_front = z > z_eps
    z = z.clamp(min=z_eps)
    u = k[:, 0, 0].view(batch, 1, 1) * x / z + k[:, 0, 2].view(batch, 1, 1)
    v = k[:, 1, 1].view(batch, 1, 1) * y / z + k[:, 1, 2].view(batch, 1, 1)

    coords = torch.stack([u, v], dim=1)
    mask = in_front & _in_bounds(u, v, height, width)
    return PixelGrid(coords=coords, mask=mask.unsqueeze(1))


def _in_bounds(u: torch.Tensor, v: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """True where (u, v) lands on the image area, edge pixels included in full."""
    m = BORDER_MARGIN
    return (u >= -m) & (u <= width - 1 + m) & (v >= -m) & (v <= height - 1 + m)


#####################################
# Sampling and Warping
#####################################


def bilinear_sample(source: torch.Tensor, grid: PixelGrid) -> tuple[torch.Tensor, torch.Tensor]:
    """Sample source at continuous pixel coordinates with edge clamping.

    Returns the sampled images and a B x 1 x H x W mask that is False wherever the
    coordinate fell outside the image or was already invalid in the grid.
    """
    coords = grid.coords
    if (
        source.dim() != 4
        or coords.dim() != 4
        or coords.shape[1] != 2
        or source.shape[0] != coords.shape[0]
        or source.shape[-2:] != coords.shape[-2:]
    ):
        msg = (
            f"Grid {tuple(coords.shape)} does not match source {tuple(source.shape)} "
            "in batch and spatial dims"
        )
        logger.error(msg)
        raise ContractViolation(msg)

    height, width = source.shape[-2:]
    if height < 2 or width < 2:
        raise ContractViolation(f"Sampling needs at least 2x2 images, got {height}x{width}")

    u, v = coords[:, 0], coords[:, 1]
    normalized = torch.stack([2.0 * u / (width - 1) - 1.0, 2.0 * v / (height - 1) - 1.0], dim=-1)
    sampled = F.grid_sample(
        source,
        normalized.to(source.dtype),
        mode="bilinear",
        padding_mode="border",
        align_corners=True,
    )
    mask = grid.mask & _in_bounds(u, v, height, width).unsqueeze(1)
    return sampled, mask


def transform_points(points: torch.Tensor, transform: torch.Tensor) -> torch.Tensor:
    """Apply B x 4 x 4 rigid transforms to B x 3 x H x W points."""
    batch, _, height, width = points.shape
    rotation = transform[:, :3, :3]
    translation = transform[:, :3, 3:]
    moved = rotation @ points.reshape(batch, 3, -1) + translation
    return moved.reshape(batch, 3, height, width)


def reproject(
    source: torch.Tensor,
    depth_t: torch.Tensor,
    pose: Union[PoseTransform, torch.Tensor],
    intrinsics: Intrinsics,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Reconstruct the target view from a source frame (inverse warping).

    Returns the reconstruction and its validity mask.
    """
    if source.shape[0] != depth_t.shape[0] or source.shape[-2:] != depth_t.shape[-2:]:
        msg = f"Source {tuple(source.shape)} and depth {tuple(depth_t.shape)} disagree"
        logger.error(msg)
        raise ContractViolation(msg)

    transform = pose_to_matrix(pose) if isinstance(pose, PoseTransform) else pose
    if transform.dim() == 2:
        transform = transform.unsqueeze(0)
    transform = transform.to(depth_t.dtype).expand(depth_t.shape[0], 4, 4)

    points = backproject(depth_t, intrinsics)
    grid = project(transform_points(points, transform), intrinsics)
    return bilinear_sample(source, grid)
