import math

import pytest
import torch

from models.losses import (
    SSIM_C1,
    PhotometricConfig,
    edge_aware_smoothness,
    photometric_error,
    photometric_loss,
    photometric_loss_map,
    ssim_map,
    total_loss,
)
from utils.utils_config import SourceAggregation
from utils.utils_errors import ConfigurationError, ContractViolation, TrainingStepError


def all_valid(image: torch.Tensor) -> torch.Tensor:
    return torch.ones(image.shape[0], 1, *image.shape[-2:], dtype=torch.bool)


class TestSSIM:
    def test_identical_images_score_one(self):
        a = torch.rand(2, 3, 12, 12)
        torch.testing.assert_close(ssim_map(a, a), torch.ones_like(a))

    def test_bounded(self):
        ssim = ssim_map(torch.rand(1, 3, 10, 10), torch.rand(1, 3, 10, 10), window=5)
        assert float(ssim.min()) >= -1.0 and float(ssim.max()) <= 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            ssim_map(torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 9))

    def test_black_against_white(self):
        ssim = ssim_map(torch.zeros(1, 3, 8, 8), torch.ones(1, 3, 8, 8))
        torch.testing.assert_close(ssim, torch.full_like(ssim, SSIM_C1 / (1.0 + SSIM_C1)))

    def test_symmetric(self):
        a, b = torch.rand(2, 3, 10, 10), torch.rand(2, 3, 10, 10)
        torch.testing.assert_close(ssim_map(a, b), ssim_map(b, a))


class TestPhotometricLoss:
    def test_perfect_reconstruction_is_zero(self):
        target = torch.rand(2, 3, 16, 16)
        loss = photometric_loss(target, [(target.clone(), all_valid(target))], PhotometricConfig())
        assert float(loss) == pytest.approx(0.0, abs=1e-6)

    def test_black_against_white_loss(self):
        target = torch.zeros(1, 3, 8, 8)
        loss = photometric_loss(target, [(torch.ones_like(target), all_valid(target))], PhotometricConfig())
        assert float(loss) == pytest.approx(0.5750, abs=1e-4)

    def test_per_pixel_min_with_a_perfect_source_is_zero(self):
        target = torch.rand(2, 3, 8, 8)
        recons = [(torch.rand_like(target), all_valid(target)), (target.clone(), all_valid(target))]
        cfg = PhotometricConfig(source_aggregation=SourceAggregation.PER_PIXEL_MIN)
        assert float(photometric_loss(target, recons, cfg)) == pytest.approx(0.0, abs=1e-6)

    def test_pure_l1_when_alpha_zero(self):
        target = torch.zeros(1, 3, 8, 8)
        recon = torch.full_like(target, 0.5)
        loss = photometric_loss(target, [(recon, all_valid(target))], PhotometricConfig(alpha=0.0))
        assert float(loss) == pytest.approx(0.5)

    def test_error_is_single_channel(self):
        target = torch.rand(2, 3, 8, 8)
        assert photometric_error(target, torch.rand_like(target), PhotometricConfig()).shape == (2, 1, 8, 8)

    def test_invalid_source_is_ignored(self):
        target = torch.rand(1, 3, 8, 8)
        good = target + 0.1
        bad = torch.rand_like(target)
        cfg = PhotometricConfig()
        no_pixels = torch.zeros(1, 1, 8, 8, dtype=torch.bool)
        both = photometric_loss(target, [(good, all_valid(target)), (bad, no_pixels)], cfg)
        only_good = photometric_loss(target, [(good, all_valid(target))], cfg)
        torch.testing.assert_close(both, only_good)

    def test_min_never_exceeds_mean(self):
        target = torch.rand(2, 3, 8, 8)
        recons = [(torch.rand_like(target), all_valid(target)) for _ in range(2)]
        mean = photometric_loss(target, recons, PhotometricConfig())
        minimum = photometric_loss(
            target, recons, PhotometricConfig(source_aggregation=SourceAggregation.PER_PIXEL_MIN)
        )
        assert float(minimum) <= float(mean)

    def test_pixels_seen_by_no_source_are_excluded(self):
        target = torch.rand(1, 3, 8, 8)
        mask = all_valid(target)
        mask[..., :4] = False
        _, valid = photometric_loss_map(target, [(torch.rand_like(target), mask)], PhotometricConfig())
        assert int(valid.sum()) == 32

    def test_needs_a_reconstruction(self):
        with pytest.raises(ContractViolation):
            photometric_loss(torch.rand(1, 3, 8, 8), [], PhotometricConfig())

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            PhotometricConfig(alpha=1.5)
        with pytest.raises(ConfigurationError):
            PhotometricConfig(window=4)

    def test_gradients(self):
        target = torch.rand(1, 3, 8, 8, dtype=torch.float64)
        recon = torch.rand(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
        mask = all_valid(target)
        cfg = PhotometricConfig()
        assert torch.autograd.gradcheck(
            lambda r: photometric_loss(target, [(r, mask)], cfg), (recon,), eps=1e-6, atol=1e-5, rtol=1e-3
        )


class TestTotalLoss:
    def test_sum(self):
        assert float(total_loss(torch.tensor(0.25), torch.tensor(0.5))) == pytest.approx(0.75)

    def test_nan_carries_diagnostics(self):
        with pytest.raises(TrainingStepError) as info:
            total_loss(torch.tensor(0.2), torch.tensor(math.nan))
        assert "loss_night" in info.value.diagnostics


class TestSmoothness:
    def test_constant_disparity_is_smooth(self):
        disp = torch.full((1, 1, 8, 8), 0.3)
        assert float(edge_aware_smoothness(disp, torch.rand(1, 3, 8, 8))) == pytest.approx(0.0)

    def test_image_edges_reduce_penalty(self):
        disp = torch.zeros(1, 1, 8, 8)
        disp[..., 4:] = 1.0
        flat = torch.zeros(1, 3, 8, 8)
        edged = flat.clone()
        edged[..., 4:] = 1.0
        assert float(edge_aware_smoothness(disp + 0.1, edged)) < float(
            edge_aware_smoothness(disp + 0.1, flat)
        )
