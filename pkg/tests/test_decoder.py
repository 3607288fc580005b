import pytest
import torch
import torch.nn.functional as F

from models.decoder import AttentionGate, DepthDecoder, decode, disp_to_depth
from models.transformer_branch import FeaturePyramid
from utils.utils_errors import ConfigurationError, ContractViolation


def random_pyramid(batch: int, height: int, width: int) -> FeaturePyramid:
    return FeaturePyramid(
        torch.randn(batch, 256, height // 16, width // 16),
        torch.randn(batch, 128, height // 8, width // 8),
        torch.randn(batch, 64, height // 4, width // 4),
    )


class TestDepthDecoder:
    def test_full_resolution_disparity(self):
        decoder = DepthDecoder().eval()
        with torch.no_grad():
            disp = decode(random_pyramid(1, 32, 64), decoder)
        assert disp.shape == (1, 1, 32, 64)
        assert float(disp.min()) > 0.0 and float(disp.max()) < 1.0

    def test_gradient_reaches_every_level(self):
        decoder = DepthDecoder().train()
        pyramid = FeaturePyramid(*(level.requires_grad_() for level in random_pyramid(2, 32, 64)))
        decode(pyramid, decoder).mean().backward()
        for level in pyramid:
            assert float(level.grad.norm()) > 0.0


class TestAttentionGate:
    def test_coefficients_in_unit_interval(self):
        gate = AttentionGate(skip_channels=8, gating_channels=16, inter_channels=4)
        coefficients = gate.coefficients(torch.randn(2, 8, 8, 8), torch.randn(2, 16, 4, 4))
        assert coefficients.shape == (2, 1, 8, 8)
        assert float(coefficients.min()) > 0.0 and float(coefficients.max()) < 1.0

    def test_gating_must_be_half_resolution(self):
        gate = AttentionGate(8, 16, 4)
        with pytest.raises(ContractViolation):
            gate(torch.randn(1, 8, 8, 8), torch.randn(1, 16, 8, 8))

    def test_matches_hand_computation(self):
        gate = AttentionGate(skip_channels=3, gating_channels=5, inter_channels=2).double()
        skip = torch.randn(1, 3, 4, 6, dtype=torch.float64)
        gating = torch.randn(1, 5, 2, 3, dtype=torch.float64)

        def pointwise(conv, x):
            weight = conv.weight[:, :, 0, 0]
            return torch.einsum("oc,bchw->bohw", weight, x) + conv.bias.view(1, -1, 1, 1)

        up = F.interpolate(pointwise(gate.w_g, gating), scale_factor=2, mode="bilinear", align_corners=False)
        alpha = torch.sigmoid(pointwise(gate.psi, torch.relu(pointwise(gate.w_x, skip) + up)))
        torch.testing.assert_close(gate(skip, gating), skip * alpha)


class TestDispToDepth:
    def test_bounds(self):
        depth = disp_to_depth(torch.tensor([0.0, 1.0]), 0.1, 100.0)
        torch.testing.assert_close(depth, torch.tensor([100.0, 0.1]))

    def test_monotone_decreasing(self):
        depth = disp_to_depth(torch.linspace(0.0, 1.0, 50))
        assert bool((depth[1:] < depth[:-1]).all())

    def test_equal_bounds_give_constant_depth(self):
        depth = disp_to_depth(torch.rand(10), 5.0, 5.0)
        torch.testing.assert_close(depth, torch.full((10,), 5.0))

    @pytest.mark.parametrize("d_min,d_max", [(0.0, 10.0), (10.0, 1.0), (-1.0, 1.0)])
    def test_invalid_bounds(self, d_min, d_max):
        with pytest.raises(ConfigurationError):
            disp_to_depth(torch.rand(3), d_min, d_max)
