import pytest
import torch

from models.cnn_branch import CNNBranch, ResidualUnit, cnn_units
from models.transformer_branch import check_pyramid
from utils.utils_errors import ConfigurationError


class TestCNNBranch:
    @pytest.mark.parametrize("height,width", [(32, 64), (96, 160)])
    def test_pyramid_shapes(self, height, width):
        branch = CNNBranch(cnn_units("tiny")).eval()
        with torch.no_grad():
            pyramid = branch(torch.rand(1, 3, height, width))
        check_pyramid(pyramid, height, width)

    def test_resnet34_unit_counts(self):
        branch = CNNBranch(cnn_units("resnet34"))
        assert [len(s) for s in (branch.stage2, branch.stage3, branch.stage4)] == [3, 4, 6]

    def test_size_not_divisible_by_16(self):
        with pytest.raises(ConfigurationError):
            CNNBranch(cnn_units("tiny"))(torch.rand(2, 3, 40, 64))

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            cnn_units("resnet152")


class TestResidualUnit:
    def test_projection_shortcut_on_stride(self):
        unit = ResidualUnit(8, 16, stride=2)
        assert unit(torch.rand(2, 8, 8, 8)).shape == (2, 16, 4, 4)

    def test_identity_shortcut(self):
        unit = ResidualUnit(8, 8)
        assert isinstance(unit.shortcut, torch.nn.Identity)

    def test_gradients(self):
        unit = ResidualUnit(3, 4, stride=2).double().eval()
        x = torch.randn(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(unit, (x,), eps=1e-6, atol=1e-5, rtol=1e-3)

    def test_zero_initialised_residual_is_identity(self):
        unit = ResidualUnit(8, 8).eval()
        torch.nn.init.zeros_(unit.bn2.weight)
        torch.nn.init.zeros_(unit.bn2.bias)
        x = torch.rand(2, 8, 6, 6)
        torch.testing.assert_close(unit(x), x)
