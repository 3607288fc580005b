import pytest
import torch
import torch.nn.functional as F
from torch.func import functional_call

from models.fusion import (
    LevelFusion,
    PyramidFusion,
    channel_pool,
    fuse_level,
    fuse_pyramid,
    gate_width,
    global_average_pool,
    two_way_softmax,
)
from models.transformer_branch import FeaturePyramid
from utils.utils_config import FusionMode
from utils.utils_errors import ContractViolation


def pair(batch=2, channels=16, height=4, width=6, dtype=torch.float32):
    return (
        torch.randn(batch, channels, height, width, dtype=dtype),
        torch.randn(batch, channels, height, width, dtype=dtype),
    )


class TestChannelSelection:
    def test_weights_sum_to_one(self):
        generator = torch.Generator().manual_seed(1)
        for _ in range(100):
            channels = int(torch.randint(4, 40, (1,), generator=generator))
            fusion = LevelFusion(channels).eval()
            t, g = pair(channels=channels)
            s_t, s_g = fusion.channel_select(fusion.gate_vector(t + g))
            torch.testing.assert_close(s_t + s_g, torch.ones_like(s_t), atol=1e-6, rtol=0)

    def test_global_average_pool_matches_pixel_loop(self):
        x = torch.randn(2, 3, 4, 5, dtype=torch.float64)
        pooled = global_average_pool(x)
        for b in range(2):
            for c in range(3):
                total = sum(float(x[b, c, i, j]) for i in range(4) for j in range(5))
                assert float(pooled[b, c]) == pytest.approx(total / 20, abs=1e-6)

    def test_gate_width_has_floor(self):
        assert gate_width(64) == 8
        assert gate_width(256) == 16

    def test_two_way_softmax_of_equal_logits(self):
        s_t, s_g = two_way_softmax(torch.zeros(3), torch.zeros(3))
        torch.testing.assert_close(s_t, torch.full((3,), 0.5))
        torch.testing.assert_close(s_g, torch.full((3,), 0.5))


class TestSpatialAttention:
    def test_maps_strictly_inside_unit_interval(self):
        fusion = LevelFusion(16)
        attention = fusion.spatial_attention(torch.randn(2, 16, 5, 7))
        assert attention.shape == (2, 1, 5, 7)
        assert float(attention.min()) > 0.0 and float(attention.max()) < 1.0

    def test_channel_pool(self):
        x = torch.tensor([[[[1.0]], [[3.0]]]])
        torch.testing.assert_close(channel_pool(x), torch.tensor([[[[3.0]], [[2.0]]]]))

    def test_constant_input_gives_constant_map(self):
        fusion = LevelFusion(16)
        x = torch.randn(2, 16, 1, 1).expand(2, 16, 5, 7)
        with torch.no_grad():
            attention = fusion.spatial_attention(x)
        torch.testing.assert_close(attention, attention[..., :1, :1].expand_as(attention), atol=1e-6, rtol=0)

    def test_channel_pool_matches_pixel_loop(self):
        x = torch.randn(2, 5, 3, 4, dtype=torch.float64)
        pooled = channel_pool(x)
        for b in range(2):
            for i in range(3):
                for j in range(4):
                    values = [float(x[b, c, i, j]) for c in range(5)]
                    assert float(pooled[b, 0, i, j]) == max(values)
                    assert float(pooled[b, 1, i, j]) == pytest.approx(sum(values) / 5, abs=1e-12)


class TestLevelFusion:
    def test_zero_inputs_fuse_to_zero(self):
        fusion = LevelFusion(16).eval()
        zeros = torch.zeros(1, 16, 4, 4)
        assert float(fuse_level(zeros, zeros, fusion).abs().max()) == 0.0

    def test_dot_product_oracle(self):
        fusion = LevelFusion(16, FusionMode.DOT_PRODUCT)
        t, g = pair()
        torch.testing.assert_close(fusion(t, g), t * g, atol=1e-6, rtol=0)

    def test_concatenation_oracle(self):
        fusion = LevelFusion(16, FusionMode.CONCATENATION)
        t, g = pair()
        expected = F.conv2d(torch.cat([t, g], dim=1), fusion.project.weight, fusion.project.bias)
        torch.testing.assert_close(fusion(t, g), expected, atol=1e-6, rtol=0)

    def test_channel_only_oracle(self):
        fusion = LevelFusion(16, FusionMode.CHANNEL_ONLY).eval()
        t, g = pair()
        s_t, s_g = fusion.channel_select(fusion.gate_vector(t + g))
        expected = s_t[..., None, None] * t + s_g[..., None, None] * g
        torch.testing.assert_close(fusion(t, g), expected, atol=1e-6, rtol=0)

    def test_full_mode_oracle(self):
        fusion = LevelFusion(16).eval()
        t, g = pair()
        s_t, s_g = fusion.channel_select(fusion.gate_vector(t + g))
        expected = (
            fusion.spatial_attention(t) * s_t[..., None, None] * t
            + fusion.spatial_attention(g) * s_g[..., None, None] * g
        )
        torch.testing.assert_close(fusion(t, g), expected, atol=1e-6, rtol=0)

    def test_shape_mismatch(self):
        fusion = LevelFusion(16)
        with pytest.raises(ContractViolation):
            fusion(torch.zeros(2, 16, 4, 4), torch.zeros(2, 16, 4, 5))

    def test_trains_with_single_sample_batch(self):
        fusion = LevelFusion(16).train()
        t, g = pair(batch=1)
        fusion(t, g).sum().backward()
        assert fusion.w_t.weight.grad is not None

    def test_sample_gate_ignores_batch_and_mode(self):
        fusion = LevelFusion(16).train()
        t, g = pair(batch=4)
        with torch.no_grad():
            batched = fusion.gate_vector(t + g)
            alone = fusion.gate_vector(t[:1] + g[:1])
            evaluated = fusion.eval().gate_vector(t + g)
        torch.testing.assert_close(alone[0], batched[0], atol=1e-6, rtol=0)
        torch.testing.assert_close(evaluated, batched, atol=1e-6, rtol=0)

    def test_gradients(self):
        fusion = LevelFusion(8).double().eval()
        t, g = pair(batch=1, channels=8, height=4, width=4, dtype=torch.float64)
        t.requires_grad_()
        g.requires_grad_()
        assert torch.autograd.gradcheck(fusion, (t, g), eps=1e-6, atol=1e-5, rtol=1e-3)

    def test_gradients_of_all_weights(self):
        for seed in range(20):
            torch.manual_seed(seed)
            fusion = LevelFusion(4).double()
            names = [name for name, _ in fusion.named_parameters()]
            params = tuple(p.detach().clone().requires_grad_() for p in fusion.parameters())
            t, g = pair(batch=1, channels=4, height=6, width=8, dtype=torch.float64)
            t.requires_grad_()
            g.requires_grad_()

            def fused(t, g, *weights):
                return functional_call(fusion, dict(zip(names, weights)), (t, g))

            assert torch.autograd.gradcheck(
                fused, (t, g, *params), eps=1e-6, atol=1e-5, rtol=1e-3
            ), f"seed {seed}"


class TestPyramidFusion:
    def test_levels_keep_shapes(self):
        fusion = PyramidFusion().eval()
        shapes = [(1, 256, 2, 4), (1, 128, 4, 8), (1, 64, 8, 16)]
        tp = FeaturePyramid(*(torch.randn(s) for s in shapes))
        gp = FeaturePyramid(*(torch.randn(s) for s in shapes))
        fused = fuse_pyramid(tp, gp, fusion)
        assert [tuple(f.shape) for f in fused] == shapes

    def test_levels_are_independent(self):
        fusion = PyramidFusion().eval()
        shapes = [(1, 256, 2, 4), (1, 128, 4, 8), (1, 64, 8, 16)]
        tp = FeaturePyramid(*(torch.randn(s) for s in shapes))
        gp = FeaturePyramid(*(torch.randn(s) for s in shapes))
        with torch.no_grad():
            before = fuse_pyramid(tp, gp, fusion)
            nudged = tp._replace(level1=tp.level1 + 1.0)
            after = fuse_pyramid(nudged, gp, fusion)
        assert torch.equal(before.level0, after.level0)
        assert torch.equal(before.level2, after.level2)
        assert not torch.equal(before.level1, after.level1)
