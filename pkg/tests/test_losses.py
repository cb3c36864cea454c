import math

import pytest
import torch
import torch.nn as nn

from conftest import fd_grad, rel_err
from haifit.core import TrainConfig
from haifit.critic import PatchDiscriminator
from haifit.errors import ConfigError, ShapeError
from haifit.losses import TestFeatureExtractor as FixtureExtractor
from haifit.losses import (LossBreakdown, adversarial_losses,
                           generator_adversarial_loss, gram_matrix, l1_loss,
                           perceptual_loss, style_loss, total_generator_loss)


class TestL1:
    def test_identical_zero(self):
        x = torch.randn(2, 3, 8, 8)
        assert l1_loss(x, x).item() == 0.0

    def test_constant_gap(self):
        a = torch.zeros(1, 3, 8, 8)
        b = torch.full((1, 3, 8, 8), 0.5)
        assert l1_loss(a, b).item() == pytest.approx(0.5)

    def test_symmetric(self):
        a, b = torch.randn(1, 3, 8, 8), torch.randn(1, 3, 8, 8)
        assert l1_loss(a, b).item() == pytest.approx(l1_loss(b, a).item())

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            l1_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 4, 4))


class TestAdversarial:
    def test_half_scores(self):
        half = torch.full((4,), 0.5)
        d_loss, _ = adversarial_losses(half, half)
        assert d_loss.item() == pytest.approx(2 * math.log(2), abs=1e-6)

    def test_perfect_generator(self):
        _, g_loss = adversarial_losses(torch.full((4,), 0.5), torch.ones(4))
        assert g_loss.item() == pytest.approx(0.0, abs=1e-5)

    def test_perfect_discriminator(self):
        d_loss, _ = adversarial_losses(torch.ones(4), torch.zeros(4))
        assert d_loss.item() == pytest.approx(0.0, abs=1e-5)

    def test_boundary_scores_clamped_finite(self):
        d_loss, g_loss = adversarial_losses(torch.zeros(4), torch.ones(4))
        assert math.isfinite(d_loss.item()) and math.isfinite(g_loss.item())
        assert d_loss.item() >= 0.0

    def test_multi_scale_uniform_average(self):
        a = torch.full((2,), 0.5)
        d1, _ = adversarial_losses([a], [a])
        d2, _ = adversarial_losses([a, a], [a, a])
        assert d1.item() == pytest.approx(d2.item())

    def test_generator_term_matches_pair_version(self):
        f = torch.rand(6) * 0.8 + 0.1
        _, g = adversarial_losses(torch.full((6,), 0.5), f)
        assert generator_adversarial_loss(f).item() == pytest.approx(g.item())


class TestGram:
    def test_orthogonal_rows_diagonal(self):
        # 2 channels over a 1x2 grid: F = [[1,0],[0,1]], G = F F^T / (2*1*2)
        f = torch.tensor([[[[1.0, 0.0]], [[0.0, 1.0]]]])
        g = gram_matrix(f)[0]
        assert torch.allclose(g, torch.eye(2) / 4.0)

    def test_symmetric_psd(self):
        torch.manual_seed(0)
        for _ in range(20):
            g = gram_matrix(torch.randn(2, 5, 4, 4))
            assert torch.allclose(g, g.transpose(1, 2), atol=1e-6)
            for gb in g:
                eigs = torch.linalg.eigvalsh(gb)
                assert eigs.min().item() >= -1e-8

    def test_zero_feature(self):
        assert torch.equal(gram_matrix(torch.zeros(1, 4, 2, 2)),
                           torch.zeros(1, 4, 4))


class TestStyle:
    def test_identical_zero(self):
        x = torch.randn(1, 3, 8, 8)
        assert style_loss(x, x).item() == 0.0

    def test_channel_permutation_positive(self):
        torch.manual_seed(1)
        x = torch.randn(1, 3, 8, 8)
        assert style_loss(x, x[:, [1, 2, 0]]).item() > 0

    def test_scale_bilinearity(self):
        torch.manual_seed(2)
        y = torch.randn(1, 3, 8, 8)
        # Gram(2y) = 4 Gram(y), so the loss is 3 * mean|Gram(y)|
        expected = 3.0 * gram_matrix(y).abs().mean().item()
        assert style_loss(2 * y, y).item() == pytest.approx(expected, rel=1e-6)

    def test_extractor_profile(self, extractor):
        torch.manual_seed(3)
        a, b = torch.randn(1, 3, 16, 16), torch.randn(1, 3, 16, 16)
        assert style_loss(a, a, extractor).item() == 0.0
        assert style_loss(a, b, extractor).item() > 0


class TestPerceptual:
    def test_identical_zero(self, extractor):
        x = torch.randn(1, 3, 32, 32)
        assert perceptual_loss(x, x, extractor).item() == 0.0

    def test_nonnegative(self, extractor):
        torch.manual_seed(4)
        for _ in range(5):
            a, b = torch.randn(1, 3, 32, 32), torch.randn(1, 3, 32, 32)
            assert perceptual_loss(a, b, extractor).item() >= 0

    def test_stage_count_enforced(self):
        class FourStage:
            def stages(self, x):
                return [x] * 4

        with pytest.raises(ConfigError):
            perceptual_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 8, 8), FourStage())

    def test_linear_homogeneity(self):
        # bias-free, activation-free extractor: doubling the gap doubles the loss
        class Linear5(FixtureExtractor):
            def stages(self, x):
                out = []
                for i, conv in enumerate(self.convs):
                    if i > 0:
                        x = torch.nn.functional.avg_pool2d(x, 2)
                    x = torch.nn.functional.conv2d(x, conv.weight, None, padding=1)
                    out.append(x)
                return out

        torch.manual_seed(5)
        ext = Linear5()
        t = torch.randn(1, 3, 32, 32)
        d = torch.randn(1, 3, 32, 32)
        one = perceptual_loss(t + d, t, ext).item()
        two = perceptual_loss(t + 2 * d, t, ext).item()
        assert two == pytest.approx(2 * one, rel=1e-5)


class TestTotalLoss:
    def test_all_zero(self):
        cfg = TrainConfig()
        z = torch.zeros(())
        total, br = total_generator_loss(z, z, z, z, cfg)
        assert total.item() == 0.0 and br.total == 0.0

    def test_l1_weight(self):
        cfg = TrainConfig()
        total, _ = total_generator_loss(torch.ones(()), torch.zeros(()),
                                        torch.zeros(()), torch.zeros(()), cfg)
        assert total.item() == pytest.approx(1.5)

    def test_style_weight(self):
        cfg = TrainConfig()
        total, _ = total_generator_loss(torch.zeros(()), torch.zeros(()),
                                        torch.tensor(0.01), torch.zeros(()), cfg)
        assert total.item() == pytest.approx(2.5)

    def test_breakdown_identity_exact(self):
        cfg = TrainConfig()
        torch.manual_seed(6)
        for _ in range(20):
            vals = torch.rand(4)
            br = LossBreakdown.compute(vals[0].item(), vals[1].item(),
                                       vals[2].item(), vals[3].item(), cfg)
            recomputed = (cfg.lambda_l1 * br.l1 + cfg.lambda_adv * br.adv
                          + cfg.lambda_style * br.style + cfg.lambda_per * br.perceptual)
            assert br.total == recomputed  # bit-exact


class TestLossGradients:
    """Analytic gradients vs central differences (eps=1e-4, float64)."""

    EPS = 1e-4

    def _check(self, make_loss, gen):
        loss = make_loss(gen)
        loss.backward()
        g = torch.Generator().manual_seed(0)
        for _ in range(6):
            flat = int(torch.randint(gen.numel(), (1,), generator=g))
            idx = tuple(int(v) for v in torch.unravel_index(torch.tensor(flat), gen.shape))
            analytic = gen.grad[idx].item()
            numeric = fd_grad(lambda: make_loss(gen).item(), gen.data, idx, self.EPS)
            assert rel_err(analytic, numeric) < 1e-3, (idx, analytic, numeric)

    def test_l1(self):
        torch.manual_seed(7)
        target = torch.randn(1, 3, 8, 8, dtype=torch.float64)
        gen = torch.randn(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
        self._check(lambda x: l1_loss(x, target), gen)

    def test_style(self):
        torch.manual_seed(8)
        target = torch.randn(1, 3, 8, 8, dtype=torch.float64)
        gen = torch.randn(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
        self._check(lambda x: style_loss(x, target), gen)

    def test_perceptual(self, extractor64):
        # 16x16 minimum: the extractor halves resolution 4 times
        torch.manual_seed(9)
        target = torch.randn(1, 3, 16, 16, dtype=torch.float64)
        gen = torch.randn(1, 3, 16, 16, dtype=torch.float64, requires_grad=True)
        self._check(lambda x: perceptual_loss(x, target, extractor64), gen)

    def test_adversarial(self):
        torch.manual_seed(10)
        critic = PatchDiscriminator(1).double()
        gen = (torch.rand(1, 3, 32, 32, dtype=torch.float64) * 1.6 - 0.8).requires_grad_()
        self._check(lambda x: generator_adversarial_loss(critic(x)), gen)
