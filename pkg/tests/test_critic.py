import pytest
import torch
import torch.nn as nn

from haifit.core import make_schedule
from haifit.critic import MultiScaleCritics, PatchDiscriminator
from haifit.errors import GrowthError, ProtocolError, ShapeError
from haifit.losses import adversarial_losses


class TestPatchDiscriminator:
    def test_scores_in_open_unit_interval(self):
        torch.manual_seed(0)
        d = PatchDiscriminator(1)
        out = d(torch.rand(2, 3, 32, 32) * 2 - 1)
        assert out.shape[0] == 2 and out.shape[1] == 1
        assert out.shape[2] >= 1 and out.shape[3] >= 1
        assert (out > 0).all() and (out < 1).all()

    def test_zero_weights_give_half(self):
        d = PatchDiscriminator(1)
        with torch.no_grad():
            for m in d.modules():
                if isinstance(m, nn.Conv2d):
                    m.weight.zero_()
                    m.bias.zero_()
        out = d(torch.rand(1, 3, 32, 32))
        assert torch.allclose(out, torch.full_like(out, 0.5))

    def test_determinism(self):
        torch.manual_seed(1)
        d = PatchDiscriminator(1).eval()
        x = torch.rand(1, 3, 64, 64)
        with torch.no_grad():
            assert torch.equal(d(x), d(x))


class TestMultiScaleCritics:
    def _critics(self, levels=1):
        torch.manual_seed(0)
        return MultiScaleCritics(make_schedule(32, 256), initial_levels=levels)

    def test_one_discriminator_per_level(self):
        critics = self._critics(levels=3)
        for n, res in zip(range(1, 4), (32, 64, 128)):
            out = critics.discriminate(torch.rand(1, 3, res, res) * 2 - 1, n)
            assert (out > 0).all() and (out < 1).all()

    def test_resolution_mismatch(self):
        critics = self._critics(levels=2)
        with pytest.raises(ShapeError):
            critics.discriminate(torch.rand(1, 3, 64, 64), 1)

    def test_level_out_of_range(self):
        with pytest.raises(ProtocolError):
            self._critics().discriminate(torch.rand(1, 3, 64, 64), 2)

    def test_grow_appends_and_preserves(self):
        critics = self._critics()
        before = {k: v.clone() for k, v in critics.state_dict().items()}
        critics.grow()
        assert critics.num_levels == 2
        after = critics.state_dict()
        for k, v in before.items():
            assert torch.equal(after[k], v)
        critics.discriminate(torch.rand(1, 3, 64, 64), 2)  # new level's resolution

    def test_grow_error_at_finest(self):
        torch.manual_seed(0)
        critics = MultiScaleCritics(make_schedule(32, 64), initial_levels=2)
        with pytest.raises(GrowthError):
            critics.grow()

    def test_adversarial_gradients_finite(self):
        critics = self._critics(levels=2)
        real = [torch.rand(2, 3, 32, 32) * 2 - 1, torch.rand(2, 3, 64, 64) * 2 - 1]
        fake = [torch.rand(2, 3, 32, 32) * 2 - 1, torch.rand(2, 3, 64, 64) * 2 - 1]
        rs = [critics.discriminate(r, n + 1) for n, r in enumerate(real)]
        fs = [critics.discriminate(f, n + 1) for n, f in enumerate(fake)]
        d_loss, _ = adversarial_losses(rs, fs)
        d_loss.backward()
        for name, p in critics.named_parameters():
            assert p.grad is not None and torch.isfinite(p.grad).all(), name
