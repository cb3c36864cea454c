"""Training losses: L1, vanilla adversarial, Gram-matrix style, and perceptual."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import TrainConfig
from .errors import ConfigError, ShapeError

SCORE_EPS = 1e-7


def l1_loss(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if generated.shape != target.shape:
        raise ShapeError(f"shape mismatch: {tuple(generated.shape)} vs {tuple(target.shape)}")
    return (generated - target).abs().mean()


def _as_list(scores) -> list[torch.Tensor]:
    return list(scores) if isinstance(scores, (list, tuple)) else [scores]


def adversarial_losses(real_scores, fake_scores) -> tuple[torch.Tensor, torch.Tensor]:
    """Vanilla GAN losses from sigmoid scores, averaged uniformly over scales.

    d_loss = -(E log D(y) + E log(1 - D(G(x)))); the generator uses the
    non-saturating form -E log D(G(x)).  Scores are clamped 1e-7 away from
    {0, 1} before the log.
    """
    reals = _as_list(real_scores)
    fakes = _as_list(fake_scores)
    d_terms, g_terms = [], []
    for r, f in zip(reals, fakes):
        r = r.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
        f = f.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
        d_terms.append(-(torch.log(r).mean() + torch.log(1.0 - f).mean()))
        g_terms.append(-torch.log(f).mean())
    d_loss = torch.stack(d_terms).mean()
    g_loss = torch.stack(g_terms).mean()
    return d_loss, g_loss


def generator_adversarial_loss(fake_scores) -> torch.Tensor:
    """Non-saturating generator term alone: -E log D(G(x)), averaged over scales."""
    terms = [-torch.log(f.clamp(SCORE_EPS, 1.0 - SCORE_EPS)).mean()
             for f in _as_list(fake_scores)]
    return torch.stack(terms).mean()


def gram_matrix(feature: torch.Tensor) -> torch.Tensor:
    """Per-batch c x c channel covariance F F^T / (c h w) of the unfolded map."""
    if feature.dim() != 4:
        raise ShapeError(f"expected 4-D feature, got {tuple(feature.shape)}")
    b, c, h, w = feature.shape
    flat = feature.reshape(b, c, h * w)
    return torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)


def style_loss(generated: torch.Tensor, target: torch.Tensor,
               extractor: "FeatureExtractor | None" = None) -> torch.Tensor:
    """Mean absolute difference of Gram matrices.

    By default the Grams are taken on the images themselves; pass an extractor
    to compare Grams of its feature stages instead (averaged over stages).
    """
    if extractor is None:
        return (gram_matrix(generated) - gram_matrix(target)).abs().mean()
    terms = [
        (gram_matrix(fg) - gram_matrix(ft)).abs().mean()
        for fg, ft in zip(extractor.stages(generated), extractor.stages(target))
    ]
    return torch.stack(terms).mean()


def perceptual_loss(generated: torch.Tensor, target: torch.Tensor,
                    extractor: "FeatureExtractor") -> torch.Tensor:
    """Sum over the 5 extractor stages of the element-normalized L1 feature gap."""
    fg = extractor.stages(generated)
    ft = extractor.stages(target)
    if len(fg) != 5 or len(ft) != 5:
        raise ConfigError(f"extractor must expose 5 stages, got {len(fg)}")
    terms = [(a - b).abs().sum() / a.numel() for a, b in zip(fg, ft)]
    return torch.stack(terms).sum()


@dataclass(frozen=True)
class LossBreakdown:
    l1: float
    adv: float
    style: float
    perceptual: float
    total: float

    @classmethod
    def compute(cls, l1: float, adv: float, style: float, perceptual: float,
                config: TrainConfig) -> "LossBreakdown":
        # total is built from the logged floats so the identity
        # total == lambda-weighted sum holds bit-exactly.
        total = (config.lambda_l1 * l1 + config.lambda_adv * adv
                 + config.lambda_style * style + config.lambda_per * perceptual)
        return cls(l1=l1, adv=adv, style=style, perceptual=perceptual, total=total)


def total_generator_loss(l1: torch.Tensor, adv: torch.Tensor, style: torch.Tensor,
                         perceptual: torch.Tensor,
                         config: TrainConfig) -> tuple[torch.Tensor, LossBreakdown]:
    """Weighted sum tensor (for backward) plus a float breakdown (for logging)."""
    total = (config.lambda_l1 * l1 + config.lambda_adv * adv
             + config.lambda_style * style + config.lambda_per * perceptual)
    breakdown = LossBreakdown.compute(
        l1.item(), adv.item(), style.item(), perceptual.item(), config)
    return total, breakdown


# --- Pluggable feature extractors ----------------------------------------


class FeatureExtractor(nn.Module):
    """Interface: stages(x) returns 5 feature maps of increasing abstraction."""

    def stages(self, x: torch.Tensor) -> list[torch.Tensor]:
        raise NotImplementedError


class TestFeatureExtractor(FeatureExtractor):
    """Fixed random 5-stage conv stack for offline deterministic tests.

    Weights come from the packaged fixture file (see load_test_extractor);
    this is the test-profile stand-in for a pretrained VGG-16.
    """

    CHANNELS = (8, 16, 32, 64, 64)

    def __init__(self):
        super().__init__()
        convs = []
        c_in = 3
        for c_out in self.CHANNELS:
            convs.append(nn.Conv2d(c_in, c_out, 3, padding=1))
            c_in = c_out
        self.convs = nn.ModuleList(convs)
        for p in self.parameters():
            p.requires_grad_(False)

    def stages(self, x: torch.Tensor) -> list[torch.Tensor]:
        out = []
        for i, conv in enumerate(self.convs):
            if i > 0:
                x = F.avg_pool2d(x, 2)
            x = F.leaky_relu(conv(x), 0.2)
            out.append(x)
        return out

    def fid_features(self, x: torch.Tensor) -> torch.Tensor:
        """Globally pooled first-stage activations: a small, desk-scale FID embedding."""
        return self.stages(x)[0].mean(dim=(2, 3))

    forward = stages


FIXTURE_NAME = "extractor_v1.npz"


def load_test_extractor(dtype: torch.dtype = torch.float32) -> TestFeatureExtractor:
    """Load the versioned test-profile extractor weights shipped with the package."""
    ext = TestFeatureExtractor()
    with resources.files("haifit.fixtures").joinpath(FIXTURE_NAME).open("rb") as f:
        arrays = np.load(f)
        state = {k: torch.from_numpy(arrays[k]) for k in arrays.files}
    ext.load_state_dict(state)
    ext.to(dtype)
    for p in ext.parameters():
        p.requires_grad_(False)
    ext.eval()
    return ext


class VGG16Features(FeatureExtractor):
    """Production perceptual backbone: VGG-16 relu1_2..relu5_3 slices.

    Weights are user-supplied (a torchvision vgg16 state dict path); nothing
    is downloaded or bundled.
    """

    _STAGE_ENDS = (4, 9, 16, 23, 30)

    def __init__(self, features: nn.Sequential):
        super().__init__()
        self.features = features
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @classmethod
    def from_weights(cls, path: str) -> "VGG16Features":
        from torchvision.models import vgg16

        model = vgg16(weights=None)
        model.load_state_dict(torch.load(path, map_location="cpu"))
        return cls(model.features)

    def stages(self, x: torch.Tensor) -> list[torch.Tensor]:
        out = []
        start = 0
        for end in self._STAGE_ENDS:
            for layer in self.features[start:end]:
                x = layer(x)
            out.append(x)
            start = end
        return out
