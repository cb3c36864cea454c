"""Pyramid of generators with cross-level skip connections.

Level n owns its own encoder, a residual block whose depth grows with n, and
an upsampling head to a 3-channel tanh image.  The coarser level's last
residual feature gates the next level's encoder output as an attention map.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import ResolutionSchedule
from .encoder import CONTOUR_CHANNELS, MultiScaleFusionEncoder
from .errors import GrowthError, ProtocolError, ShapeError

BASE_RESIDUAL_DEPTH = 3  # level n has 3 + n residual convs (4 at the coarsest)


def init_gan_weights(module: nn.Module) -> None:
    """normal(0, 0.02) conv weights, zero bias; recurrent layers keep defaults."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def cscm_fuse(x_n: torch.Tensor, x_prev: torch.Tensor, use_cscm: bool = True) -> torch.Tensor:
    """Cross-level fusion x + x * x_prev; identity when the module is ablated."""
    if not use_cscm:
        return x_n
    if x_prev.shape != x_n.shape:
        raise ShapeError(f"cscm shape mismatch: {tuple(x_prev.shape)} vs {tuple(x_n.shape)}")
    return x_n + x_n * x_prev


class ResidualBlock(nn.Module):
    def __init__(self, depth: int, channels: int = CONTOUR_CHANNELS):
        super().__init__()
        layers = []
        for _ in range(depth):
            layers += [
                nn.Conv2d(channels, channels, 3, padding=1),
                nn.InstanceNorm2d(channels),
                nn.LeakyReLU(0.2, inplace=True),
            ]
        self.body = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class GeneratorLevel(nn.Module):
    """One pyramid stage: residual block at m/4 plus a x4 upsampling head.

    For n > 1 the coarser level's image is nearest-upsampled and added to the
    head's pre-activation output, so the final tanh keeps values in [-1, 1].
    """

    def __init__(self, level_index: int):
        super().__init__()
        self.level_index = level_index
        self.block = ResidualBlock(BASE_RESIDUAL_DEPTH + level_index)
        self.head = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(CONTOUR_CHANNELS, 128, 3, padding=1),
            nn.InstanceNorm2d(128),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(128, 64, 3, padding=1),
            nn.InstanceNorm2d(64),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(64, 3, 3, padding=1),
        )
        init_gan_weights(self)

    @property
    def residual_depth(self) -> int:
        return BASE_RESIDUAL_DEPTH + self.level_index

    def forward(self, fused_input: torch.Tensor,
                prev_image: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        if self.level_index > 1 and prev_image is None:
            raise ProtocolError(f"level {self.level_index} needs the coarser level's image")
        if self.level_index == 1 and prev_image is not None:
            raise ProtocolError("level 1 takes no previous image")
        resid = self.block(fused_input)
        pre = self.head(resid)
        if prev_image is not None:
            pre = pre + F.interpolate(prev_image, size=pre.shape[-2:], mode="nearest")
        return torch.tanh(pre), resid


class PyramidGenerator(nn.Module):
    """The full generator stack over a resolution schedule.

    Grows one level at a time; inactive (not yet grown) schedule entries have
    no parameters.  Each level has an independent encoder.
    """

    def __init__(self, schedule: ResolutionSchedule, use_afrm: bool = True,
                 use_cscm: bool = True, initial_levels: int = 1):
        super().__init__()
        if not 1 <= initial_levels <= len(schedule):
            raise ProtocolError(f"initial_levels {initial_levels} outside schedule")
        self.schedule = schedule
        self.use_afrm = use_afrm
        self.use_cscm = use_cscm
        self.encoders = nn.ModuleList()
        self.levels = nn.ModuleList()
        for _ in range(initial_levels):
            self.grow()

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def grow(self) -> None:
        """Append the next level's encoder and generator; existing weights untouched."""
        if self.num_levels >= len(self.schedule):
            raise GrowthError("already at the finest resolution")
        self.encoders.append(MultiScaleFusionEncoder(use_afrm=self.use_afrm))
        self.levels.append(GeneratorLevel(self.num_levels + 1))

    def sketch_pyramid(self, sketch: torch.Tensor) -> list[torch.Tensor]:
        if sketch.shape[-1] != self.schedule.finest or sketch.shape[-2] != self.schedule.finest:
            raise ShapeError(
                f"sketch resolution {tuple(sketch.shape[-2:])} != finest {self.schedule.finest}")
        out = []
        for res in self.schedule.levels:
            if res == self.schedule.finest:
                out.append(sketch)
            else:
                out.append(F.avg_pool2d(sketch, self.schedule.finest // res))
        return out

    def forward_full(self, sketch: torch.Tensor, active_levels: int | None = None) -> list[torch.Tensor]:
        """Run levels 1..active_levels chained; returns each level's image, finest last."""
        if active_levels is None:
            active_levels = self.num_levels
        if not 1 <= active_levels <= self.num_levels:
            raise ProtocolError(f"active_levels {active_levels} outside 1..{self.num_levels}")
        pyramid = self.sketch_pyramid(sketch)
        images: list[torch.Tensor] = []
        prev_image: torch.Tensor | None = None
        prev_resid: torch.Tensor | None = None
        for n in range(1, active_levels + 1):
            x_n = self.encoders[n - 1](pyramid[n - 1], prev_image)
            if n > 1 and self.use_cscm:
                up_resid = F.interpolate(prev_resid, size=x_n.shape[-2:], mode="nearest")
                x_n = cscm_fuse(x_n, up_resid)
            prev_image, prev_resid = self.levels[n - 1](x_n, prev_image)
            images.append(prev_image)
        return images

    forward = forward_full
