"""Per-level patch discriminators for the progressive pyramid."""

from __future__ import annotations

import torch
import torch.nn as nn

from .core import ResolutionSchedule
from .errors import GrowthError, ProtocolError, ShapeError
from .pyramid import init_gan_weights


class PatchDiscriminator(nn.Module):
    """Standard patch critic: 4 stride-2 convs then a 1-channel sigmoid map."""

    def __init__(self, level_index: int):
        super().__init__()
        self.level_index = level_index
        self.net = nn.Sequential(
            nn.Conv2d(3, 64, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(64, 128, 4, stride=2, padding=1),
            nn.InstanceNorm2d(128),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(128, 256, 4, stride=2, padding=1),
            nn.InstanceNorm2d(256),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(256, 512, 4, stride=2, padding=1),
            nn.InstanceNorm2d(512),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(512, 1, 4, stride=1, padding=1),
            nn.Sigmoid(),
        )
        init_gan_weights(self)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return self.net(image)


class MultiScaleCritics(nn.Module):
    """One discriminator per active pyramid level."""

    def __init__(self, schedule: ResolutionSchedule, initial_levels: int = 1):
        super().__init__()
        if not 1 <= initial_levels <= len(schedule):
            raise ProtocolError(f"initial_levels {initial_levels} outside schedule")
        self.schedule = schedule
        self.critics = nn.ModuleList()
        for _ in range(initial_levels):
            self.grow()

    @property
    def num_levels(self) -> int:
        return len(self.critics)

    def grow(self) -> None:
        if self.num_levels >= len(self.schedule):
            raise GrowthError("already at the finest resolution")
        self.critics.append(PatchDiscriminator(self.num_levels + 1))

    def discriminate(self, image: torch.Tensor, n: int) -> torch.Tensor:
        """Per-patch realness map for level n; input must be at that level's resolution."""
        if not 1 <= n <= self.num_levels:
            raise ProtocolError(f"level {n} outside 1..{self.num_levels}")
        expected = self.schedule[n - 1]
        if image.shape[-2:] != (expected, expected):
            raise ShapeError(
                f"level {n} expects {expected}x{expected}, got {tuple(image.shape[-2:])}")
        return self.critics[n - 1](image)
