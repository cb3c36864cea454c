"""Multi-scale feature fusion encoder: shallow conv contour features plus a
bidirectional recurrent abstract-intent branch, fused by a learnable scalar."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import SequenceError, ShapeError

CONTOUR_CHANNELS = 256
INTENT_GRID = 4  # abstract branch works on a 4x4 spatial grid
PART_DIM = CONTOUR_CHANNELS * INTENT_GRID * INTENT_GRID // 4  # 1024
NUM_PARTS = 4


def level_input_fuse(sketch_n: torch.Tensor, prev_output: torch.Tensor | None) -> torch.Tensor:
    """Element-wise sum of the level's sketch with the coarser level's output.

    `prev_output` is the previous level's generated image at half resolution;
    it is nearest-neighbor upsampled here.  At the bottom level pass None.
    """
    if prev_output is None:
        return sketch_n
    up = F.interpolate(prev_output, size=sketch_n.shape[-2:], mode="nearest")
    if up.shape != sketch_n.shape:
        raise ShapeError(f"fuse shape mismatch: {tuple(up.shape)} vs {tuple(sketch_n.shape)}")
    return sketch_n + up


def sequence_split(x: torch.Tensor) -> torch.Tensor:
    """Split a (b, 256, 4, 4) feature into a (4, b, 1024) sequence.

    Flattening is natural array order (channel-major over the 4x4 grid); part j
    is the j-th contiguous 1024-chunk.  `sequence_merge` is the exact inverse.
    """
    if x.dim() != 4 or x.shape[1] != CONTOUR_CHANNELS or x.shape[-2:] != (INTENT_GRID, INTENT_GRID):
        raise ShapeError(f"expected (b, 256, 4, 4), got {tuple(x.shape)}")
    b = x.shape[0]
    flat = x.reshape(b, NUM_PARTS * PART_DIM)
    return flat.reshape(b, NUM_PARTS, PART_DIM).permute(1, 0, 2)


def sequence_merge(seq: torch.Tensor) -> torch.Tensor:
    """Inverse of sequence_split: (4, b, 1024) back to (b, 256, 4, 4)."""
    if seq.dim() != 3 or seq.shape[0] != NUM_PARTS or seq.shape[2] != PART_DIM:
        raise SequenceError(f"expected (4, b, 1024) sequence, got {tuple(seq.shape)}")
    b = seq.shape[1]
    return seq.permute(1, 0, 2).reshape(b, CONTOUR_CHANNELS, INTENT_GRID, INTENT_GRID)


class ShallowConvModule(nn.Module):
    """Contour extractor: 3 -> 64 -> 128 -> 256 channels at quarter resolution."""

    def __init__(self):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, 64, 3, stride=2, padding=1),
            nn.InstanceNorm2d(64),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(64, 128, 3, stride=2, padding=1),
            nn.InstanceNorm2d(128),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(128, 256, 3, stride=1, padding=1),
            nn.InstanceNorm2d(256),
            nn.LeakyReLU(0.2, inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != 3:
            raise ShapeError(f"expected 3-channel input, got {x.shape[1]}")
        if x.shape[-1] % 4 != 0 or x.shape[-2] % 4 != 0:
            raise ShapeError(f"resolution {tuple(x.shape[-2:])} not divisible by 4")
        return self.net(x)


class AbstractFeatureModule(nn.Module):
    """Two 2-layer LSTMs over the 4-part sequence, forward and reversed,
    concatenated on channels and reduced back to 256 with a 1x1 conv."""

    def __init__(self):
        super().__init__()
        self.lstm_dir = nn.LSTM(PART_DIM, PART_DIM, num_layers=2)
        self.lstm_rev = nn.LSTM(PART_DIM, PART_DIM, num_layers=2)
        self.reduce = nn.Conv2d(2 * CONTOUR_CHANNELS, CONTOUR_CHANNELS, 1)

    def branch_outputs(self, seq: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Per-step outputs of both branches, aligned to the original part order."""
        if seq.shape[0] != NUM_PARTS:
            raise SequenceError(f"expected {NUM_PARTS} parts, got {seq.shape[0]}")
        dir_out, _ = self.lstm_dir(seq)
        rev_out, _ = self.lstm_rev(seq.flip(0))
        return dir_out, rev_out.flip(0)

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        dir_out, rev_out = self.branch_outputs(seq)
        both = torch.cat([sequence_merge(dir_out), sequence_merge(rev_out)], dim=1)
        return self.reduce(both)


class MultiScaleFusionEncoder(nn.Module):
    """One pyramid level's encoder: contour branch, abstract branch, scalar fusion.

    Output for input resolution m is 256 x m/4 x m/4.  With use_afrm=False the
    abstract branch is bypassed entirely (ablation).
    """

    def __init__(self, use_afrm: bool = True):
        super().__init__()
        self.use_afrm = use_afrm
        self.scm = ShallowConvModule()
        if use_afrm:
            self.afrm = AbstractFeatureModule()
            self.zeta = nn.Parameter(torch.ones(()))

    def forward(self, x_s: torch.Tensor, prev_output: torch.Tensor | None = None) -> torch.Tensor:
        fused = level_input_fuse(x_s, prev_output)
        contour = self.scm(fused)
        if not self.use_afrm:
            return contour
        pooled = F.adaptive_avg_pool2d(contour, INTENT_GRID)
        intent = self.afrm(sequence_split(pooled))
        intent = F.interpolate(intent, size=contour.shape[-2:], mode="nearest")
        return self.zeta * contour + intent
