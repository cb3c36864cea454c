"""Shared data model: feature maps, resolution schedules, train config, checkpoints."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ChannelCountError, CheckpointError, ConfigError, ScheduleError, ShapeError

RANGE_SIGNED_UNIT = "[-1,1]"
RANGE_UNBOUNDED = "unbounded"
_RANGE_TOL = 1e-6


@dataclass(frozen=True)
class FeatureMap:
    """A 4-D (batch, channels, height, width) tensor with a declared value range.

    The lingua franca between encoder, generators, discriminators and metrics.
    Instances are immutable after construction; the wrapped tensor must not be
    mutated in place.
    """

    data: torch.Tensor
    value_range: str = RANGE_UNBOUNDED

    def __post_init__(self):
        if self.data.dim() != 4:
            raise ShapeError(f"FeatureMap needs 4 dims (b,c,h,w), got {tuple(self.data.shape)}")
        b, c, h, w = self.data.shape
        if b < 1 or h < 1 or w < 1:
            raise ShapeError(f"non-positive batch or spatial size: {tuple(self.data.shape)}")
        with torch.no_grad():
            if not torch.isfinite(self.data).all():
                raise ShapeError("FeatureMap contains NaN or Inf")
            if self.value_range == RANGE_SIGNED_UNIT:
                lo = float(self.data.min())
                hi = float(self.data.max())
                if lo < -1.0 - _RANGE_TOL or hi > 1.0 + _RANGE_TOL:
                    raise ShapeError(f"values [{lo}, {hi}] outside declared range [-1,1]")

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def resolution(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ResolutionSchedule:
    """Ordered square resolutions, each exactly double its predecessor."""

    levels: tuple[int, ...]

    def __post_init__(self):
        if not self.levels:
            raise ScheduleError("schedule must have at least one level")
        for a, b in zip(self.levels, self.levels[1:]):
            if b != 2 * a:
                raise ScheduleError(f"levels must double: {a} -> {b}")
        if any(r <= 0 for r in self.levels):
            raise ScheduleError("resolutions must be positive")

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> int:
        return self.levels[i]

    @property
    def finest(self) -> int:
        return self.levels[-1]

    @property
    def coarsest(self) -> int:
        return self.levels[0]

    def grown(self) -> "ResolutionSchedule":
        return ResolutionSchedule(self.levels + (2 * self.levels[-1],))


def make_schedule(coarsest: int, finest: int) -> ResolutionSchedule:
    """Build [coarsest, 2*coarsest, ..., finest]; the ratio must be a power of two."""
    if coarsest <= 0 or finest < coarsest:
        raise ScheduleError(f"bad endpoints ({coarsest}, {finest})")
    levels = [coarsest]
    while levels[-1] < finest:
        levels.append(2 * levels[-1])
    if levels[-1] != finest:
        raise ScheduleError(f"{finest} is not {coarsest} * 2^j")
    return ResolutionSchedule(tuple(levels))


DEFAULT_SCHEDULE = make_schedule(32, 256)


@dataclass
class TrainConfig:
    """All training hyperparameters plus ablation toggles and the resolution schedule."""

    lambda_l1: float = 1.5
    lambda_adv: float = 10.0
    lambda_style: float = 250.0
    lambda_per: float = 0.1
    lr_generator: float = 1e-4
    lr_discriminator: float = 5e-4
    batch_size: int = 8
    k_alternation: int = 1
    decay_period_epochs: int = 100
    decay_factor: float = 0.5
    early_stop_patience: int = 10
    use_afrm: bool = True
    use_cscm: bool = True
    schedule: ResolutionSchedule = field(default_factory=lambda: DEFAULT_SCHEDULE)
    seed: int = 0
    epochs_per_stage: int = 20
    max_epochs: int = 1000
    gram_on_features: bool = False

    def __post_init__(self):
        for name in ("lambda_l1", "lambda_adv", "lambda_style", "lambda_per",
                     "lr_generator", "lr_discriminator"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")
        if self.k_alternation < 1:
            raise ConfigError("k_alternation must be >= 1")
        if not isinstance(self.schedule, ResolutionSchedule):
            self.schedule = ResolutionSchedule(tuple(self.schedule))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schedule"] = list(self.schedule.levels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["schedule"] = ResolutionSchedule(tuple(d["schedule"]))
        return cls(**d)


def normalize_image(raw: np.ndarray) -> FeatureMap:
    """Map an 8-bit (h, w, 3) image into a (1, 3, h, w) FeatureMap in [-1, 1]."""
    arr = np.asarray(raw)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ChannelCountError(f"expected (h, w, 3) image, got {arr.shape}")
    t = torch.from_numpy(arr.astype(np.float32) / 127.5 - 1.0)
    t = t.permute(2, 0, 1).unsqueeze(0)
    return FeatureMap(t, RANGE_SIGNED_UNIT)


def denormalize_image(fm: FeatureMap) -> np.ndarray:
    """Inverse of normalize_image: (1, 3, h, w) in [-1, 1] back to uint8 (h, w, 3)."""
    if fm.channels != 3:
        raise ChannelCountError(f"expected 3 channels, got {fm.channels}")
    t = (fm.data[0].detach().clamp(-1.0, 1.0) + 1.0) * 127.5
    return t.round().to(torch.uint8).permute(1, 2, 0).numpy()


def downsample_pyramid(image: FeatureMap, schedule: ResolutionSchedule) -> list[FeatureMap]:
    """Area-average the finest image down to every schedule level, coarsest first."""
    if image.resolution != schedule.finest or image.data.shape[3] != schedule.finest:
        raise ShapeError(
            f"image resolution {image.resolution} != finest schedule entry {schedule.finest}")
    out = []
    for res in schedule.levels:
        if res == schedule.finest:
            out.append(image)
        else:
            factor = schedule.finest // res
            down = F.avg_pool2d(image.data, kernel_size=factor)
            out.append(FeatureMap(down, image.value_range))
    return out


# --- Checkpoint container -------------------------------------------------
#
# Format "haifit-ckpt/1": magic line, 8-byte little-endian header length,
# JSON header (sorted keys), then raw little-endian tensor bytes in the
# order listed in the header.  Fully deterministic: identical state always
# produces identical bytes.

_CKPT_MAGIC = b"haifit-ckpt/1\n"

_DTYPES = {
    "float32": (np.float32, torch.float32),
    "float64": (np.float64, torch.float64),
    "int64": (np.int64, torch.int64),
}


@dataclass
class Checkpoint:
    """Serializable model + optimizer state with a config snapshot."""

    config: TrainConfig
    active_level: int
    epoch: int
    best_validation_ssim: float
    tensors: dict[str, torch.Tensor]
    scalars: dict[str, float] = field(default_factory=dict)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]

    def to_bytes(self) -> bytes:
        entries = []
        blobs = []
        offset = 0
        for name in sorted(self.tensors):
            t = self.tensors[name].detach().cpu().contiguous()
            dtype = str(t.dtype).removeprefix("torch.")
            if dtype not in _DTYPES:
                raise CheckpointError(f"unsupported dtype {dtype} for tensor {name}")
            raw = t.numpy().astype(_DTYPES[dtype][0]).tobytes()
            entries.append({
                "name": name, "dtype": dtype, "shape": list(t.shape),
                "offset": offset, "nbytes": len(raw),
            })
            blobs.append(raw)
            offset += len(raw)
        header = {
            "version": 1,
            "config": self.config.to_dict(),
            "active_level": self.active_level,
            "epoch": self.epoch,
            "best_validation_ssim": self.best_validation_ssim,
            "scalars": self.scalars,
            "tensors": entries,
        }
        hj = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return _CKPT_MAGIC + len(hj).to_bytes(8, "little") + hj + b"".join(blobs)

    def save(self, path: str | os.PathLike) -> None:
        tmp = str(path) + ".tmp"
        with open(tmp, "wb") as f:
            f.write(self.to_bytes())
        os.replace(tmp, path)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Checkpoint":
        if not raw.startswith(_CKPT_MAGIC):
            raise CheckpointError("not a haifit checkpoint")
        pos = len(_CKPT_MAGIC)
        hlen = int.from_bytes(raw[pos:pos + 8], "little")
        pos += 8
        header = json.loads(raw[pos:pos + hlen])
        body = raw[pos + hlen:]
        tensors = {}
        for e in header["tensors"]:
            np_dt, t_dt = _DTYPES[e["dtype"]]
            arr = np.frombuffer(body, dtype=np_dt, count=int(np.prod(e["shape"], initial=1)),
                                offset=e["offset"]).reshape(e["shape"]).copy()
            tensors[e["name"]] = torch.from_numpy(arr).to(t_dt)
        return cls(
            config=TrainConfig.from_dict(header["config"]),
            active_level=header["active_level"],
            epoch=header["epoch"],
            best_validation_ssim=header["best_validation_ssim"],
            tensors=tensors,
            scalars=header.get("scalars", {}),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Checkpoint":
        try:
            with open(path, "rb") as f:
                raw = f.read()
        except OSError as e:
            raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
        return cls.from_bytes(raw)
