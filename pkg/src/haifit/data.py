"""Dataset ingest (paired sketch/photo PNG layout), splitting, pyramid batching,
and a procedural garment generator for desk-scale runs."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from .core import (FeatureMap, RANGE_SIGNED_UNIT, ResolutionSchedule, downsample_pyramid,
                   normalize_image)
from .errors import ConfigError, PairingError


@dataclass(frozen=True)
class SketchImagePair:
    """One aligned training sample: sketch and photo at the same resolution."""

    id: str
    sketch: FeatureMap
    photo: FeatureMap

    def __post_init__(self):
        if self.sketch.data.shape != self.photo.data.shape:
            raise PairingError(f"pair {self.id}: sketch/photo resolution mismatch")


@dataclass
class DatasetManifest:
    """Paired-file index with a reproducible train/test split."""

    root: Path
    ids: list[str]
    train_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)

    def sketch_path(self, pair_id: str) -> Path:
        return self.root / "sketches" / f"{pair_id}.png"

    def photo_path(self, pair_id: str) -> Path:
        return self.root / "images" / f"{pair_id}.png"


def load_manifest(root: str | os.PathLike) -> DatasetManifest:
    """Index root/images and root/sketches; every id must exist in both."""
    root = Path(root)
    photos = {p.stem for p in (root / "images").glob("*.png")}
    sketches = {p.stem for p in (root / "sketches").glob("*.png")}
    if photos != sketches:
        missing = sorted(photos ^ sketches)
        raise PairingError(f"unpaired ids: {missing}")
    ids = sorted(photos)
    return DatasetManifest(root=root, ids=ids, train_ids=list(ids), test_ids=[])


def split(manifest: DatasetManifest, train_count: int, seed: int) -> DatasetManifest:
    """Seeded shuffle then prefix split; same seed always gives the same split."""
    if train_count > len(manifest.ids):
        raise ConfigError(f"train_count {train_count} > dataset size {len(manifest.ids)}")
    order = list(manifest.ids)
    np.random.default_rng(seed).shuffle(order)
    return DatasetManifest(root=manifest.root, ids=list(manifest.ids),
                           train_ids=sorted(order[:train_count]),
                           test_ids=sorted(order[train_count:]))


def _resize(img: Image.Image, resolution: int) -> Image.Image:
    if img.size == (resolution, resolution):
        return img
    return img.resize((resolution, resolution), Image.BOX)


def load_pair(manifest: DatasetManifest, pair_id: str, resolution: int) -> SketchImagePair:
    sketch = Image.open(manifest.sketch_path(pair_id)).convert("RGB")
    photo = Image.open(manifest.photo_path(pair_id)).convert("RGB")
    return SketchImagePair(
        id=pair_id,
        sketch=normalize_image(np.array(_resize(sketch, resolution))),
        photo=normalize_image(np.array(_resize(photo, resolution))),
    )


def synth_pair(seed: int, resolution: int = 256) -> SketchImagePair:
    """Procedural garment-like sample: filled colored polygon photo plus its
    edge rendering as the sketch.  Deterministic per seed."""
    rng = np.random.default_rng(seed)
    s = resolution
    u = s / 256.0  # geometry is authored on a 256 grid

    def pt(x, y):
        return (x * u, y * u)

    shoulder = 40 + rng.integers(0, 25)
    waist = 60 + rng.integers(0, 30)
    hem = 50 + rng.integers(0, 40)
    neck = 12 + rng.integers(0, 10)
    length = 180 + rng.integers(0, 50)
    sleeve = 60 + rng.integers(0, 60)
    torso = [
        pt(128 - shoulder, 40), pt(128 - neck, 30), pt(128 + neck, 30),
        pt(128 + shoulder, 40), pt(128 + waist, 130), pt(128 + hem, 30 + length),
        pt(128 - hem, 30 + length), pt(128 - waist, 130),
    ]
    left_sleeve = [pt(128 - shoulder, 40), pt(128 - shoulder - 30, 50 + sleeve),
                   pt(128 - shoulder - 8, 60 + sleeve), pt(128 - waist + 8, 90)]
    right_sleeve = [pt(128 + shoulder, 40), pt(128 + shoulder + 30, 50 + sleeve),
                    pt(128 + shoulder + 8, 60 + sleeve), pt(128 + waist - 8, 90)]

    base = tuple(int(c) for c in rng.integers(30, 220, size=3))
    accent = tuple(int(c) for c in rng.integers(30, 220, size=3))

    photo = Image.new("RGB", (s, s), (255, 255, 255))
    pd = ImageDraw.Draw(photo)
    for poly in (left_sleeve, right_sleeve, torso):
        pd.polygon(poly, fill=base)
    # a few horizontal accent stripes clipped to the torso
    mask = Image.new("L", (s, s), 0)
    ImageDraw.Draw(mask).polygon(torso, fill=255)
    stripes = Image.new("RGB", (s, s), base)
    sd = ImageDraw.Draw(stripes)
    for _ in range(int(rng.integers(1, 4))):
        y0 = int(rng.integers(40, 200) * u)
        sd.rectangle([0, y0, s, y0 + max(2, int(10 * u))], fill=accent)
    photo.paste(stripes, (0, 0), mask)

    sketch = Image.new("RGB", (s, s), (255, 255, 255))
    sk = ImageDraw.Draw(sketch)
    width = max(1, int(2 * u))
    for poly in (left_sleeve, right_sleeve, torso):
        sk.line(poly + [poly[0]], fill=(0, 0, 0), width=width)

    return SketchImagePair(
        id=f"synth-{seed}",
        sketch=normalize_image(np.array(sketch)),
        photo=normalize_image(np.array(photo)),
    )


def write_synth_dataset(root: str | os.PathLike, count: int, resolution: int = 256,
                        seed: int = 0) -> DatasetManifest:
    """Write `count` synthetic pairs in the paired-PNG layout and index them."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "sketches").mkdir(parents=True, exist_ok=True)
    for i in range(count):
        pair = synth_pair(seed + i, resolution)
        pair_id = f"{i:04d}"
        _fm_to_image(pair.photo).save(root / "images" / f"{pair_id}.png")
        _fm_to_image(pair.sketch).save(root / "sketches" / f"{pair_id}.png")
    return load_manifest(root)


def _fm_to_image(fm: FeatureMap) -> Image.Image:
    from .core import denormalize_image

    return Image.fromarray(denormalize_image(fm))


def batch_pyramids(pairs: list[SketchImagePair], schedule: ResolutionSchedule,
                   batch_size: int) -> list[tuple[list[torch.Tensor], list[torch.Tensor]]]:
    """Batch pairs and build per-level (sketch, photo) pyramids, coarsest first.

    The last partial batch is kept.  Returns one (sketch_levels, photo_levels)
    tuple per batch.
    """
    batches = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        sketch = FeatureMap(torch.cat([p.sketch.data for p in chunk]), RANGE_SIGNED_UNIT)
        photo = FeatureMap(torch.cat([p.photo.data for p in chunk]), RANGE_SIGNED_UNIT)
        batches.append((
            [fm.data for fm in downsample_pyramid(sketch, schedule)],
            [fm.data for fm in downsample_pyramid(photo, schedule)],
        ))
    return batches
