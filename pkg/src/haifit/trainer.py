"""Progressive training loop: per-stage alternating D/G optimization, growth,
learning-rate decay, SSIM early stopping, and checkpointing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import Checkpoint, FeatureMap, RANGE_SIGNED_UNIT, TrainConfig, denormalize_image
from .critic import MultiScaleCritics
from .data import SketchImagePair, batch_pyramids
from .errors import NumericalError
from .losses import (FeatureExtractor, LossBreakdown, adversarial_losses,
                     generator_adversarial_loss, l1_loss, perceptual_loss, style_loss,
                     total_generator_loss)
from .metrics import ssim
from .pyramid import PyramidGenerator


def build_models(config: TrainConfig, active_levels: int = 1
                 ) -> tuple[PyramidGenerator, MultiScaleCritics]:
    generator = PyramidGenerator(config.schedule, use_afrm=config.use_afrm,
                                 use_cscm=config.use_cscm, initial_levels=active_levels)
    critics = MultiScaleCritics(config.schedule, initial_levels=active_levels)
    return generator, critics


def _make_optimizers(config: TrainConfig, generator, critics, lr_g=None, lr_d=None):
    opt_g = torch.optim.Adam(generator.parameters(),
                             lr=lr_g if lr_g is not None else config.lr_generator,
                             betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(critics.parameters(),
                             lr=lr_d if lr_d is not None else config.lr_discriminator,
                             betas=(0.5, 0.999))
    return opt_g, opt_d


@dataclass
class TrainState:
    config: TrainConfig
    generator: PyramidGenerator
    critics: MultiScaleCritics
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    extractor: FeatureExtractor
    stage: int = 1
    epoch: int = 0
    phase_counter: int = 0
    best_validation_ssim: float = -math.inf
    evals_since_improvement: int = 0
    records: list[dict] = field(default_factory=list)

    @property
    def lr_g(self) -> float:
        return self.opt_g.param_groups[0]["lr"]

    @property
    def lr_d(self) -> float:
        return self.opt_d.param_groups[0]["lr"]


def init_state(config: TrainConfig, extractor: FeatureExtractor) -> TrainState:
    torch.manual_seed(config.seed)
    generator, critics = build_models(config, active_levels=1)
    opt_g, opt_d = _make_optimizers(config, generator, critics)
    return TrainState(config=config, generator=generator, critics=critics,
                      opt_g=opt_g, opt_d=opt_d, extractor=extractor)


def _generator_terms(state: TrainState, images, photo_levels, fake_scores):
    """The four generator loss terms for the active pyramid: L1 averaged over
    levels, adversarial averaged over scales, style/perceptual at the finest."""
    active = state.stage
    l1 = torch.stack([l1_loss(images[n], photo_levels[n]) for n in range(active)]).mean()
    adv_g = generator_adversarial_loss(fake_scores)
    finest = active - 1
    style = style_loss(images[finest], photo_levels[finest],
                       state.extractor if state.config.gram_on_features else None)
    per = perceptual_loss(images[finest], photo_levels[finest], state.extractor)
    return l1, adv_g, style, per


def train_batch(state: TrainState, sketch_levels, photo_levels) -> dict:
    """One optimization iteration on one batch.

    The alternation phase is derived from a running batch counter: k critic
    iterations (generator fixed), then k generator iterations (critic fixed).
    Every iteration logs the full loss breakdown.
    """
    cfg = state.config
    active = state.stage
    d_phase = (state.phase_counter // cfg.k_alternation) % 2 == 0
    state.phase_counter += 1

    if d_phase:
        with torch.no_grad():
            images = state.generator.forward_full(sketch_levels[-1], active_levels=active)
        real_scores = [state.critics.discriminate(photo_levels[n], n + 1) for n in range(active)]
        fake_scores = [state.critics.discriminate(images[n], n + 1) for n in range(active)]
        d_loss, _ = adversarial_losses(real_scores, fake_scores)
        state.opt_d.zero_grad()
        d_loss.backward()
        state.opt_d.step()
        adv_d = d_loss.item()
        with torch.no_grad():
            fake_scores = [f.detach() for f in fake_scores]
            l1, adv_g, style, per = _generator_terms(state, images, photo_levels, fake_scores)
            breakdown = LossBreakdown.compute(l1.item(), adv_g.item(), style.item(),
                                              per.item(), cfg)
    else:
        images = state.generator.forward_full(sketch_levels[-1], active_levels=active)
        fake_scores = [state.critics.discriminate(images[n], n + 1) for n in range(active)]
        l1, adv_g, style, per = _generator_terms(state, images, photo_levels, fake_scores)
        total, breakdown = total_generator_loss(l1, adv_g, style, per, cfg)
        state.opt_g.zero_grad()
        total.backward()
        state.opt_g.step()
        with torch.no_grad():
            real_scores = [state.critics.discriminate(photo_levels[n], n + 1)
                           for n in range(active)]
            d_loss, _ = adversarial_losses(real_scores, [f.detach() for f in fake_scores])
        adv_d = d_loss.item()

    if not math.isfinite(breakdown.total) or not math.isfinite(adv_d):
        raise NumericalError(
            f"non-finite loss at stage {state.stage} epoch {state.epoch} "
            f"iter {state.phase_counter}: {breakdown}, adv_d={adv_d}")

    record = {
        "stage": state.stage, "epoch": state.epoch, "iter": state.phase_counter,
        "phase": "D" if d_phase else "G",
        "l1": breakdown.l1, "adv_g": breakdown.adv, "adv_d": adv_d,
        "style": breakdown.style, "per": breakdown.perceptual, "total": breakdown.total,
        "lr_G": state.lr_g, "lr_D": state.lr_d,
    }
    state.records.append(record)
    return record


def train_stage(state: TrainState, pairs: list[SketchImagePair], epochs: int,
                rng: np.random.Generator | None = None) -> TrainState:
    """Train the currently active stage for `epochs` epochs."""
    for _ in range(epochs):
        train_epoch(state, pairs, rng)
    return state


def train_epoch(state: TrainState, pairs: list[SketchImagePair],
                rng: np.random.Generator | None = None) -> None:
    order = list(range(len(pairs)))
    if rng is not None:
        rng.shuffle(order)
    batches = batch_pyramids([pairs[i] for i in order], state.config.schedule,
                             state.config.batch_size)
    for sketch_levels, photo_levels in batches:
        train_batch(state, sketch_levels, photo_levels)
    state.epoch += 1
    schedule_step(state)


def schedule_step(state: TrainState) -> None:
    """Halve (decay_factor) both learning rates every decay_period_epochs epochs."""
    cfg = state.config
    if state.epoch > 0 and state.epoch % cfg.decay_period_epochs == 0:
        for opt in (state.opt_g, state.opt_d):
            for group in opt.param_groups:
                group["lr"] *= cfg.decay_factor


def maybe_early_stop(state: TrainState, validation_ssim: float) -> bool:
    """True when patience consecutive evaluations brought no strictly higher SSIM."""
    if validation_ssim > state.best_validation_ssim:
        state.best_validation_ssim = validation_ssim
        state.evals_since_improvement = 0
    else:
        state.evals_since_improvement += 1
    return state.evals_since_improvement >= state.config.early_stop_patience


def grow(state: TrainState) -> None:
    """Add the next pyramid level to G and D; all existing layers keep training."""
    state.generator.grow()
    state.critics.grow()
    state.stage += 1
    state.opt_g, state.opt_d = _make_optimizers(state.config, state.generator,
                                                state.critics, state.lr_g, state.lr_d)


@torch.no_grad()
def generate_images(generator: PyramidGenerator, sketch: FeatureMap,
                    active_levels: int | None = None) -> FeatureMap:
    """Finest-level output for a sketch batch, in evaluation mode."""
    was_training = generator.training
    generator.eval()
    try:
        images = generator.forward_full(sketch.data, active_levels)
    finally:
        generator.train(was_training)
    return FeatureMap(images[-1].clamp(-1.0, 1.0), RANGE_SIGNED_UNIT)


@torch.no_grad()
def validation_ssim(state: TrainState, pairs: list[SketchImagePair]) -> float:
    """Mean SSIM of generated vs target at the finest active resolution."""
    res = state.config.schedule[state.stage - 1]
    sketch = FeatureMap(_downsample(torch.cat([p.sketch.data for p in pairs]), res),
                        RANGE_SIGNED_UNIT)
    photo = _downsample(torch.cat([p.photo.data for p in pairs]), res)
    gen = generate_images(state.generator, sketch, active_levels=state.stage)
    total = 0.0
    for i in range(len(pairs)):
        g = FeatureMap(gen.data[i:i + 1], RANGE_SIGNED_UNIT)
        p = FeatureMap(photo[i:i + 1], RANGE_SIGNED_UNIT)
        total += ssim(denormalize_image(g).astype(np.float64),
                      denormalize_image(p).astype(np.float64))
    return total / len(pairs)


def _downsample(t: torch.Tensor, res: int) -> torch.Tensor:
    if t.shape[-1] == res:
        return t
    return torch.nn.functional.avg_pool2d(t, t.shape[-1] // res)


def state_to_checkpoint(state: TrainState) -> Checkpoint:
    tensors: dict[str, torch.Tensor] = {}
    for key, t in state.generator.state_dict().items():
        tensors[f"g/{key}"] = t
    for key, t in state.critics.state_dict().items():
        tensors[f"d/{key}"] = t
    _collect_opt(tensors, "opt_g", state.opt_g)
    _collect_opt(tensors, "opt_d", state.opt_d)
    return Checkpoint(
        config=state.config,
        active_level=state.stage,
        epoch=state.epoch,
        best_validation_ssim=state.best_validation_ssim,
        tensors=tensors,
        scalars={"lr_G": state.lr_g, "lr_D": state.lr_d,
                 "phase_counter": float(state.phase_counter),
                 "evals_since_improvement": float(state.evals_since_improvement)},
    )


def _collect_opt(tensors: dict, prefix: str, opt: torch.optim.Optimizer) -> None:
    params = [p for g in opt.param_groups for p in g["params"]]
    for j, p in enumerate(params):
        entry = opt.state.get(p)
        if not entry:
            continue
        for name in ("step", "exp_avg", "exp_avg_sq"):
            val = entry[name]
            if not torch.is_tensor(val):
                val = torch.tensor(float(val))
            tensors[f"{prefix}/{j}/{name}"] = val.to(torch.float32) if name == "step" else val


def _restore_opt(tensors: dict, prefix: str, opt: torch.optim.Optimizer) -> None:
    params = [p for g in opt.param_groups for p in g["params"]]
    for j, p in enumerate(params):
        key = f"{prefix}/{j}/exp_avg"
        if key not in tensors:
            continue
        opt.state[p] = {
            "step": tensors[f"{prefix}/{j}/step"].to(torch.float32),
            "exp_avg": tensors[key].clone(),
            "exp_avg_sq": tensors[f"{prefix}/{j}/exp_avg_sq"].clone(),
        }


def state_from_checkpoint(ckpt: Checkpoint, extractor: FeatureExtractor) -> TrainState:
    config = ckpt.config
    generator, critics = build_models(config, active_levels=ckpt.active_level)
    generator.load_state_dict({k[2:]: v for k, v in ckpt.tensors.items()
                               if k.startswith("g/")}, strict=True)
    critics.load_state_dict({k[2:]: v for k, v in ckpt.tensors.items()
                             if k.startswith("d/")}, strict=True)
    opt_g, opt_d = _make_optimizers(config, generator, critics,
                                    ckpt.scalars.get("lr_G"), ckpt.scalars.get("lr_D"))
    _restore_opt(ckpt.tensors, "opt_g", opt_g)
    _restore_opt(ckpt.tensors, "opt_d", opt_d)
    state = TrainState(config=config, generator=generator, critics=critics,
                       opt_g=opt_g, opt_d=opt_d, extractor=extractor,
                       stage=ckpt.active_level, epoch=ckpt.epoch,
                       best_validation_ssim=ckpt.best_validation_ssim)
    state.phase_counter = int(ckpt.scalars.get("phase_counter", 0))
    state.evals_since_improvement = int(ckpt.scalars.get("evals_since_improvement", 0))
    return state


def load_generator(path: str) -> tuple[PyramidGenerator, Checkpoint]:
    """Frozen generator for inference from a checkpoint file."""
    ckpt = Checkpoint.load(path)
    generator, _ = build_models(ckpt.config, active_levels=ckpt.active_level)
    generator.load_state_dict({k[2:]: v for k, v in ckpt.tensors.items()
                               if k.startswith("g/")}, strict=True)
    generator.eval()
    for p in generator.parameters():
        p.requires_grad_(False)
    return generator, ckpt


def progressive_train(config: TrainConfig, pairs: list[SketchImagePair],
                      extractor: FeatureExtractor,
                      val_pairs: list[SketchImagePair] | None = None,
                      out_dir: str | None = None,
                      log_path: str | None = None) -> Checkpoint:
    """Full training run per the progressive-growth recipe.

    Stages 1..N-1 train for config.epochs_per_stage epochs each, then grow.
    The finest stage trains until SSIM early stopping or config.max_epochs
    total epochs.  Deterministic for a fixed seed (single-threaded).
    """
    torch.set_num_threads(1)
    state = init_state(config, extractor)
    rng = np.random.default_rng(config.seed)
    val = val_pairs if val_pairs else pairs
    n_stages = len(config.schedule)

    for stage in range(1, n_stages + 1):
        if stage < n_stages:
            train_stage(state, pairs, config.epochs_per_stage, rng)
            if out_dir:
                state_to_checkpoint(state).save(Path(out_dir) / f"stage{stage}.ckpt")
            grow(state)
        else:
            while state.epoch < config.max_epochs:
                train_epoch(state, pairs, rng)
                if maybe_early_stop(state, validation_ssim(state, val)):
                    break
    ckpt = state_to_checkpoint(state)
    if out_dir:
        ckpt.save(Path(out_dir) / "final.ckpt")
    if log_path:
        with open(log_path, "w") as f:
            for rec in state.records:
                f.write(json.dumps(rec) + "\n")
    return ckpt
