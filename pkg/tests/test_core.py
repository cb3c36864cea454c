import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from haifit.core import (Checkpoint, FeatureMap, RANGE_SIGNED_UNIT, ResolutionSchedule,
                         TrainConfig, denormalize_image, downsample_pyramid, make_schedule,
                         normalize_image)
from haifit.errors import ChannelCountError, ConfigError, ScheduleError, ShapeError


class TestFeatureMap:
    def test_rejects_nan(self):
        t = torch.zeros(1, 3, 4, 4)
        t[0, 0, 0, 0] = float("nan")
        with pytest.raises(ShapeError):
            FeatureMap(t)

    def test_rejects_inf(self):
        t = torch.zeros(1, 3, 4, 4)
        t[0, 0, 0, 0] = float("inf")
        with pytest.raises(ShapeError):
            FeatureMap(t)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ShapeError):
            FeatureMap(torch.zeros(3, 4, 4))

    def test_range_enforced(self):
        with pytest.raises(ShapeError):
            FeatureMap(torch.full((1, 3, 2, 2), 1.5), RANGE_SIGNED_UNIT)
        FeatureMap(torch.full((1, 3, 2, 2), 1.0 + 5e-7), RANGE_SIGNED_UNIT)  # within tol

    def test_unbounded_allows_any_finite(self):
        FeatureMap(torch.full((2, 256, 8, 8), 1e6))


class TestNormalize:
    def test_endpoints(self):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        img[0, 0] = 255
        fm = normalize_image(img)
        assert fm.data[0, :, 0, 0].max().item() == pytest.approx(1.0)
        assert fm.data[0, :, 1, 1].min().item() == pytest.approx(-1.0)

    def test_midpoint_value(self):
        # 127/127.5 - 1 computed by hand
        img = np.full((2, 2, 3), 127, dtype=np.uint8)
        fm = normalize_image(img)
        assert fm.data[0, 0, 0, 0].item() == pytest.approx(127 / 127.5 - 1, abs=1e-7)
        assert fm.data[0, 0, 0, 0].item() == pytest.approx(-0.00392156, abs=1e-6)

    def test_channel_count_error(self):
        with pytest.raises(ChannelCountError):
            normalize_image(np.zeros((4, 4, 1), dtype=np.uint8))

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip(self, seed):
        img = np.random.default_rng(seed).integers(0, 256, (8, 8, 3), dtype=np.uint8)
        back = denormalize_image(normalize_image(img))
        assert np.abs(back.astype(int) - img.astype(int)).max() <= 1


class TestSchedule:
    def test_repeated_doubling(self):
        assert make_schedule(32, 256).levels == (32, 64, 128, 256)

    def test_single_level(self):
        assert make_schedule(64, 64).levels == (64,)

    def test_coarse_to_fine_doubling(self):
        assert make_schedule(64, 256).levels == (64, 128, 256)

    def test_non_power_of_two_ratio(self):
        with pytest.raises(ScheduleError):
            make_schedule(32, 96)

    def test_non_doubling_rejected(self):
        with pytest.raises(ScheduleError):
            ResolutionSchedule((32, 96))

    def test_growth_closure(self):
        s = make_schedule(32, 128)
        assert s.grown().levels == (32, 64, 128, 256)


class TestDownsamplePyramid:
    def test_constant_preserved(self):
        fm = FeatureMap(torch.full((1, 3, 256, 256), 0.25), RANGE_SIGNED_UNIT)
        for level in downsample_pyramid(fm, make_schedule(64, 256)):
            assert torch.allclose(level.data, torch.full_like(level.data, 0.25))

    def test_level_sizes(self):
        fm = FeatureMap(torch.zeros(2, 3, 256, 256), RANGE_SIGNED_UNIT)
        levels = downsample_pyramid(fm, make_schedule(64, 256))
        assert [l.resolution for l in levels] == [64, 128, 256]
        assert levels[-1] is fm

    def test_checkerboard_mean(self):
        board = torch.tensor([[-1.0, 1.0], [1.0, -1.0]]).reshape(1, 1, 2, 2).repeat(1, 3, 1, 1)
        fm = FeatureMap(board, RANGE_SIGNED_UNIT)
        levels = downsample_pyramid(fm, make_schedule(1, 2))
        assert torch.allclose(levels[0].data, torch.zeros(1, 3, 1, 1))

    def test_resolution_mismatch(self):
        fm = FeatureMap(torch.zeros(1, 3, 128, 128), RANGE_SIGNED_UNIT)
        with pytest.raises(ShapeError):
            downsample_pyramid(fm, make_schedule(64, 256))


class TestTrainConfig:
    def test_defaults_match_training_weights(self):
        cfg = TrainConfig()
        assert (cfg.lambda_l1, cfg.lambda_adv, cfg.lambda_per, cfg.lambda_style) == \
            (1.5, 10.0, 0.1, 250.0)
        assert cfg.batch_size == 8

    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(lambda_l1=0)
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainConfig(early_stop_patience=0)

    def test_dict_round_trip(self):
        cfg = TrainConfig(schedule=make_schedule(32, 64), seed=9)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestCheckpoint:
    def _make(self):
        torch.manual_seed(0)
        return Checkpoint(
            config=TrainConfig(schedule=make_schedule(32, 64)),
            active_level=2, epoch=7, best_validation_ssim=0.5,
            tensors={"g/w": torch.randn(3, 3), "d/b": torch.randn(5),
                     "opt_g/0/step": torch.tensor(4.0)},
            scalars={"lr_G": 1e-4},
        )

    def test_round_trip_bit_identical(self, tmp_path):
        ckpt = self._make()
        p1 = tmp_path / "a.ckpt"
        ckpt.save(p1)
        loaded = Checkpoint.load(p1)
        for k, t in ckpt.tensors.items():
            assert torch.equal(loaded.tensors[k], t)
        assert loaded.config == ckpt.config
        p2 = tmp_path / "b.ckpt"
        loaded.save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "x.ckpt"
        p.write_bytes(b"not a checkpoint")
        from haifit.errors import CheckpointError
        with pytest.raises(CheckpointError):
            Checkpoint.load(p)
