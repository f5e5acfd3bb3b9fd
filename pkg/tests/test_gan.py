import math
import struct

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from landmark_anon.adapters import GeometricAdapter
from landmark_anon.errors import CheckpointVersionError, InvalidArgumentError, NumericError
from landmark_anon.gan import (
    GanCheckpoint,
    GanConfig,
    PatchDiscriminator,
    Synthesizer,
    TrainLog,
    UNetGenerator,
    anonymize,
    build_models,
    discriminator_forward,
    gan_losses,
    generator_forward,
    patch_map_size,
    train,
)
from landmark_anon.imageops import FaceImage
from landmark_anon.raster import LandmarkImage, landmark_image
from landmark_anon.synthetic import random_landmark_set, synthetic_pairs


def conv_out(size, kernel, stride, pad):
    return (size + 2 * pad - kernel) // stride + 1


class NoLandmarks:
    def landmarks(self, face):
        return None


class FixedLandmarks:
    def __init__(self, lms):
        self.lms = lms

    def landmarks(self, face):
        return self.lms


class TestConfig:
    @pytest.mark.parametrize("size", [0, 16, 48, 100])
    def test_rejects_bad_sizes(self, size):
        with pytest.raises(InvalidArgumentError):
            GanConfig(image_size=size)

    def test_defaults(self):
        cfg = GanConfig()
        assert (cfg.image_size, cfg.base_channels, cfg.lambda_l1) == (512, 64, 100.0)
        assert (cfg.epochs, cfg.batch_size, cfg.lr, cfg.beta1, cfg.beta2) == (25, 32, 2e-4, 0.5, 0.999)
        assert cfg.depth == 9

    def test_dict_round_trip(self):
        cfg = GanConfig(image_size=64, seed=3)
        assert GanConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(InvalidArgumentError):
            GanConfig.from_dict({"bogus": 1})

    @pytest.mark.parametrize("size", [32, 64, 128, 256, 512])
    def test_patch_map_size(self, size):
        s = size
        for _ in range(3):
            s = conv_out(s, 4, 2, 1)
        for _ in range(2):
            s = conv_out(s, 4, 1, 1)
        assert patch_map_size(size) == s
        disc = PatchDiscriminator(base_channels=2)
        x = torch.zeros(1, 3, size, size)
        assert tuple(disc(x, x).shape) == (1, 1, s, s)

    def test_desk_map_is_6x6(self):
        assert patch_map_size(64) == 6


class TestModels:
    @pytest.mark.parametrize("size", [32, 64])
    def test_generator_depth_and_shape(self, size):
        gen = UNetGenerator(size, base_channels=4)
        assert len(gen.downs) == int(math.log2(size))
        out = gen(torch.zeros(2, 3, size, size))
        assert out.shape == (2, 3, size, size)

    def test_init_is_seeded_gaussian(self):
        g1, d1 = build_models(GanConfig(image_size=32, base_channels=8, seed=1))
        g2, _ = build_models(GanConfig(image_size=32, base_channels=8, seed=1))
        g3, _ = build_models(GanConfig(image_size=32, base_channels=8, seed=2))
        w1 = torch.cat([p.detach().flatten() for n, p in g1.named_parameters() if "weight" in n])
        w2 = torch.cat([p.detach().flatten() for n, p in g2.named_parameters() if "weight" in n])
        w3 = torch.cat([p.detach().flatten() for n, p in g3.named_parameters() if "weight" in n])
        assert torch.equal(w1, w2) and not torch.equal(w1, w3)
        assert abs(float(w1.mean())) < 2e-3
        assert float(w1.std()) == pytest.approx(0.02, rel=0.05)


class TestForward:
    def test_generator_contract(self, small_checkpoint, rng):
        raster = landmark_image(random_landmark_set(rng))
        out = generator_forward(raster, small_checkpoint)
        assert out.pixels.shape == (32, 32, 3) and out.range_tag == "signed"
        assert out.pixels.min() >= -1 and out.pixels.max() <= 1
        again = generator_forward(raster, small_checkpoint)
        assert np.array_equal(out.pixels, again.pixels)

    def test_accepts_native_size(self, small_checkpoint):
        out = generator_forward(LandmarkImage.blank(32, 32), small_checkpoint)
        ref = generator_forward(LandmarkImage.blank(), small_checkpoint)
        assert np.array_equal(out.pixels, ref.pixels)

    def test_shape_mismatch(self, small_checkpoint):
        with pytest.raises(InvalidArgumentError):
            generator_forward(LandmarkImage.blank(48, 48), small_checkpoint)
        with pytest.raises(InvalidArgumentError):
            generator_forward(LandmarkImage.blank(64, 32), small_checkpoint)

    def test_discriminator_map(self, small_checkpoint, rng):
        raster = landmark_image(random_landmark_set(rng))
        face = FaceImage(rng.uniform(0, 1, (64, 64, 3)))
        score = discriminator_forward(raster, face, small_checkpoint)
        assert score.shape == (patch_map_size(32),) * 2
        assert np.array_equal(score, discriminator_forward(raster, face, small_checkpoint))
        with pytest.raises(InvalidArgumentError):
            discriminator_forward(raster, FaceImage(np.zeros((30, 30, 3))), small_checkpoint)

    def test_discriminator_batch_permutation(self):
        _, disc = build_models(GanConfig(image_size=32, base_channels=4))
        disc.eval()
        x = torch.randn(4, 3, 32, 32, generator=torch.Generator().manual_seed(0))
        y = torch.randn(4, 3, 32, 32, generator=torch.Generator().manual_seed(1))
        perm = torch.tensor([2, 0, 3, 1])
        with torch.no_grad():
            assert torch.allclose(disc(x, y)[perm], disc(x[perm], y[perm]), atol=1e-6)


class TestLosses:
    def tensors(self, seed=0):
        g = torch.Generator().manual_seed(seed)
        return (
            torch.randn(2, 1, 6, 6, generator=g),
            torch.randn(2, 1, 6, 6, generator=g),
            torch.rand(2, 3, 8, 8, generator=g) * 2 - 1,
            torch.rand(2, 3, 8, 8, generator=g) * 2 - 1,
        )

    def test_l1_zero_on_target(self):
        d_real, d_fake, out, _ = self.tensors()
        _, _, comp = gan_losses(d_real, d_fake, out, out.clone(), 100.0)
        assert comp["generator_l1_loss"] == 0.0

    def test_lambda_zero(self):
        d_real, d_fake, out, tgt = self.tensors()
        g, _, comp = gan_losses(d_real, d_fake, out, tgt, 0.0)
        assert g.item() == comp["generator_adv_loss"]

    def test_zero_logits_give_ln2(self):
        z = torch.zeros(3, 1, 6, 6)
        out = torch.zeros(3, 3, 8, 8)
        g, d, comp = gan_losses(z, z, out, out, 100.0)
        assert comp["generator_adv_loss"] == pytest.approx(math.log(2), abs=1e-6)
        assert d.item() == pytest.approx(math.log(2), abs=1e-6)

    def test_closed_form(self):
        d_real, d_fake, out, tgt = self.tensors(3)
        g, d, _ = gan_losses(d_real, d_fake, out, tgt, 100.0)

        def softplus(v):
            return np.log1p(np.exp(-np.abs(v))) + np.maximum(v, 0)

        dr, df = d_real.numpy().astype(np.float64), d_fake.numpy().astype(np.float64)
        adv = softplus(-df).mean()
        l1 = np.abs(out.numpy().astype(np.float64) - tgt.numpy()).mean()
        assert g.item() == pytest.approx(adv + 100 * l1, rel=1e-5)
        assert d.item() == pytest.approx(0.5 * (softplus(-dr).mean() + softplus(df).mean()), rel=1e-5)

    def test_non_finite(self):
        d_real, d_fake, out, tgt = self.tensors()
        d_fake[0, 0, 0, 0] = float("nan")
        with pytest.raises(NumericError):
            gan_losses(d_real, d_fake, out, tgt, 100.0)

    def test_shape_mismatch(self):
        d_real, d_fake, out, tgt = self.tensors()
        with pytest.raises(InvalidArgumentError):
            gan_losses(d_real, d_fake, out, tgt[:, :2], 100.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, 200))
    def test_components_non_negative(self, seed, lam):
        g, d, comp = gan_losses(*self.tensors(seed), lam)
        assert all(v >= 0 for v in comp.values()) and g.item() >= 0 and d.item() >= 0


class TestCheckpoint:
    def test_round_trip(self, small_checkpoint, tmp_path):
        path = tmp_path / "c.lmck"
        small_checkpoint.save(path)
        back = GanCheckpoint.load(path)
        assert back.config == small_checkpoint.config
        assert back.to_bytes() == path.read_bytes()
        for name, arr in small_checkpoint.generator_params.items():
            assert np.array_equal(back.generator_params[name], arr)

    def test_bad_magic(self, small_checkpoint):
        data = bytearray(small_checkpoint.to_bytes())
        data[0:8] = b"NOTACKPT"
        with pytest.raises(CheckpointVersionError):
            GanCheckpoint.from_bytes(bytes(data))

    def test_future_version(self, small_checkpoint):
        data = bytearray(small_checkpoint.to_bytes())
        struct.pack_into("<I", data, 8, 99)
        with pytest.raises(CheckpointVersionError):
            GanCheckpoint.from_bytes(bytes(data))


class TestAnonymize:
    def test_average_face_fallback(self, small_checkpoint):
        face = FaceImage(np.random.default_rng(0).uniform(0, 1, (40, 40, 3)))
        a = anonymize(face, NoLandmarks(), small_checkpoint)
        b = anonymize(face, NoLandmarks(), small_checkpoint)
        avg = Synthesizer(small_checkpoint).average_face().pixels
        assert np.array_equal(a.pixels, b.pixels)
        assert np.array_equal(a.pixels, np.clip(avg * 0.5 + 0.5, 0, 1))
        assert a.range_tag == "unit" and a.pixels.min() >= 0 and a.pixels.max() <= 1

    def test_depends_only_on_raster(self, small_checkpoint, rng):
        lms = random_landmark_set(rng)
        synth = Synthesizer(small_checkpoint)
        a = anonymize(FaceImage(rng.uniform(0, 1, (50, 50, 3))), FixedLandmarks(lms), synth)
        b = anonymize(FaceImage(rng.uniform(0, 1, (80, 60, 3))), FixedLandmarks(lms), synth)
        assert np.array_equal(a.pixels, b.pixels)

    def test_geometric_landmarker(self, small_checkpoint):
        face = FaceImage(np.random.default_rng(1).uniform(0.2, 1, (64, 64, 3)))
        out = anonymize(face, GeometricAdapter(), small_checkpoint)
        assert out.pixels.shape == (32, 32, 3)


class TestTrain:
    CFG = dict(image_size=32, base_channels=4, epochs=2, batch_size=4)

    def test_reproducible(self, tmp_path):
        pairs = synthetic_pairs(6, 32, seed=0)
        cfg = GanConfig(**self.CFG, seed=11)
        c1, log1 = train(pairs, cfg, checkpoint_dir=tmp_path / "a")
        c2, log2 = train(pairs, cfg)
        assert log1 == log2
        assert c1.sha256() == c2.sha256()
        assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["epoch_001.lmck", "epoch_002.lmck"]
        assert GanCheckpoint.load(tmp_path / "a" / "epoch_002.lmck").sha256() == c1.sha256()

    def test_seed_changes_result(self):
        pairs = synthetic_pairs(4, 32, seed=0)
        a, _ = train(pairs, GanConfig(**self.CFG, seed=1))
        b, _ = train(pairs, GanConfig(**self.CFG, seed=2))
        assert a.sha256() != b.sha256()

    def test_does_not_touch_global_rng(self):
        torch.manual_seed(123)
        expected = torch.rand(3)
        torch.manual_seed(123)
        train(synthetic_pairs(2, 32), GanConfig(**self.CFG))
        assert torch.equal(torch.rand(3), expected)

    def test_large_batch_single_step(self):
        _, log = train(synthetic_pairs(3, 32), GanConfig(image_size=32, base_channels=4, epochs=2, batch_size=32))
        assert [(r.epoch, r.step) for r in log] == [(0, 0), (1, 1)]
        assert all(math.isfinite(r.generator_l1_loss) for r in log)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            train([], GanConfig(**self.CFG))

    def test_log_csv_round_trip(self, tmp_path):
        _, log = train(synthetic_pairs(2, 32), GanConfig(**self.CFG))
        log.write_csv(tmp_path / "log.csv")
        assert TrainLog.read_csv(tmp_path / "log.csv") == log
