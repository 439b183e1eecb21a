import numpy as np
import pytest
import torch

from idistill.autoencoder import (
    ConvAutoencoder,
    decode_latent,
    encode_image,
    load_autoencoder,
    reconstruction_loss,
    save_autoencoder,
)
from idistill.tensorops import param_hash, seed_everything
from oracles import finite_difference_grad, relative_grad_error


@pytest.fixture(scope="module")
def small_model():
    seed_everything(0)
    return ConvAutoencoder(side=32, channels=3, widths=(8, 16, 32, 64))


class TestEncodeDecode:
    def test_latent_dim(self, small_model):
        img = np.random.default_rng(0).random((32, 32, 3)).astype(np.float32)
        assert encode_image(small_model, img).shape == (128,)

    def test_encode_deterministic(self, small_model):
        img = np.random.default_rng(1).random((32, 32, 3)).astype(np.float32)
        a = encode_image(small_model, img)
        b = encode_image(small_model, img)
        assert a.tobytes() == b.tobytes()

    def test_distinct_images_distinct_codes(self, small_model):
        rng = np.random.default_rng(2)
        codes = [
            encode_image(small_model, rng.random((32, 32, 3)).astype(np.float32))
            for _ in range(50)
        ]
        seen = {c.tobytes() for c in codes}
        assert len(seen) == 50

    def test_decode_shape_and_range(self, small_model):
        out = decode_latent(small_model, np.zeros(128, dtype=np.float32))
        assert out.shape == (32, 32, 3)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_decode_wrong_dim(self, small_model):
        with pytest.raises(ValueError):
            small_model.decode(torch.zeros(1, 64))

    def test_encode_wrong_shape(self, small_model):
        with pytest.raises(ValueError):
            small_model.encode(torch.zeros(1, 3, 16, 16))

    def test_side_must_match_depth(self):
        with pytest.raises(ValueError):
            ConvAutoencoder(side=24, widths=(8, 16, 32, 64))


class TestReconstructionLoss:
    def test_identical_is_zero(self):
        x = torch.rand(2, 2, 1, dtype=torch.float64)
        assert float(reconstruction_loss(x, x)) == 0.0

    def test_mean_reduction_value(self):
        a = torch.zeros(2, 2, 1, dtype=torch.float64)
        b = torch.ones(2, 2, 1, dtype=torch.float64)
        assert float(reconstruction_loss(a, b)) == 1.0

    def test_sum_reduction_value(self):
        a = torch.zeros(2, 2, 1, dtype=torch.float64)
        b = torch.ones(2, 2, 1, dtype=torch.float64)
        assert float(reconstruction_loss(a, b, reduction="sum")) == 4.0

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        a = torch.tensor(rng.random((4, 4, 3)))
        b = torch.tensor(rng.random((4, 4, 3)))
        assert float(reconstruction_loss(a, b)) == float(reconstruction_loss(b, a))

    def test_positive_unless_identical(self):
        a = torch.zeros(4, 4, 1, dtype=torch.float64)
        b = a.clone()
        b[0, 0, 0] = 1e-8
        assert float(reconstruction_loss(a, b)) > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            reconstruction_loss(torch.zeros(2, 2, 1), torch.zeros(4, 4, 1))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            original = torch.tensor(rng.random((4, 4, 1)))
            recon = torch.tensor(rng.random((4, 4, 1)), requires_grad=True)
            loss = reconstruction_loss(original, recon)
            (ga,) = torch.autograd.grad(loss, [recon])
            with torch.no_grad():
                gf = finite_difference_grad(
                    lambda: reconstruction_loss(original, recon), recon.data
                )
            assert relative_grad_error(ga, gf) < 1e-4


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        seed_everything(5)
        model = ConvAutoencoder(side=32, widths=(8, 16, 32, 64))
        path = save_autoencoder(model, tmp_path / "ae.ckpt", epochs_trained=7, final_loss=0.01)
        again, meta = load_autoencoder(path)
        assert param_hash(model) == param_hash(again)
        assert meta["latent_dim"] == 128
        assert meta["input_side"] == 32
        assert meta["channels"] == 3
        assert meta["epochs_trained"] == 7
        assert meta["final_loss"] == 0.01
        assert "config_hash" in meta

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_autoencoder(tmp_path / "none.ckpt")
