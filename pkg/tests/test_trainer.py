import numpy as np
import pytest
import torch

from idistill.autoencoder import ConvAutoencoder, reconstruction_loss
from idistill.core import Label, Split
from idistill.tensorops import images_to_batch, param_hash, seed_everything
from idistill.core import load_image
from idistill.trainer import (
    TrainConfig,
    TrainLog,
    teacher_codes,
    train_autoencoder,
    train_classifier,
)

WIDTHS = (8, 16, 32, 64)


def _ae_cfg(**kw):
    base = dict(seed=3, side=32, ae_widths=WIDTHS, epochs=5)
    base.update(kw)
    return TrainConfig.ae_defaults(**base)


def _clf_cfg(**kw):
    base = dict(seed=3, side=32, clf_base_width=8, epochs=4, batch_size=8)
    base.update(kw)
    return TrainConfig.clf_defaults(**base)


@pytest.fixture(scope="module")
def splits(tiny_records):
    return {
        "train_bona": [
            r for r in tiny_records if r.split is Split.TRAIN and r.label is Label.BONAFIDE
        ],
        "train": [r for r in tiny_records if r.split is Split.TRAIN],
        "val": [r for r in tiny_records if r.split is Split.VAL],
    }


@pytest.fixture(scope="module")
def teacher(splits):
    model, _ = train_autoencoder(_ae_cfg(epochs=3), splits["train_bona"])
    return model


class TestTrainAutoencoder:
    def test_rejects_attack_records(self, splits):
        with pytest.raises(ValueError, match="attack"):
            train_autoencoder(_ae_cfg(), splits["train"])

    def test_zero_epochs_is_initialization(self, splits):
        model, log = train_autoencoder(_ae_cfg(epochs=0), splits["train_bona"])
        assert log.records == []
        seed_everything(3)
        fresh = ConvAutoencoder(side=32, channels=3, widths=WIDTHS)
        assert param_hash(model) == param_hash(fresh)

    def test_loss_decreases(self, splits):
        _, log = train_autoencoder(_ae_cfg(epochs=8), splits["train_bona"])
        assert log.records[-1].train_loss < log.records[0].train_loss

    def test_heldout_beats_untrained_baseline(self, splits, tiny_records):
        held_out = [r for r in tiny_records if r.split is Split.VAL and r.label is Label.BONAFIDE]
        x = images_to_batch([load_image(r.image_path, 32, 3) for r in held_out])
        cfg = _ae_cfg(epochs=25)
        seed_everything(cfg.seed)
        untrained = ConvAutoencoder(side=32, channels=3, widths=WIDTHS)
        untrained.eval()
        with torch.no_grad():
            base = float(reconstruction_loss(x, untrained(x)))
        trained, _ = train_autoencoder(cfg, splits["train_bona"], val_records=held_out)
        with torch.no_grad():
            after = float(reconstruction_loss(x, trained(x)))
        assert after < base

    def test_deterministic_repeat(self, splits):
        _, log_a = train_autoencoder(_ae_cfg(), splits["train_bona"])
        _, log_b = train_autoencoder(_ae_cfg(), splits["train_bona"])
        assert [r.train_loss for r in log_a.records] == [r.train_loss for r in log_b.records]

    def test_log_round_trip(self, splits, tmp_path):
        _, log = train_autoencoder(_ae_cfg(epochs=2), splits["train_bona"])
        path = log.save(tmp_path / "log.json")
        again = TrainLog.load(path)
        assert again.config == log.config
        assert again.records == log.records


class TestTeacherCodes:
    def test_fragment_contract(self, teacher, splits):
        frags = teacher_codes(teacher, splits["train"])
        for rec, frag in zip(splits["train"], frags):
            if rec.label is Label.BONAFIDE:
                assert frag.u is not None and frag.u_1 is None and frag.u_2 is None
                assert frag.u.shape == (128,)
            else:
                assert frag.u is None and frag.u_1 is not None and frag.u_2 is not None

    def test_missing_source_names_record(self, teacher, splits, tmp_path):
        attack = next(r for r in splits["train"] if r.label is Label.ATTACK)
        broken = attack.__class__(
            image_path=attack.image_path,
            label=attack.label,
            split=attack.split,
            source_a=tmp_path / "gone.png",
            source_b=attack.source_b,
        )
        with pytest.raises(FileNotFoundError, match="gone.png"):
            teacher_codes(teacher, [broken])

    def test_cache_consistency(self, teacher, splits):
        cache = {}
        a = teacher_codes(teacher, splits["train"], cache=cache)
        b = teacher_codes(teacher, splits["train"], cache=cache)
        for fa, fb in zip(a, b):
            for attr in ("u", "u_1", "u_2"):
                ta, tb = getattr(fa, attr), getattr(fb, attr)
                assert (ta is None) == (tb is None)
                if ta is not None:
                    assert torch.equal(ta, tb)


class TestTrainClassifier:
    def test_rejects_single_class(self, splits, teacher):
        bona_only = [r for r in splits["train"] if r.label is Label.BONAFIDE]
        with pytest.raises(ValueError, match="both classes"):
            train_classifier(_clf_cfg(), bona_only, splits["val"], teacher)

    def test_teacher_frozen_through_training(self, splits, teacher):
        before = param_hash(teacher)
        train_classifier(_clf_cfg(epochs=2), splits["train"], splits["val"], teacher)
        assert param_hash(teacher) == before

    def test_loss_composition(self, splits, teacher):
        _, log = train_classifier(_clf_cfg(epochs=3), splits["train"], splits["val"], teacher)
        for rec in log.records:
            assert abs(rec.train_loss - (rec.bce + rec.kd)) < 1e-6
            assert rec.val_metric is not None and 0.0 <= rec.val_metric <= 1.0

    def test_deterministic_repeat(self, splits, teacher):
        _, log_a = train_classifier(_clf_cfg(epochs=2), splits["train"], splits["val"], teacher)
        _, log_b = train_classifier(_clf_cfg(epochs=2), splits["train"], splits["val"], teacher)
        assert [r.train_loss for r in log_a.records] == [r.train_loss for r in log_b.records]

    def test_deterministic_mode_byte_identical_log(self, splits, teacher):
        cfg = _clf_cfg(epochs=2, deterministic=True)
        _, log_a = train_classifier(cfg, splits["train"], splits["val"], teacher)
        _, log_b = train_classifier(cfg, splits["train"], splits["val"], teacher)
        assert log_a.to_json() == log_b.to_json()
        assert all(r.wall_seconds == 0.0 for r in log_a.records)

    def test_cached_codes_match_on_the_fly(self, splits, teacher):
        # encode batch grouping differs between the two paths, so agreement
        # is up to float32 noise, not bitwise
        _, log_a = train_classifier(_clf_cfg(epochs=2), splits["train"], splits["val"], teacher)
        _, log_b = train_classifier(
            _clf_cfg(epochs=2, cache_teacher_codes=True), splits["train"], splits["val"], teacher
        )
        a = [r.train_loss for r in log_a.records]
        b = [r.train_loss for r in log_b.records]
        assert a == pytest.approx(b, rel=1e-4)

    def test_best_epoch_bookkeeping(self, splits, teacher):
        model, log = train_classifier(
            _clf_cfg(epochs=10, patience=2), splits["train"], splits["val"], teacher
        )
        val = [r.val_metric for r in log.records]
        # first-occurrence minimum is the tagged best epoch
        assert log.summary["best_epoch"] == int(np.argmin(val)) + 1
        assert log.summary["best_val_eer"] == min(val)
        if log.summary["stopped_early"]:
            assert log.summary["epochs_trained"] == log.summary["best_epoch"] + 2

    def test_returned_model_is_best_checkpoint(self, splits, teacher):
        from idistill.metrics import ScoreSet, compute_eer
        from idistill.classifier import predict_batch

        model, log = train_classifier(
            _clf_cfg(epochs=6, patience=6), splits["train"], splits["val"], teacher
        )
        imgs = [load_image(r.image_path, 32, 3) for r in splits["val"]]
        scores = predict_batch(model, imgs)
        bona = [t.bonafide_score for t, r in zip(scores, splits["val"]) if r.label is Label.BONAFIDE]
        att = [t.bonafide_score for t, r in zip(scores, splits["val"]) if r.label is Label.ATTACK]
        eer, _ = compute_eer(ScoreSet(bonafide=bona, attack=att))
        assert eer == pytest.approx(log.summary["best_val_eer"], abs=1e-9)

    def test_flip_augment_changes_trajectory(self, splits, teacher):
        _, log_a = train_classifier(_clf_cfg(epochs=2), splits["train"], splits["val"], teacher)
        _, log_b = train_classifier(
            _clf_cfg(epochs=2, flip_augment=True), splits["train"], splits["val"], teacher
        )
        assert [r.train_loss for r in log_a.records] != [r.train_loss for r in log_b.records]
