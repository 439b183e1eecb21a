import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose oracles.py

from idistill.core import load_manifest
from idistill.service import handlers
from idistill.service import schemas as S
from idistill.synthgen import GenConfig, generate_dataset

# 12 identities split 8/2/2 so every split carries attacks as well
TINY = GenConfig(n_identities=12, images_per_identity=2, n_morphs=10, seed=5, side=32)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small 32px dataset shared by the fast tests."""
    out = tmp_path_factory.mktemp("tiny")
    manifest = generate_dataset(TINY, out)
    return manifest


@pytest.fixture(scope="session")
def tiny_records(tiny_dataset):
    return load_manifest(tiny_dataset)


@pytest.fixture(scope="session")
def tiny_checkpoints(tiny_dataset, tmp_path_factory):
    """Both stages trained briefly on the tiny dataset, via the handlers."""
    out = tmp_path_factory.mktemp("ckpt")
    ae = handlers.train_ae(
        S.TrainAutoencoderRequest(
            data=str(tiny_dataset),
            out=str(out / "ae.ckpt"),
            epochs=3,
            side=32,
            widths=[8, 16, 32, 64],
            seed=2,
        )
    )
    clf = handlers.train_clf(
        S.TrainClassifierRequest(
            data=str(tiny_dataset),
            teacher=ae.checkpoint_path,
            out=str(out / "clf.ckpt"),
            epochs=3,
            batch_size=8,
            base_width=8,
            seed=2,
        )
    )
    return {
        "manifest": tiny_dataset,
        "ae": Path(ae.checkpoint_path),
        "clf": Path(clf.checkpoint_path),
        "clf_log": Path(clf.log_path),
    }
