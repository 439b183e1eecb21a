"""The student: residual backbone, two identity heads, one shared scorer.

The backbone follows the ResNet-18 stage layout (four stages of two basic
blocks) at a reduced default width for desk-scale runs; the full-width
shape is available through ``base_width=64``.  Its pooled feature feeds
two independent linear heads producing the identity vectors v1 and v2.  A
single bias-free linear scorer (exactly ``latent_dim`` parameters) maps
each vector to a sigmoid identity probability, and the two probabilities
are fused multiplicatively into the bonafide score ``1 - id1*id2``.  The
two vectors are never concatenated anywhere in the forward path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from . import LATENT_DIM
from .checkpoints import read_checkpoint, write_checkpoint
from .tensorops import images_to_batch, image_to_tensor


class BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                nn.BatchNorm2d(c_out),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class ClassifierOutput(NamedTuple):
    v_1: torch.Tensor
    v_2: torch.Tensor
    id_1: torch.Tensor
    id_2: torch.Tensor
    y_hat: torch.Tensor


class MorphClassifier(nn.Module):
    def __init__(
        self,
        side: int = 64,
        channels: int = 3,
        latent_dim: int = LATENT_DIM,
        base_width: int = 16,
        blocks_per_stage: tuple[int, ...] = (2, 2, 2, 2),
    ):
        super().__init__()
        self.side = side
        self.channels = channels
        self.latent_dim = latent_dim
        self.base_width = base_width
        self.blocks_per_stage = tuple(blocks_per_stage)

        # 3x3 stem (no 7x7/maxpool: inputs are small, not 224px)
        self.stem = nn.Sequential(
            nn.Conv2d(channels, base_width, 3, padding=1, bias=False),
            nn.BatchNorm2d(base_width),
            nn.ReLU(inplace=True),
        )
        stages = []
        c_in = base_width
        for stage_idx, n_blocks in enumerate(self.blocks_per_stage):
            c_out = base_width * 2**stage_idx
            for b in range(n_blocks):
                stride = 2 if (stage_idx > 0 and b == 0) else 1
                stages.append(BasicBlock(c_in, c_out, stride=stride))
                c_in = c_out
        self.stages = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.feature_dim = c_in

        self.head_1 = nn.Linear(self.feature_dim, latent_dim)
        self.head_2 = nn.Linear(self.feature_dim, latent_dim)
        # one shared scorer for both vectors: exactly latent_dim parameters
        self.scorer = nn.Linear(latent_dim, 1, bias=False)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1:] != (self.channels, self.side, self.side):
            raise ValueError(
                f"expected batch of ({self.channels},{self.side},{self.side}), got {tuple(x.shape[1:])}"
            )
        h = self.pool(self.stages(self.stem(x)))
        return h.flatten(1)

    def forward(self, x: torch.Tensor) -> ClassifierOutput:
        f = self.features(x)
        v_1 = self.head_1(f)
        v_2 = self.head_2(f)
        id_1 = torch.sigmoid(self.scorer(v_1)).squeeze(-1)
        id_2 = torch.sigmoid(self.scorer(v_2)).squeeze(-1)
        y_hat = 1.0 - id_1 * id_2
        return ClassifierOutput(v_1, v_2, id_1, id_2, y_hat)

    def scorer_weights(self) -> torch.Tensor:
        return self.scorer.weight.detach().squeeze(0)

    def arch_config(self) -> dict:
        return {
            "side": self.side,
            "channels": self.channels,
            "latent_dim": self.latent_dim,
            "base_width": self.base_width,
            "blocks_per_stage": list(self.blocks_per_stage),
        }


def identity_score(w, v) -> float:
    """Sigmoid of the scorer/vector dot product: the probability that the
    vector carries one identity's information."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if w.shape != v.shape:
        raise ValueError(f"dim mismatch: {w.shape[0]} vs {v.shape[0]}")
    logit = float(w @ v)
    if logit >= 0:
        return float(1.0 / (1.0 + np.exp(-logit)))
    e = np.exp(logit)
    return float(e / (1.0 + e))


def fuse(id_1: float, id_2: float) -> float:
    """Bonafide score ``1 - id_1 * id_2``; symmetric, in [0, 1]."""
    for name, val in (("id_1", id_1), ("id_2", id_2)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {val}")
    return 1.0 - id_1 * id_2


@dataclass(frozen=True)
class ScoreTriple:
    """Interpretability surface: the two identity scores and their fusion."""

    id_1: float
    id_2: float
    bonafide_score: float

    @classmethod
    def from_ids(cls, id_1: float, id_2: float) -> "ScoreTriple":
        return cls(id_1=id_1, id_2=id_2, bonafide_score=fuse(id_1, id_2))


@torch.no_grad()
def extract_vectors(model: MorphClassifier, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    model.eval()
    f = model.features(image_to_tensor(image).unsqueeze(0))
    return (
        model.head_1(f).squeeze(0).numpy(),
        model.head_2(f).squeeze(0).numpy(),
    )


def predict(model: MorphClassifier, image: np.ndarray) -> ScoreTriple:
    v_1, v_2 = extract_vectors(model, image)
    w = model.scorer_weights().numpy()
    return ScoreTriple.from_ids(identity_score(w, v_1), identity_score(w, v_2))


@torch.no_grad()
def predict_batch(model: MorphClassifier, images: list[np.ndarray]) -> list[ScoreTriple]:
    """Batched predict; results are independent of batch composition."""
    model.eval()
    out = model(images_to_batch(images))
    return [
        ScoreTriple.from_ids(float(i1), float(i2))
        for i1, i2 in zip(out.id_1.tolist(), out.id_2.tolist())
    ]


def save_classifier(
    model: MorphClassifier,
    path: str | Path,
    epochs_trained: int = 0,
    best_epoch: int | None = None,
    best_val_eer: float | None = None,
    config_hash: str = "",
) -> Path:
    sidecar = {
        "kind": "classifier",
        "latent_dim": model.latent_dim,
        "input_side": model.side,
        "channels": model.channels,
        "base_width": model.base_width,
        "blocks_per_stage": list(model.blocks_per_stage),
        "scorer_shape": [model.latent_dim],
        "epochs_trained": epochs_trained,
        "best_epoch": best_epoch,
        "best_val_eer": best_val_eer,
        "config_hash": config_hash,
    }
    return write_checkpoint(path, model.state_dict(), sidecar)


def load_classifier(path: str | Path) -> tuple[MorphClassifier, dict]:
    state, meta = read_checkpoint(path)
    model = MorphClassifier(
        side=meta["input_side"],
        channels=meta["channels"],
        latent_dim=meta["latent_dim"],
        base_width=meta["base_width"],
        blocks_per_stage=tuple(meta["blocks_per_stage"]),
    )
    model.load_state_dict(state)
    model.eval()
    return model, meta
