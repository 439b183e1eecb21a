"""The teacher: a convolutional autoencoder with a 128-d bottleneck.

The encoder is four stride-2 double-conv blocks followed by a linear map
to the latent code; the decoder mirrors it with transposed convolutions
and a sigmoid output.  There are no skip connections across the
bottleneck: all information used for reconstruction must pass through the
code, which is what makes the code usable as an identity prior.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import LATENT_DIM
from .checkpoints import read_checkpoint, write_checkpoint
from .tensorops import image_to_tensor, tensor_to_image


def _down_block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, stride=2, padding=1),
        nn.ReLU(inplace=True),
    )


def _up_block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.ConvTranspose2d(c_in, c_out, 3, stride=2, padding=1, output_padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class ConvAutoencoder(nn.Module):
    def __init__(
        self,
        side: int = 64,
        channels: int = 3,
        latent_dim: int = LATENT_DIM,
        widths: tuple[int, ...] = (16, 32, 64, 128),
    ):
        super().__init__()
        if side % 2 ** len(widths) != 0:
            raise ValueError(f"side={side} not divisible by 2^{len(widths)}")
        self.side = side
        self.channels = channels
        self.latent_dim = latent_dim
        self.widths = tuple(widths)
        self.bottom = side // 2 ** len(widths)

        enc = []
        c_prev = channels
        for w in widths:
            enc.append(_down_block(c_prev, w))
            c_prev = w
        self.encoder_conv = nn.Sequential(*enc)
        flat = widths[-1] * self.bottom * self.bottom
        self.to_latent = nn.Linear(flat, latent_dim)

        self.from_latent = nn.Linear(latent_dim, flat)
        dec = []
        rev = list(reversed(widths))
        for c_in, c_out in zip(rev, rev[1:] + [rev[-1]]):
            dec.append(_up_block(c_in, c_out))
        self.decoder_conv = nn.Sequential(*dec)
        self.head = nn.Sequential(nn.Conv2d(rev[-1], channels, 3, padding=1), nn.Sigmoid())

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1:] != (self.channels, self.side, self.side):
            raise ValueError(
                f"expected batch of ({self.channels},{self.side},{self.side}), got {tuple(x.shape[1:])}"
            )
        h = self.encoder_conv(x)
        return self.to_latent(h.flatten(1))

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-1] != self.latent_dim:
            raise ValueError(f"latent dim must be {self.latent_dim}, got {z.shape[-1]}")
        h = self.from_latent(z)
        h = h.view(-1, self.widths[-1], self.bottom, self.bottom)
        return self.head(self.decoder_conv(h))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(x))

    def arch_config(self) -> dict:
        return {
            "side": self.side,
            "channels": self.channels,
            "latent_dim": self.latent_dim,
            "widths": list(self.widths),
        }


def reconstruction_loss(original, recon, reduction: str = "mean") -> torch.Tensor:
    """Squared reconstruction error; mean over pixels by default, with the
    raw pixel-sum variant behind the ``reduction`` flag."""
    original = torch.as_tensor(original)
    recon = torch.as_tensor(recon)
    if original.shape != recon.shape:
        raise ValueError(f"shape mismatch: {tuple(original.shape)} vs {tuple(recon.shape)}")
    sq = (original - recon) ** 2
    if reduction == "mean":
        return sq.mean()
    if reduction == "sum":
        return sq.sum()
    raise ValueError(f"unknown reduction {reduction!r}")


@torch.no_grad()
def encode_image(model: ConvAutoencoder, image: np.ndarray) -> np.ndarray:
    """Teacher code of a single (H, W, C) image; deterministic in eval mode."""
    model.eval()
    z = model.encode(image_to_tensor(image).unsqueeze(0))
    return z.squeeze(0).numpy()


@torch.no_grad()
def decode_latent(model: ConvAutoencoder, code: np.ndarray) -> np.ndarray:
    model.eval()
    z = torch.as_tensor(np.asarray(code, dtype=np.float32)).reshape(1, -1)
    return tensor_to_image(model.decode(z).squeeze(0))


def save_autoencoder(
    model: ConvAutoencoder,
    path: str | Path,
    epochs_trained: int = 0,
    final_loss: float | None = None,
    config_hash: str = "",
) -> Path:
    sidecar = {
        "kind": "autoencoder",
        "latent_dim": model.latent_dim,
        "input_side": model.side,
        "channels": model.channels,
        "widths": list(model.widths),
        "epochs_trained": epochs_trained,
        "final_loss": final_loss,
        "config_hash": config_hash,
    }
    return write_checkpoint(path, model.state_dict(), sidecar)


def load_autoencoder(path: str | Path) -> tuple[ConvAutoencoder, dict]:
    state, meta = read_checkpoint(path)
    model = ConvAutoencoder(
        side=meta["input_side"],
        channels=meta["channels"],
        latent_dim=meta["latent_dim"],
        widths=tuple(meta["widths"]),
    )
    model.load_state_dict(state)
    model.eval()
    return model, meta
