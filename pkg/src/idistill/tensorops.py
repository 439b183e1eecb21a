"""Small torch-side helpers shared by both networks and the trainer."""

from __future__ import annotations

import hashlib
import random

import numpy as np
import torch


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def image_to_tensor(img: np.ndarray) -> torch.Tensor:
    """(H, W, C) float image -> (C, H, W) float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1))).float()


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(C, H, W) tensor -> (H, W, C) float32 image clipped to [0, 1]."""
    arr = t.detach().cpu().numpy().transpose(1, 2, 0)
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def images_to_batch(imgs: list[np.ndarray]) -> torch.Tensor:
    return torch.stack([image_to_tensor(im) for im in imgs])


def param_hash(module: torch.nn.Module) -> str:
    """SHA-256 over every state-dict entry (parameters and buffers)."""
    h = hashlib.sha256()
    for key, tensor in sorted(module.state_dict().items()):
        h.update(key.encode())
        h.update(str(tuple(tensor.shape)).encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
