"""Checkpoint format shared by both models: torch blob + JSON sidecar.

The sidecar (``<checkpoint>.json``) records the architecture settings
needed to rebuild the module plus training provenance, so a checkpoint is
self-describing and loadable without the original config.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def sidecar_path(ckpt_path: str | Path) -> Path:
    p = Path(ckpt_path)
    return p.with_name(p.name + ".json")


def write_checkpoint(path: str | Path, state_dict: dict, sidecar: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(state_dict, path)
    sidecar_path(path).write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return path


def read_checkpoint(path: str | Path) -> tuple[dict, dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    side = sidecar_path(path)
    if not side.is_file():
        raise FileNotFoundError(f"checkpoint sidecar not found: {side}")
    state = torch.load(path, map_location="cpu", weights_only=True)
    meta = json.loads(side.read_text(encoding="utf-8"))
    return state, meta


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
