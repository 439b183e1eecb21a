"""Domain types, label conventions and dataset manifest I/O.

A dataset is a JSON Lines manifest plus PNG images.  Every record is a
``SampleRecord``; attack records carry the two bonafide source images the
morph was blended from, which is what the attack-side distillation term
consumes.  Images flow through the system as float arrays of shape
(side, side, channels) with values in [0, 1].
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MANIFEST_NAME = "manifest.jsonl"


class Label(enum.Enum):
    BONAFIDE = "bonafide"
    ATTACK = "attack"

    @property
    def y(self) -> float:
        """Numeric target: bonafide -> 1.0, attack -> 0.0."""
        return 1.0 if self is Label.BONAFIDE else 0.0


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class ManifestError(ValueError):
    """Malformed or invariant-violating manifest content."""


@dataclass(frozen=True)
class SampleRecord:
    """One dataset entry; paths are resolved (absolute) after loading.

    Invariants: an attack record has two distinct source paths, a bonafide
    record has none.
    """

    image_path: Path
    label: Label
    split: Split
    source_a: Path | None = None
    source_b: Path | None = None

    def __post_init__(self) -> None:
        if self.label is Label.ATTACK:
            if self.source_a is None or self.source_b is None:
                raise ManifestError(
                    f"attack record {self.image_path} must carry source_a and source_b"
                )
            if self.source_a == self.source_b:
                raise ManifestError(
                    f"attack record {self.image_path} has identical sources"
                )
        else:
            if self.source_a is not None or self.source_b is not None:
                raise ManifestError(
                    f"bonafide record {self.image_path} must not carry sources"
                )


def _record_from_obj(obj: dict, base: Path, lineno: int) -> SampleRecord:
    try:
        label = Label(obj["label"])
        split = Split(obj["split"])
        image_path = (base / obj["image_path"]).resolve()
        source_a = obj.get("source_a")
        source_b = obj.get("source_b")
        return SampleRecord(
            image_path=image_path,
            label=label,
            split=split,
            source_a=(base / source_a).resolve() if source_a else None,
            source_b=(base / source_b).resolve() if source_b else None,
        )
    except ManifestError as exc:
        raise ManifestError(f"line {lineno}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"line {lineno}: invalid record: {exc}") from exc


def load_manifest(path: str | Path) -> list[SampleRecord]:
    """Parse a JSON Lines manifest into validated records.

    Relative image paths resolve against the manifest's directory.  Raises
    ``ManifestError`` with the offending line number on malformed input and
    ``FileNotFoundError`` if the manifest does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.resolve().parent
    records: list[SampleRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"line {lineno}: expected a JSON object")
            records.append(_record_from_obj(obj, base, lineno))
    return records


def save_manifest(records: list[SampleRecord], path: str | Path) -> Path:
    """Write records as JSON Lines with paths relative to the manifest dir."""
    path = Path(path)
    base = path.resolve().parent
    base.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        obj = {
            "image_path": rec.image_path.relative_to(base).as_posix(),
            "label": rec.label.value,
            "split": rec.split.value,
        }
        if rec.source_a is not None:
            obj["source_a"] = rec.source_a.relative_to(base).as_posix()
            obj["source_b"] = rec.source_b.relative_to(base).as_posix()
        lines.append(json.dumps(obj, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the (side, side, channels) [0, 1] image contract."""
    if img.ndim != 3:
        raise ValueError(f"image must be HxWxC, got shape {img.shape}")
    h, w, c = img.shape
    if h != w:
        raise ValueError(f"image must be square, got {h}x{w}")
    if c not in (1, 3):
        raise ValueError(f"channel count must be 1 or 3, got {c}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return img


def load_image(path: str | Path, side: int = 64, channels: int = 3) -> np.ndarray:
    """Decode, resize to side x side and scale to [0, 1].

    Raises ``OSError`` naming the path on undecodable input.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im = im.convert("RGB" if channels == 3 else "L")
            im = im.resize((side, side), Image.Resampling.BILINEAR)
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot decode image {path}: {exc}") from exc
    if channels == 1:
        arr = arr[:, :, None]
    return check_image(arr)


def save_image(img: np.ndarray, path: str | Path) -> Path:
    """Write a [0, 1] float image as PNG (lossy to 8-bit quantization)."""
    check_image(img)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")
    return path
