"""Deterministic desk-scale dataset generator.

Stands in for a real morph corpus: each synthetic identity is a procedural
face proxy (oval + eyes + mouth on a shaded background) whose parameters
are drawn from the identity seed, with bounded per-image jitter playing
the role of pose/illumination variation.  Morphs are pixel blends of two
bonafide images with the source pair recorded in the manifest, which is
exactly the provenance the attack-side distillation term needs.

Everything is reproducible from ``GenConfig.seed``: regenerating writes
byte-identical images and manifest.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    Label,
    SampleRecord,
    Split,
    load_image,
    save_image,
    save_manifest,
    MANIFEST_NAME,
)

_SPLIT_ORDER = (Split.TRAIN, Split.VAL, Split.TEST)


@dataclass(frozen=True)
class IdentityParams:
    """Procedural face-proxy parameters; one instance per identity."""

    background: float
    center_x: float
    center_y: float
    axis_x: float
    axis_y: float
    eye_spacing: float
    eye_height: float
    eye_radius: float
    mouth_curve: float
    mouth_width: float
    mouth_drop: float
    face_rgb: tuple[float, float, float]
    eye_rgb: tuple[float, float, float]
    mouth_rgb: tuple[float, float, float]
    jitter_scale: float

    @classmethod
    def from_seed(cls, seed: int) -> "IdentityParams":
        rng = np.random.default_rng(seed)
        r = rng.uniform(0.55, 0.95)
        g = r * rng.uniform(0.62, 0.85)
        b = g * rng.uniform(0.62, 0.90)
        return cls(
            background=rng.uniform(0.05, 0.35),
            center_x=rng.uniform(0.42, 0.58),
            center_y=rng.uniform(0.42, 0.58),
            axis_x=rng.uniform(0.20, 0.30),
            axis_y=rng.uniform(0.26, 0.38),
            eye_spacing=rng.uniform(0.07, 0.13),
            eye_height=rng.uniform(0.05, 0.12),
            eye_radius=rng.uniform(0.020, 0.045),
            mouth_curve=rng.uniform(-0.05, 0.05),
            mouth_width=rng.uniform(0.06, 0.14),
            mouth_drop=rng.uniform(0.10, 0.20),
            face_rgb=(r, g, b),
            eye_rgb=(rng.uniform(0.02, 0.15),) * 3,
            mouth_rgb=(rng.uniform(0.45, 0.75), rng.uniform(0.05, 0.25), rng.uniform(0.10, 0.30)),
            jitter_scale=rng.uniform(0.5, 1.5),
        )


@dataclass(frozen=True)
class GenConfig:
    n_identities: int
    images_per_identity: int
    n_morphs: int
    alpha: float = 0.5
    seed: int = 0
    side: int = 64
    train_frac: float = 0.70
    val_frac: float = 0.15

    def __post_init__(self) -> None:
        if self.n_identities < 2 or self.images_per_identity < 1:
            raise ValueError("need at least 2 identities with 1 image each")
        max_pairs = self.n_identities * (self.n_identities - 1) // 2
        if not 0 <= self.n_morphs <= max_pairs:
            raise ValueError(
                f"n_morphs={self.n_morphs} exceeds available pairings ({max_pairs})"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if self.side < 16 or self.side % 16 != 0:
            raise ValueError("side must be a positive multiple of 16")
        if self.train_frac <= 0 or self.val_frac < 0 or self.train_frac + self.val_frac >= 1:
            raise ValueError("split fractions must satisfy 0 < train, 0 <= val, train+val < 1")


def render_identity(params: IdentityParams, jitter_seed: int, side: int = 64) -> np.ndarray:
    """Render one face-proxy image, bitwise deterministic in its arguments."""
    rng = np.random.default_rng(jitter_seed)
    js = params.jitter_scale
    dcx = rng.uniform(-0.015, 0.015) * js
    dcy = rng.uniform(-0.015, 0.015) * js
    brightness = 1.0 + rng.uniform(-0.06, 0.06) * js
    grad = rng.uniform(0.0, 0.08) * js

    ys, xs = np.mgrid[0:side, 0:side].astype(np.float64) / side
    cx, cy = params.center_x + dcx, params.center_y + dcy

    img = np.empty((side, side, 3), dtype=np.float64)
    # shaded background with a vertical illumination gradient
    img[:] = params.background
    img += (grad * (ys - 0.5))[:, :, None]

    face = ((xs - cx) / params.axis_x) ** 2 + ((ys - cy) / params.axis_y) ** 2 <= 1.0
    img[face] = params.face_rgb

    for sx in (-1.0, 1.0):
        ex, ey = cx + sx * params.eye_spacing, cy - params.eye_height
        eye = (xs - ex) ** 2 + (ys - ey) ** 2 <= params.eye_radius**2
        img[eye] = params.eye_rgb

    dx = xs - cx
    mouth_y = cy + params.mouth_drop + params.mouth_curve * (dx / params.mouth_width) ** 2
    mouth = (np.abs(ys - mouth_y) <= 0.015) & (np.abs(dx) <= params.mouth_width)
    img[mouth] = params.mouth_rgb

    img *= brightness
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def morph(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Pixel blend ``alpha * a + (1 - alpha) * b``, clipped to [0, 1]."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    out = alpha * a.astype(np.float64) + (1.0 - alpha) * b.astype(np.float64)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _identity_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, 1, i]).generate_state(1)[0])


def _jitter_seed(seed: int, i: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, 2, i, k]).generate_state(1)[0])


def _split_counts(cfg: GenConfig) -> tuple[int, int, int]:
    n_train = max(1, round(cfg.train_frac * cfg.n_identities))
    n_val = round(cfg.val_frac * cfg.n_identities)
    n_val = min(n_val, cfg.n_identities - n_train)
    return n_train, n_val, cfg.n_identities - n_train - n_val


def _allocate_morphs(n_morphs: int, id_counts: list[int]) -> list[int]:
    """Largest-remainder allocation proportional to identity counts, capped
    by each split's available pair count."""
    caps = [c * (c - 1) // 2 for c in id_counts]
    total_ids = sum(id_counts)
    raw = [n_morphs * c / total_ids for c in id_counts]
    quotas = [int(q) for q in raw]
    remainders = sorted(
        range(len(raw)), key=lambda s: (raw[s] - quotas[s], -s), reverse=True
    )
    for s in itertools.cycle(remainders):
        if sum(quotas) >= n_morphs:
            break
        quotas[s] += 1
    # cap by capacity and push overflow into splits that still have room
    for s in range(len(quotas)):
        if quotas[s] > caps[s]:
            overflow = quotas[s] - caps[s]
            quotas[s] = caps[s]
            for t in range(len(quotas)):
                if t == s or overflow == 0:
                    continue
                room = caps[t] - quotas[t]
                take = min(room, overflow)
                quotas[t] += take
                overflow -= take
            if overflow:
                raise ValueError(
                    "n_morphs exceeds the pairings available inside identity-disjoint splits"
                )
    return quotas


def generate_dataset(cfg: GenConfig, out_dir: str | Path, workers: int = 0) -> Path:
    """Write bonafide images, morphs and the manifest; return the manifest path.

    Identities are split so that none contributes images to more than one
    split, and morph pairs are drawn within a single split only.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bonafide").mkdir(exist_ok=True)
        (out_dir / "morph").mkdir(exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc

    rng = np.random.default_rng(cfg.seed)
    params = [IdentityParams.from_seed(_identity_seed(cfg.seed, i)) for i in range(cfg.n_identities)]

    order = rng.permutation(cfg.n_identities)
    n_train, n_val, _ = _split_counts(cfg)
    split_of: dict[int, Split] = {}
    for pos, ident in enumerate(order):
        if pos < n_train:
            split_of[int(ident)] = Split.TRAIN
        elif pos < n_train + n_val:
            split_of[int(ident)] = Split.VAL
        else:
            split_of[int(ident)] = Split.TEST

    jobs = [
        (i, k, _jitter_seed(cfg.seed, i, k))
        for i in range(cfg.n_identities)
        for k in range(cfg.images_per_identity)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            renders = list(
                pool.map(lambda j: render_identity(params[j[0]], j[2], cfg.side), jobs)
            )
    else:
        renders = [render_identity(params[i], js, cfg.side) for i, _, js in jobs]

    records: list[SampleRecord] = []
    bonafide_path: dict[tuple[int, int], Path] = {}
    for (i, k, _), img in zip(jobs, renders):
        path = out_dir / "bonafide" / f"{i:04d}_{k}.png"
        save_image(img, path)
        bonafide_path[(i, k)] = path.resolve()
        records.append(
            SampleRecord(image_path=path.resolve(), label=Label.BONAFIDE, split=split_of[i])
        )

    ids_by_split = {
        s: sorted(i for i in range(cfg.n_identities) if split_of[i] is s)
        for s in _SPLIT_ORDER
    }
    quotas = _allocate_morphs(cfg.n_morphs, [len(ids_by_split[s]) for s in _SPLIT_ORDER])

    for split, quota in zip(_SPLIT_ORDER, quotas):
        pairs = list(itertools.combinations(ids_by_split[split], 2))
        rng.shuffle(pairs)
        for i, j in pairs[:quota]:
            ka = int(rng.integers(cfg.images_per_identity))
            kb = int(rng.integers(cfg.images_per_identity))
            src_a, src_b = bonafide_path[(i, ka)], bonafide_path[(j, kb)]
            img = morph(
                load_image(src_a, side=cfg.side),
                load_image(src_b, side=cfg.side),
                cfg.alpha,
            )
            path = out_dir / "morph" / f"{i:04d}_{j:04d}.png"
            save_image(img, path)
            records.append(
                SampleRecord(
                    image_path=path.resolve(),
                    label=Label.ATTACK,
                    split=split,
                    source_a=src_a,
                    source_b=src_b,
                )
            )

    return save_manifest(records, out_dir / MANIFEST_NAME)
