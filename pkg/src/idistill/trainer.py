"""Two-stage training protocol.

Stage A fits the autoencoder on bonafide samples only (enforced, not
assumed).  Stage B freezes the encoder as the teacher and trains the
classifier with the joint loss; teacher codes are extracted per batch
under ``no_grad`` so no gradient can reach the teacher, and an optional
cache precomputes them once since the frozen encoder is deterministic.

Reproducibility: with a fixed seed the permutation stream, parameter
initialization and update order are all determined, so the produced
``TrainLog`` is a pure function of (seed, config, manifest).  In
deterministic mode torch runs single-threaded and wall-clock fields are
zeroed so two identical runs serialize byte-identically.
"""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import LATENT_DIM
from .autoencoder import ConvAutoencoder, reconstruction_loss
from .classifier import MorphClassifier
from .core import Label, SampleRecord, load_image
from .losses import KDContext, bce_loss, kd_loss
from .metrics import ScoreSet, compute_eer
from .tensorops import images_to_batch, seed_everything


@dataclass
class TrainConfig:
    stage: str
    epochs: int
    learning_rate: float
    batch_size: int
    seed: int = 0
    side: int = 64
    channels: int = 3
    latent_dim: int = LATENT_DIM
    ae_widths: tuple[int, ...] = (16, 32, 64, 128)
    clf_base_width: int = 16
    clf_blocks: tuple[int, ...] = (2, 2, 2, 2)
    patience: int = 20
    kd_weight: float = 1.0
    flip_augment: bool = False
    cache_teacher_codes: bool = False
    deterministic: bool = False

    def __post_init__(self) -> None:
        if self.stage not in ("ae", "clf"):
            raise ValueError(f"stage must be 'ae' or 'clf', got {self.stage!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1, learning_rate > 0 required")

    @classmethod
    def ae_defaults(cls, **overrides) -> "TrainConfig":
        args = dict(stage="ae", epochs=300, learning_rate=1e-4, batch_size=32)
        args.update(overrides)
        return cls(**args)

    @classmethod
    def clf_defaults(cls, **overrides) -> "TrainConfig":
        args = dict(stage="clf", epochs=100, learning_rate=1e-4, batch_size=16)
        args.update(overrides)
        return cls(**args)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ae_widths"] = list(self.ae_widths)
        d["clf_blocks"] = list(self.clf_blocks)
        return d


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    bce: float | None
    kd: float | None
    val_metric: float | None
    wall_seconds: float


@dataclass
class TrainLog:
    config: dict
    records: list[EpochRecord] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "summary": self.summary,
            "records": [asdict(r) for r in self.records],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainLog":
        obj = json.loads(text)
        return cls(
            config=obj["config"],
            records=[EpochRecord(**r) for r in obj["records"]],
            summary=obj.get("summary", {}),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "TrainLog":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class TeacherCodes:
    """Per-sample teacher fragment: u for bonafide, (u_1, u_2) for attacks."""

    u: torch.Tensor | None = None
    u_1: torch.Tensor | None = None
    u_2: torch.Tensor | None = None


def _apply_determinism(cfg: TrainConfig) -> None:
    if cfg.deterministic:
        torch.set_num_threads(1)
    seed_everything(cfg.seed)


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, 3, epoch]).permutation(n)


def _load_images(records: list[SampleRecord], side: int, channels: int) -> torch.Tensor:
    return images_to_batch([load_image(r.image_path, side, channels) for r in records])


def train_autoencoder(
    cfg: TrainConfig,
    records: list[SampleRecord],
    val_records: list[SampleRecord] | None = None,
) -> tuple[ConvAutoencoder, TrainLog]:
    """Stage A: fit the reconstruction objective on bonafide samples only."""
    if cfg.stage != "ae":
        raise ValueError("train_autoencoder requires an 'ae' stage config")
    bad = [r for r in records if r.label is not Label.BONAFIDE]
    if bad:
        raise ValueError(
            f"autoencoder training data must be bonafide-only; found {len(bad)} attack record(s)"
        )
    if not records:
        raise ValueError("autoencoder training needs at least one record")

    _apply_determinism(cfg)
    model = ConvAutoencoder(
        side=cfg.side, channels=cfg.channels, latent_dim=cfg.latent_dim, widths=cfg.ae_widths
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    x_all = _load_images(records, cfg.side, cfg.channels)
    x_val = _load_images(val_records, cfg.side, cfg.channels) if val_records else None

    log = TrainLog(config=cfg.to_dict())
    n = x_all.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        model.train()
        perm = _epoch_permutation(cfg.seed, epoch, n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            x = x_all[idx]
            recon = model(x)
            loss = reconstruction_loss(x, recon)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += loss.detach().item() * len(idx)

        val_metric = None
        if x_val is not None:
            model.eval()
            with torch.no_grad():
                val_metric = float(reconstruction_loss(x_val, model(x_val)))
        wall = 0.0 if cfg.deterministic else time.perf_counter() - t0
        log.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / n,
                bce=None,
                kd=None,
                val_metric=val_metric,
                wall_seconds=wall,
            )
        )

    log.summary = {
        "final_loss": log.records[-1].train_loss if log.records else None,
        "epochs_trained": len(log.records),
    }
    model.eval()
    return model, log


def teacher_codes(
    teacher: ConvAutoencoder,
    records: list[SampleRecord],
    images: dict[Path, np.ndarray] | None = None,
    cache: dict[Path, torch.Tensor] | None = None,
) -> list[TeacherCodes]:
    """Frozen-encoder codes for a batch of records.

    Bonafide records get the code of their own image; attack records get
    the codes of both source images.  ``images`` short-circuits disk reads,
    ``cache`` memoizes codes across batches (valid because the teacher is
    frozen and evaluation is deterministic).
    """
    needed: list[Path] = []
    for rec in records:
        if rec.label is Label.BONAFIDE:
            needed.append(rec.image_path)
        else:
            needed.extend([rec.source_a, rec.source_b])
    todo = sorted({p for p in needed if cache is None or p not in cache})

    codes: dict[Path, torch.Tensor] = dict(cache) if cache else {}
    if todo:
        imgs = []
        for p in todo:
            if images is not None and p in images:
                imgs.append(images[p])
            else:
                try:
                    imgs.append(load_image(p, teacher.side, teacher.channels))
                except FileNotFoundError as exc:
                    owner = next(
                        (r for r in records if p in (r.source_a, r.source_b, r.image_path)), None
                    )
                    raise FileNotFoundError(
                        f"missing image {p} required by record {owner.image_path if owner else '?'}: {exc}"
                    ) from exc
        teacher.eval()
        with torch.no_grad():
            z = teacher.encode(images_to_batch(imgs))
        for p, code in zip(todo, z):
            codes[p] = code
        if cache is not None:
            cache.update({p: codes[p] for p in todo})

    out = []
    for rec in records:
        if rec.label is Label.BONAFIDE:
            out.append(TeacherCodes(u=codes[rec.image_path]))
        else:
            out.append(TeacherCodes(u_1=codes[rec.source_a], u_2=codes[rec.source_b]))
    return out


def _val_eer(model: MorphClassifier, x_val: torch.Tensor, labels: list[Label]) -> float:
    model.eval()
    with torch.no_grad():
        out = model(x_val)
    y_hat = out.y_hat.numpy()
    mask = np.array([lab is Label.BONAFIDE for lab in labels])
    eer, _ = compute_eer(ScoreSet(bonafide=y_hat[mask], attack=y_hat[~mask]))
    return eer


def train_classifier(
    cfg: TrainConfig,
    train_records: list[SampleRecord],
    val_records: list[SampleRecord],
    teacher: ConvAutoencoder,
) -> tuple[MorphClassifier, TrainLog]:
    """Stage B: joint BCE + distillation training against the frozen teacher.

    Early-stops on validation EER (patience in epochs) and restores the
    best-EER parameters before returning.
    """
    if cfg.stage != "clf":
        raise ValueError("train_classifier requires a 'clf' stage config")
    for name, recs in (("train", train_records), ("validation", val_records)):
        labels = {r.label for r in recs}
        if labels != {Label.BONAFIDE, Label.ATTACK}:
            raise ValueError(
                f"{name} split must contain both classes (EER and both distillation "
                f"branches are undefined otherwise)"
            )

    _apply_determinism(cfg)
    teacher.eval()
    for p in teacher.parameters():
        p.requires_grad_(False)

    model = MorphClassifier(
        side=cfg.side,
        channels=cfg.channels,
        latent_dim=cfg.latent_dim,
        base_width=cfg.clf_base_width,
        blocks_per_stage=cfg.clf_blocks,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    # preload every training image (and morph sources) once
    image_bank: dict[Path, np.ndarray] = {}
    for rec in train_records:
        image_bank.setdefault(rec.image_path, load_image(rec.image_path, cfg.side, cfg.channels))
        if rec.label is Label.ATTACK:
            for p in (rec.source_a, rec.source_b):
                image_bank.setdefault(p, load_image(p, cfg.side, cfg.channels))
    x_train = images_to_batch([image_bank[r.image_path] for r in train_records])
    y_train = torch.tensor([r.label.y for r in train_records])
    x_val = _load_images(val_records, cfg.side, cfg.channels)
    val_labels = [r.label for r in val_records]

    code_cache: dict[Path, torch.Tensor] | None = {} if cfg.cache_teacher_codes else None
    if cfg.cache_teacher_codes:
        teacher_codes(teacher, train_records, images=image_bank, cache=code_cache)

    log = TrainLog(config=cfg.to_dict())
    n = len(train_records)
    best_eer, best_epoch, best_state = float("inf"), None, None
    epochs_since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        model.train()
        perm = _epoch_permutation(cfg.seed, epoch, n)
        flip_rng = np.random.default_rng([cfg.seed, 4, epoch]) if cfg.flip_augment else None
        bce_sum = kd_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch_recs = [train_records[i] for i in idx]
            x = x_train[idx]
            if flip_rng is not None:
                mask = torch.from_numpy(flip_rng.random(len(idx)) < 0.5)
                x = torch.where(mask[:, None, None, None], x.flip(-1), x)
            y = y_train[idx]

            out = model(x)
            codes = teacher_codes(teacher, batch_recs, images=image_bank, cache=code_cache)

            batch_bce = bce_loss(y, out.y_hat).mean()
            kd_terms = []
            for i, (rec, frag) in enumerate(zip(batch_recs, codes)):
                ctx = KDContext(
                    v_1=out.v_1[i],
                    v_2=out.v_2[i],
                    id_1=out.id_1[i],
                    id_2=out.id_2[i],
                    y=rec.label.y,
                    u=frag.u,
                    u_1=frag.u_1,
                    u_2=frag.u_2,
                )
                kd_terms.append(kd_loss(ctx))
            batch_kd = torch.stack(kd_terms).mean()

            loss = batch_bce + cfg.kd_weight * batch_kd
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            bce_sum += batch_bce.detach().item() * len(idx)
            kd_sum += batch_kd.detach().item() * len(idx)

        bce_mean = bce_sum / n
        kd_mean = cfg.kd_weight * kd_sum / n
        val_eer = _val_eer(model, x_val, val_labels)
        wall = 0.0 if cfg.deterministic else time.perf_counter() - t0
        log.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=bce_mean + kd_mean,
                bce=bce_mean,
                kd=kd_mean,
                val_metric=val_eer,
                wall_seconds=wall,
            )
        )

        if val_eer < best_eer:
            best_eer, best_epoch = val_eer, epoch
            best_state = copy.deepcopy(model.state_dict())
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    log.summary = {
        "best_epoch": best_epoch,
        "best_val_eer": None if best_epoch is None else best_eer,
        "epochs_trained": len(log.records),
        "stopped_early": len(log.records) < cfg.epochs,
    }
    model.eval()
    return model, log
