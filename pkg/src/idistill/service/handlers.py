"""Operation handlers: one function per endpoint, shared with the CLI.

Handlers raise ``ValueError`` (and subclasses) for invalid input and
``OSError`` (and subclasses) for missing/unreadable files; the app and the
CLI translate those into HTTP statuses and exit codes respectively.
"""

from __future__ import annotations

from pathlib import Path

from .. import classifier as clf_mod
from .. import metrics as metrics_mod
from ..autoencoder import load_autoencoder, save_autoencoder
from ..checkpoints import config_hash, file_hash
from ..core import Label, Split, load_image, load_manifest
from ..reporting import save_det_svg, summary_table
from ..synthgen import GenConfig, generate_dataset
from ..trainer import TrainConfig, train_autoencoder, train_classifier
from . import schemas as S


def _default_log_path(ckpt: str) -> str:
    return ckpt + ".log.json"


def synth(req: S.SynthRequest) -> S.SynthResponse:
    cfg = GenConfig(
        n_identities=req.n_identities,
        images_per_identity=req.images_per_identity,
        n_morphs=req.n_morphs,
        alpha=req.alpha,
        seed=req.seed,
        side=req.side,
        train_frac=req.train_frac,
        val_frac=req.val_frac,
    )
    manifest = generate_dataset(cfg, req.out_dir, workers=req.workers)
    records = load_manifest(manifest)
    return S.SynthResponse(
        manifest_path=str(manifest),
        n_bonafide=sum(r.label is Label.BONAFIDE for r in records),
        n_attack=sum(r.label is Label.ATTACK for r in records),
    )


def train_ae(req: S.TrainAutoencoderRequest) -> S.TrainAutoencoderResponse:
    records = load_manifest(req.data)
    train = [r for r in records if r.split is Split.TRAIN and r.label is Label.BONAFIDE]
    val = [r for r in records if r.split is Split.VAL and r.label is Label.BONAFIDE]
    cfg = TrainConfig(
        stage="ae",
        epochs=req.epochs,
        learning_rate=req.learning_rate,
        batch_size=req.batch_size,
        seed=req.seed,
        side=req.side,
        channels=req.channels,
        ae_widths=tuple(req.widths),
        deterministic=req.deterministic,
    )
    model, log = train_autoencoder(cfg, train, val_records=val or None)
    ckpt = save_autoencoder(
        model,
        req.out,
        epochs_trained=log.summary["epochs_trained"],
        final_loss=log.summary["final_loss"],
        config_hash=config_hash(cfg.to_dict()),
    )
    log_path = log.save(req.log_out or _default_log_path(req.out))
    return S.TrainAutoencoderResponse(
        checkpoint_path=str(ckpt),
        log_path=str(log_path),
        epochs_trained=log.summary["epochs_trained"],
        final_loss=log.summary["final_loss"],
    )


def train_clf(req: S.TrainClassifierRequest) -> S.TrainClassifierResponse:
    records = load_manifest(req.data)
    teacher, meta = load_autoencoder(req.teacher)
    cfg = TrainConfig(
        stage="clf",
        epochs=req.epochs,
        learning_rate=req.learning_rate,
        batch_size=req.batch_size,
        seed=req.seed,
        side=meta["input_side"],
        channels=meta["channels"],
        latent_dim=meta["latent_dim"],
        clf_base_width=req.base_width,
        patience=req.patience,
        kd_weight=req.kd_weight,
        flip_augment=req.flip_augment,
        cache_teacher_codes=req.cache_teacher_codes,
        deterministic=req.deterministic,
    )
    train = [r for r in records if r.split is Split.TRAIN]
    val = [r for r in records if r.split is Split.VAL]
    model, log = train_classifier(cfg, train, val, teacher)
    ckpt = clf_mod.save_classifier(
        model,
        req.out,
        epochs_trained=log.summary["epochs_trained"],
        best_epoch=log.summary["best_epoch"],
        best_val_eer=log.summary["best_val_eer"],
        config_hash=config_hash(cfg.to_dict()),
    )
    log_path = log.save(req.log_out or _default_log_path(req.out))
    return S.TrainClassifierResponse(
        checkpoint_path=str(ckpt),
        log_path=str(log_path),
        epochs_trained=log.summary["epochs_trained"],
        best_epoch=log.summary["best_epoch"],
        best_val_eer=log.summary["best_val_eer"],
    )


def run_eval(req: S.EvalRequest) -> S.EvalResponse:
    split = Split(req.split)
    records = [r for r in load_manifest(req.data) if r.split is split]
    model, _ = clf_mod.load_classifier(req.model)
    report = metrics_mod.evaluate(
        model,
        records,
        model_hash=file_hash(req.model),
        manifest_hash=file_hash(req.data),
    )
    report_path = report.save(req.out) if req.out else None
    return S.EvalResponse(
        report_path=str(report_path) if report_path else None,
        eer=report.eer,
        eer_threshold=report.eer_threshold,
        bpcer_at_apcer={f"{k:.2f}": v for k, v in sorted(report.bpcer_at_apcer.items())},
        n_bonafide=report.n_bonafide,
        n_attack=report.n_attack,
    )


def score(req: S.ScoreRequest) -> S.ScoreResponse:
    model, _ = clf_mod.load_classifier(req.model)
    image = load_image(req.image, side=model.side, channels=model.channels)
    triple = clf_mod.predict(model, image)
    verdict = None
    if req.threshold is not None:
        verdict = "bonafide" if triple.bonafide_score >= req.threshold else "attack"
    return S.ScoreResponse(
        id_1=triple.id_1,
        id_2=triple.id_2,
        bonafide_score=triple.bonafide_score,
        verdict=verdict,
    )


def report(req: S.ReportRequest) -> S.ReportResponse:
    rep = metrics_mod.EvalReport.load(req.report)
    out_svg = req.out_svg or str(Path(req.report).with_suffix(".svg"))
    svg_path = save_det_svg(rep, out_svg)
    return S.ReportResponse(svg_path=str(svg_path), summary=summary_table(rep, name=req.name))
