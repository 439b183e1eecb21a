"""Request/response models for every service operation.

The CLI builds the same models, so flag validation and endpoint
validation are one code path.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class SynthRequest(BaseModel):
    out_dir: str
    n_identities: int = 30
    images_per_identity: int = 3
    n_morphs: int = 40
    alpha: float = Field(default=0.5, gt=0.0, lt=1.0)
    seed: int = 0
    side: int = 64
    train_frac: float = 0.70
    val_frac: float = 0.15
    workers: int = 0


class SynthResponse(BaseModel):
    manifest_path: str
    n_bonafide: int
    n_attack: int


class TrainAutoencoderRequest(BaseModel):
    data: str
    out: str
    epochs: int = Field(default=300, ge=0)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 0
    side: int = 64
    channels: int = 3
    widths: list[int] = [16, 32, 64, 128]
    deterministic: bool = False
    log_out: str | None = None


class TrainAutoencoderResponse(BaseModel):
    checkpoint_path: str
    log_path: str
    epochs_trained: int
    final_loss: float | None


class TrainClassifierRequest(BaseModel):
    data: str
    teacher: str
    out: str
    epochs: int = Field(default=100, ge=0)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    batch_size: int = Field(default=16, ge=1)
    seed: int = 0
    patience: int = Field(default=20, ge=1)
    base_width: int = 16
    kd_weight: float = 1.0
    flip_augment: bool = False
    cache_teacher_codes: bool = False
    deterministic: bool = False
    log_out: str | None = None


class TrainClassifierResponse(BaseModel):
    checkpoint_path: str
    log_path: str
    epochs_trained: int
    best_epoch: int | None
    best_val_eer: float | None


class EvalRequest(BaseModel):
    data: str
    model: str
    split: str = "test"
    out: str | None = None


class EvalResponse(BaseModel):
    report_path: str | None
    eer: float
    eer_threshold: float
    bpcer_at_apcer: dict[str, float]
    n_bonafide: int
    n_attack: int


class ScoreRequest(BaseModel):
    image: str
    model: str
    threshold: float | None = Field(default=None, ge=0.0, le=1.0)


class ScoreResponse(BaseModel):
    id_1: float
    id_2: float
    bonafide_score: float
    verdict: str | None


class ReportRequest(BaseModel):
    report: str
    out_svg: str | None = None
    name: str = "model"


class ReportResponse(BaseModel):
    svg_path: str
    summary: str
