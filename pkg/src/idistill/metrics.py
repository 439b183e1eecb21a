"""Biometric error rates over fused bonafide scores.

Conventions (the literature leaves them implementation-defined, so they
are fixed here and mirrored by the brute-force oracle in the tests):

- a sample scoring exactly at the threshold counts as bonafide;
- APCER(t) = fraction of attack scores >= t, nonincreasing in t;
- BPCER(t) = fraction of bonafide scores < t, nondecreasing in t;
- threshold sweeps run over every distinct observed score plus a sentinel
  below the minimum and above the maximum;
- the equal error rate interpolates linearly between the two sweep points
  where APCER-BPCER changes sign (``interpolate=False`` returns the
  discrete minimizer, which is what the oracle equivalence tests use).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import MorphClassifier, predict_batch
from .core import Label, SampleRecord, load_image

DEFAULT_APCER_TARGETS = (0.01, 0.20)


@dataclass(frozen=True)
class ScoreSet:
    bonafide: np.ndarray
    attack: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "bonafide", np.asarray(self.bonafide, dtype=np.float64))
        object.__setattr__(self, "attack", np.asarray(self.attack, dtype=np.float64))
        for name in ("bonafide", "attack"):
            arr = getattr(self, name)
            if arr.ndim != 1:
                raise ValueError(f"{name} scores must be a flat list")
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ValueError(f"{name} scores must lie in [0, 1]")


def apcer(scores: ScoreSet, threshold: float) -> float:
    """Fraction of attacks classified bonafide (score >= threshold)."""
    if scores.attack.size == 0:
        raise ValueError("APCER undefined on an empty attack set")
    return float(np.count_nonzero(scores.attack >= threshold) / scores.attack.size)


def bpcer(scores: ScoreSet, threshold: float) -> float:
    """Fraction of bonafide classified as attacks (score < threshold)."""
    if scores.bonafide.size == 0:
        raise ValueError("BPCER undefined on an empty bonafide set")
    return float(np.count_nonzero(scores.bonafide < threshold) / scores.bonafide.size)


def sweep_thresholds(scores: ScoreSet) -> np.ndarray:
    """Distinct observed scores plus one sentinel on each side."""
    allscores = np.concatenate([scores.bonafide, scores.attack])
    if allscores.size == 0:
        raise ValueError("cannot sweep thresholds over empty score populations")
    uniq = np.unique(allscores)
    return np.concatenate([[uniq[0] - 1.0], uniq, [uniq[-1] + 1.0]])


def compute_eer(scores: ScoreSet, interpolate: bool = True) -> tuple[float, float]:
    """Equal error rate and its threshold.

    APCER-BPCER is monotone nonincreasing along the sweep, so the sign
    change is unique; with ``interpolate`` the crossing is resolved
    linearly between the two adjacent sweep points, otherwise the sweep
    point minimizing |APCER-BPCER| (first on ties) is returned.
    """
    if scores.bonafide.size == 0 or scores.attack.size == 0:
        raise ValueError("EER needs both score populations")
    thr = sweep_thresholds(scores)
    a = np.array([apcer(scores, t) for t in thr])
    b = np.array([bpcer(scores, t) for t in thr])
    d = a - b

    if not interpolate:
        idx = int(np.argmin(np.abs(d)))
        return float((a[idx] + b[idx]) / 2.0), float(thr[idx])

    idx = int(np.argmax(d <= 0.0))  # first crossing; d[0] = 1, d[-1] = -1
    if d[idx] == 0.0:
        return float((a[idx] + b[idx]) / 2.0), float(thr[idx])
    lam = d[idx - 1] / (d[idx - 1] - d[idx])
    a_star = a[idx - 1] + lam * (a[idx] - a[idx - 1])
    b_star = b[idx - 1] + lam * (b[idx] - b[idx - 1])
    t_star = thr[idx - 1] + lam * (thr[idx] - thr[idx - 1])
    return float((a_star + b_star) / 2.0), float(t_star)


def bpcer_at_apcer(scores: ScoreSet, target_apcer: float) -> float:
    """BPCER at the smallest sweep threshold whose APCER meets the target."""
    if not 0.0 < target_apcer < 1.0:
        raise ValueError("target APCER must lie strictly inside (0, 1)")
    if scores.bonafide.size == 0 or scores.attack.size == 0:
        raise ValueError("BPCER@APCER needs both score populations")
    for t in sweep_thresholds(scores):
        if apcer(scores, t) <= target_apcer:
            return bpcer(scores, t)
    raise AssertionError("unreachable: APCER is 0 at the upper sentinel")


def det_curve(scores: ScoreSet) -> list[tuple[float, float]]:
    """(APCER, BPCER) at every distinct score, ordered by ascending APCER."""
    uniq = np.unique(np.concatenate([scores.bonafide, scores.attack]))
    pts = [(apcer(scores, t), bpcer(scores, t)) for t in uniq[::-1]]
    return [(float(a), float(b)) for a, b in pts]


@dataclass
class EvalReport:
    eer: float
    eer_threshold: float
    bpcer_at_apcer: dict[float, float]
    det_points: list[tuple[float, float]]
    n_bonafide: int
    n_attack: int
    model_hash: str = ""
    manifest_hash: str = ""

    def to_json(self) -> str:
        payload = {
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "bpcer_at_apcer": {f"{k:.2f}": v for k, v in sorted(self.bpcer_at_apcer.items())},
            "det": [[a, b] for a, b in self.det_points],
            "n_bonafide": self.n_bonafide,
            "n_attack": self.n_attack,
            "model_hash": self.model_hash,
            "manifest_hash": self.manifest_hash,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        obj = json.loads(text)
        return cls(
            eer=obj["eer"],
            eer_threshold=obj["eer_threshold"],
            bpcer_at_apcer={float(k): v for k, v in obj["bpcer_at_apcer"].items()},
            det_points=[(a, b) for a, b in obj["det"]],
            n_bonafide=obj["n_bonafide"],
            n_attack=obj["n_attack"],
            model_hash=obj.get("model_hash", ""),
            manifest_hash=obj.get("manifest_hash", ""),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"report not found: {path}")
        return cls.from_json(path.read_text(encoding="utf-8"))


def score_records(
    model: MorphClassifier,
    records: list[SampleRecord],
    batch_size: int = 64,
) -> ScoreSet:
    """Fused bonafide scores of every record, split by ground-truth label."""
    bona, att = [], []
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        images = [load_image(r.image_path, side=model.side, channels=model.channels) for r in chunk]
        for rec, triple in zip(chunk, predict_batch(model, images)):
            (bona if rec.label is Label.BONAFIDE else att).append(triple.bonafide_score)
    return ScoreSet(bonafide=np.array(bona), attack=np.array(att))


def evaluate(
    model: MorphClassifier,
    records: list[SampleRecord],
    targets: tuple[float, ...] = DEFAULT_APCER_TARGETS,
    model_hash: str = "",
    manifest_hash: str = "",
    batch_size: int = 64,
) -> EvalReport:
    """Score every record and assemble the full report.

    Raises ``ValueError`` when the record set does not contain both classes.
    """
    if not records:
        raise ValueError("evaluation needs a non-empty record set")
    scores = score_records(model, records, batch_size=batch_size)
    if scores.bonafide.size == 0 or scores.attack.size == 0:
        raise ValueError("evaluation set must contain both bonafide and attack samples")
    eer, thr = compute_eer(scores)
    return EvalReport(
        eer=eer,
        eer_threshold=thr,
        bpcer_at_apcer={t: bpcer_at_apcer(scores, t) for t in targets},
        det_points=det_curve(scores),
        n_bonafide=int(scores.bonafide.size),
        n_attack=int(scores.attack.size),
        model_hash=model_hash,
        manifest_hash=manifest_hash,
    )
