"""Training objectives for the dual-identity-vector classifier.

The classification loss is binary cross-entropy on the fused bonafide
score.  The distillation loss has two label-gated branches: for bonafide
samples, the student vector most aligned with the teacher code is pushed
to score 1 (the other to 0) while its cosine similarity to the teacher
code is maximized; for attacks, the angle between the two student vectors
is matched to the angle between the teacher codes of the morph's two
source images.  The joint objective is the unweighted sum of both, with
an optional distillation weight exposed for ablations.

All functions are pure and operate on torch tensors of any floating
dtype, so they are directly usable both inside the training graph and in
double-precision finite-difference checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

BCE_EPS = 1e-7
COSINE_EPS = 1e-8
_STRICT_NORM_FLOOR = 1e-12


def _as_vector(x, name: str) -> torch.Tensor:
    t = torch.as_tensor(x)
    if t.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {tuple(t.shape)}")
    return t


def _as_scalar(x) -> torch.Tensor:
    # bare python/numpy scalars are promoted to double so spec-exact values
    # are not truncated by torch's float32 default
    if torch.is_tensor(x):
        return x
    return torch.tensor(float(x), dtype=torch.float64)


def cosine_similarity(a, b, strict: bool = False) -> torch.Tensor:
    """Cosine of the angle between two vectors, in [-1, 1].

    ``strict=True`` raises on (near-)zero-norm inputs and divides by the
    exact norms; the default training mode instead adds a small epsilon to
    each norm so gradients stay finite near the origin.
    """
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape[0]} vs {b.shape[0]}")
    common = torch.promote_types(a.dtype, b.dtype)
    a, b = a.to(common), b.to(common)
    na = torch.linalg.vector_norm(a)
    nb = torch.linalg.vector_norm(b)
    if strict:
        if na.detach().item() < _STRICT_NORM_FLOOR or nb.detach().item() < _STRICT_NORM_FLOOR:
            raise ValueError("cosine_similarity undefined for zero-norm vector")
        return torch.dot(a, b) / (na * nb)
    return torch.dot(a, b) / ((na + COSINE_EPS) * (nb + COSINE_EPS))


def bce_loss(y, y_hat) -> torch.Tensor:
    """Binary cross-entropy of the fused bonafide score against y in {0, 1}.

    The prediction is clamped into [eps, 1-eps] before the logs.
    """
    y = _as_scalar(y)
    y_hat = _as_scalar(y_hat)
    p = torch.clamp(y_hat, BCE_EPS, 1.0 - BCE_EPS)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))


@dataclass
class KDContext:
    """Per-sample bundle the distillation terms consume.

    A bonafide sample (y=1) carries the teacher code ``u`` of its own
    image; an attack sample (y=0) carries the teacher codes ``u_1``/``u_2``
    of the two source images that were blended into the morph.
    """

    v_1: torch.Tensor
    v_2: torch.Tensor
    id_1: torch.Tensor
    id_2: torch.Tensor
    y: float
    u: torch.Tensor | None = None
    u_1: torch.Tensor | None = None
    u_2: torch.Tensor | None = None

    def __post_init__(self) -> None:
        self.v_1 = _as_vector(self.v_1, "v_1")
        self.v_2 = _as_vector(self.v_2, "v_2")
        self.id_1 = _as_scalar(self.id_1)
        self.id_2 = _as_scalar(self.id_2)
        for name in ("id_1", "id_2"):
            val = getattr(self, name).detach().item()
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")
        if self.y not in (0.0, 1.0):
            raise ValueError(f"y must be 0 or 1, got {self.y}")
        if self.y == 1.0:
            if self.u is None or self.u_1 is not None or self.u_2 is not None:
                raise ValueError("bonafide context requires u and forbids u_1/u_2")
        else:
            if self.u_1 is None or self.u_2 is None or self.u is not None:
                raise ValueError("attack context requires u_1 and u_2 and forbids u")


def selected_vector(ctx: KDContext, strict: bool = False) -> int:
    """Index (1 or 2) of the student vector treated as identity-bearing.

    The vector with the higher cosine similarity to the teacher code wins;
    exact ties resolve to vector 1 for reproducibility.
    """
    if ctx.u is None:
        raise ValueError("vector selection needs a bonafide context with u")
    s1 = cosine_similarity(ctx.v_1, ctx.u, strict=strict)
    s2 = cosine_similarity(ctx.v_2, ctx.u, strict=strict)
    return 1 if s1.detach().item() >= s2.detach().item() else 2


def kd_bonafide(ctx: KDContext, strict: bool = False) -> torch.Tensor:
    """Bonafide distillation term, range [-1, 3].

    With the selected vector v and its score id, the value is
    ``(1 - id)^2 + (other id)^2 - cos(v, u)``.
    """
    if ctx.u is None:
        raise ValueError("kd_bonafide requires the teacher code u")
    if selected_vector(ctx, strict=strict) == 1:
        return (1.0 - ctx.id_1) ** 2 + ctx.id_2**2 - cosine_similarity(ctx.v_1, ctx.u, strict=strict)
    return (1.0 - ctx.id_2) ** 2 + ctx.id_1**2 - cosine_similarity(ctx.v_2, ctx.u, strict=strict)


def kd_attack(ctx: KDContext, strict: bool = False) -> torch.Tensor:
    """Attack distillation term: squared gap between the teacher-code angle
    and the student-vector angle, range [0, 4]."""
    if ctx.u_1 is None or ctx.u_2 is None:
        raise ValueError("kd_attack requires the teacher codes u_1 and u_2")
    s_teacher = cosine_similarity(ctx.u_1, ctx.u_2, strict=strict)
    s_student = cosine_similarity(ctx.v_1, ctx.v_2, strict=strict)
    return (s_teacher - s_student) ** 2


def gating_branch(ctx: KDContext) -> str:
    """Which branch the label gate routes this sample to."""
    return "bonafide" if ctx.y == 1.0 else "attack"


def kd_loss(ctx: KDContext, strict: bool = False) -> torch.Tensor:
    """Label-gated distillation loss: the bonafide term when y=1, the
    attack term when y=0."""
    if ctx.y == 1.0:
        return kd_bonafide(ctx, strict=strict)
    return kd_attack(ctx, strict=strict)


def joint_loss(ctx: KDContext, y_hat, kd_weight: float = 1.0, strict: bool = False) -> torch.Tensor:
    """Classification plus distillation; the literal sum has weight 1."""
    return bce_loss(ctx.y, y_hat) + kd_weight * kd_loss(ctx, strict=strict)
