"""Reference implementation of the composite training objective.

total = w_txt * text_ce + w_mask * (w_bce * bce + w_dice * dice)

Everything runs on plain arrays in double precision with a fixed
(row-major) accumulation order, so values are bit-stable across runs.
Reductions are mean-over-positions (text) and mean-over-pixels (bce);
probabilities are clamped to [1e-7, 1 - 1e-7] and the dice ratio is
smoothed with 1e-6 so every loss stays finite, including the
empty-vs-empty mask case. Analytic gradients ship alongside each loss
and `grad_check` compares them against central differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySequence
from .mask import Mask

PROB_CLAMP = 1e-7
DICE_SMOOTHING = 1e-6


@dataclass(frozen=True)
class LossWeights:
    w_txt: float = 1.0
    w_mask: float = 1.0
    w_bce: float = 2.0
    w_dice: float = 0.5

    def __post_init__(self):
        if min(self.w_txt, self.w_mask, self.w_bce, self.w_dice) < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass(frozen=True, eq=False)
class SoftMask:
    """Predicted per-pixel probabilities, clamped away from {0, 1}."""

    width: int
    height: int
    probs: np.ndarray  # float64, shape (height, width)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.height, self.width):
            raise ValueError(
                f"probs shape {probs.shape} != ({self.height}, {self.width})"
            )
        probs = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """Per-position logits over a vocabulary plus target token indices."""

    logits: np.ndarray  # float64, shape (n_positions, vocab)
    targets: np.ndarray  # int64, shape (n_positions,)

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.int64)
        if logits.ndim != 2:
            raise ValueError("logits must be 2-D (positions x vocab)")
        if targets.shape != (logits.shape[0],):
            raise ValueError("one target index per logits row required")
        if logits.shape[0] and (
            targets.min() < 0 or targets.max() >= logits.shape[1]
        ):
            raise ValueError("target index outside vocabulary")
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "targets", targets)

    @property
    def n_positions(self) -> int:
        return self.logits.shape[0]


def _check_dims(pred: SoftMask, target: Mask) -> None:
    if (pred.width, pred.height) != (target.width, target.height):
        raise DimensionMismatch(
            f"pred {pred.width}x{pred.height} vs target {target.width}x{target.height}"
        )


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def text_loss(dist: TokenDistribution) -> float:
    """Mean autoregressive cross-entropy: -log softmax(logits)[target]."""
    if dist.n_positions == 0:
        raise EmptySequence("text_loss needs at least one position")
    log_probs = _log_softmax(dist.logits)
    picked = log_probs[np.arange(dist.n_positions), dist.targets]
    return float(-picked.mean())


def text_grad(dist: TokenDistribution) -> np.ndarray:
    """d text_loss / d logits = (softmax - onehot) / n_positions."""
    if dist.n_positions == 0:
        raise EmptySequence("text_grad needs at least one position")
    probs = np.exp(_log_softmax(dist.logits))
    probs[np.arange(dist.n_positions), dist.targets] -= 1.0
    return probs / dist.n_positions


def bce_loss(pred: SoftMask, target: Mask) -> float:
    """Mean per-pixel binary cross-entropy on probabilities."""
    _check_dims(pred, target)
    p = pred.probs
    t = target.bits.astype(np.float64)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def bce_grad(pred: SoftMask, target: Mask) -> np.ndarray:
    _check_dims(pred, target)
    p = pred.probs
    t = target.bits.astype(np.float64)
    return (-t / p + (1.0 - t) / (1.0 - p)) / p.size


def dice_loss(pred: SoftMask, target: Mask) -> float:
    """1 - (2*sum(p*t) + s) / (sum(p) + sum(t) + s) with s = 1e-6."""
    _check_dims(pred, target)
    p = pred.probs
    t = target.bits.astype(np.float64)
    num = 2.0 * float((p * t).sum()) + DICE_SMOOTHING
    den = float(p.sum()) + float(t.sum()) + DICE_SMOOTHING
    return 1.0 - num / den


def dice_grad(pred: SoftMask, target: Mask) -> np.ndarray:
    _check_dims(pred, target)
    p = pred.probs
    t = target.bits.astype(np.float64)
    num = 2.0 * float((p * t).sum()) + DICE_SMOOTHING
    den = float(p.sum()) + float(t.sum()) + DICE_SMOOTHING
    return -(2.0 * t * den - num) / (den * den)


def total_loss(
    dist: TokenDistribution,
    pred: SoftMask,
    target: Mask,
    weights: LossWeights = LossWeights(),
) -> tuple[float, dict[str, float]]:
    """Composite objective; returns (total, per-part values for logging)."""
    txt = text_loss(dist)
    bce = bce_loss(pred, target)
    dice = dice_loss(pred, target)
    mask = weights.w_bce * bce + weights.w_dice * dice
    total = weights.w_txt * txt + weights.w_mask * mask
    return total, {"txt": txt, "bce": bce, "dice": dice, "mask": mask}


def grad_check(op: str, point, h: float = 1e-3) -> float:
    """Max relative error between the analytic gradient and central
    differences at `point`.

    `point` is (SoftMask, Mask) for op in {"bce", "dice"} and a
    TokenDistribution for op == "text". Inputs must sit far enough
    inside the clamp bounds that +-h perturbations are not clipped.
    """
    if op in ("bce", "dice"):
        pred, target = point
        loss = bce_loss if op == "bce" else dice_loss
        analytic = bce_grad(pred, target) if op == "bce" else dice_grad(pred, target)
        base = np.array(pred.probs)

        def eval_at(arr: np.ndarray) -> float:
            return loss(SoftMask(pred.width, pred.height, arr), target)

    elif op == "text":
        dist = point
        analytic = text_grad(dist)
        base = np.array(dist.logits)

        def eval_at(arr: np.ndarray) -> float:
            return text_loss(TokenDistribution(arr, dist.targets))

    else:
        raise ValueError(f"unknown op {op!r}")

    worst = 0.0
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        bumped = base.copy()
        bumped[idx] = base[idx] + h
        f_plus = eval_at(bumped)
        bumped[idx] = base[idx] - h
        f_minus = eval_at(bumped)
        fd = (f_plus - f_minus) / (2.0 * h)
        a = float(analytic[idx])
        denom = max(abs(a), abs(fd), 1e-8)
        worst = max(worst, abs(a - fd) / denom)
    return worst
