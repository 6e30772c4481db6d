"""Training losses: supervised cross-entropy and the negative-label loss.

Both losses take softmax probabilities and return the scalar value together
with the exact gradient with respect to the *logits* (the softmax Jacobian
is folded in analytically), so callers chain them straight into backprop.

The negative-label loss for one sample is

    -sum_i c_i * log(1 - p_i)

over the 0/1 mask c marking "does not belong" categories: it pushes the
predicted probability of every marked category toward zero. Multiple marked
categories are summed, the batch is averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

# Floor inside every log argument. log(1 - p) is singular at p = 1, so both
# the loss and the gradient denominator clamp at EPS.
EPS = 1e-12


@dataclass
class LossResult:
    value: float
    grad_logits: np.ndarray


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Integer labels (B,) to a one-hot float matrix (B, n_classes)."""
    labels = np.asarray(labels)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _check_probs(probs: np.ndarray, other: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"probs must be 2-d (B, K), got shape {probs.shape}")
    if other.shape != probs.shape:
        raise ShapeError(
            f"{name} shape {other.shape} does not match probs shape {probs.shape}"
        )
    return probs, other


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> LossResult:
    """Mean one-hot cross-entropy; gradient w.r.t. logits is (p - y)/B."""
    probs, labels = _check_probs(probs, labels, "labels")
    batch = probs.shape[0]
    value = float(-(labels * np.log(np.maximum(probs, EPS))).sum() / batch) + 0.0
    grad = (probs - labels) / batch
    return LossResult(value, grad)


def negative_loss(probs: np.ndarray, neg_mask: np.ndarray) -> LossResult:
    """Mean negative-label loss with its exact logit gradient.

    For sample b with mask c and probabilities p = softmax(z):
        L_b = -sum_i c_i log(1 - p_i)
        dL_b/dz_j = p_j * (c_j / (1 - p_j) - sum_i c_i p_i / (1 - p_i))
    """
    probs, neg_mask = _check_probs(probs, neg_mask, "neg_mask")
    batch = probs.shape[0]
    denom = np.maximum(1.0 - probs, EPS)
    value = float(-(neg_mask * np.log(denom)).sum() / batch) + 0.0
    rate = neg_mask / denom
    grad = probs * (rate - (probs * rate).sum(axis=1, keepdims=True)) / batch
    return LossResult(value, grad)
