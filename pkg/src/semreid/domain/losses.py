"""Triplet and averaged binary cross-entropy losses with analytic gradients.

Triplet loss on squared Euclidean distances::

    L = max(0, |a - p|^2 - |a - n|^2 + m)

Averaged BCE over M binary attributes, probabilities clamped to
``[eps, 1 - eps]`` before the logs::

    L = -(1/M) * sum_j [y_j log p_j + (1 - y_j) log(1 - p_j)]
"""

from __future__ import annotations

import numpy as np

from semreid.errors import ModelError

from .models import TripletBatch, TripletGradients
from .pipeline_config import BCE_EPSILON


def _check_triplet(batch: TripletBatch) -> None:
    shapes = {batch.anchor.shape, batch.positive.shape, batch.negative.shape}
    if len(shapes) != 1:
        raise ModelError(
            "dimension-mismatch",
            f"anchor/positive/negative shapes differ: {sorted(shapes)}",
        )
    if batch.margin <= 0:
        raise ModelError("invalid-margin", f"margin must be positive, got {batch.margin}")


def triplet_margin_term(batch: TripletBatch) -> float:
    """The hinge argument ``|a-p|^2 - |a-n|^2 + m``."""

    _check_triplet(batch)
    pos = float(np.sum((batch.anchor - batch.positive) ** 2))
    neg = float(np.sum((batch.anchor - batch.negative) ** 2))
    return pos - neg + batch.margin


def triplet_loss(batch: TripletBatch) -> float:
    return max(0.0, triplet_margin_term(batch))


def triplet_grad(batch: TripletBatch) -> TripletGradients:
    """Gradients w.r.t. anchor, positive and negative.

    All zero when the hinge is inactive (argument <= 0).
    """
    if triplet_margin_term(batch) <= 0.0:
        zeros = np.zeros_like(batch.anchor, dtype=np.float64)
        return TripletGradients(zeros, zeros.copy(), zeros.copy())
    a, p, n = batch.anchor, batch.positive, batch.negative
    return TripletGradients(
        anchor=2.0 * (n - p),
        positive=-2.0 * (a - p),
        negative=2.0 * (a - n),
    )


def batch_triplet_loss(
    anchors: np.ndarray, positives: np.ndarray, negatives: np.ndarray, margin: float
) -> tuple[float, np.ndarray]:
    """Mean triplet loss over rows and the per-row active mask."""

    terms = (
        np.sum((anchors - positives) ** 2, axis=1)
        - np.sum((anchors - negatives) ** 2, axis=1)
        + margin
    )
    active = terms > 0.0
    if terms.size == 0:
        return 0.0, active
    return float(np.mean(np.where(active, terms, 0.0))), active


def _clamp(probs: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(probs, eps, 1.0 - eps)


def _check_bce(probs: np.ndarray, labels: np.ndarray) -> None:
    if probs.shape != labels.shape:
        raise ModelError(
            "length-mismatch", f"probs {probs.shape} and labels {labels.shape} differ"
        )
    if probs.size == 0:
        raise ModelError("length-mismatch", "averaged BCE needs at least one attribute")


def avg_bce_loss(probs: np.ndarray, labels: np.ndarray, *, eps: float = BCE_EPSILON) -> float:
    """Averaged binary cross-entropy over all entries of ``probs``."""

    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_bce(probs, labels)
    clamped = _clamp(probs, eps)
    terms = labels * np.log(clamped) + (1.0 - labels) * np.log(1.0 - clamped)
    return float(-np.mean(terms))


def avg_bce_grad(probs: np.ndarray, labels: np.ndarray, *, eps: float = BCE_EPSILON) -> np.ndarray:
    """Gradient of :func:`avg_bce_loss` w.r.t. the (clamped) probabilities."""

    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_bce(probs, labels)
    clamped = _clamp(probs, eps)
    return -(labels / clamped - (1.0 - labels) / (1.0 - clamped)) / probs.size


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""

    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_group_loss_and_grad(
    inputs: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    biases: np.ndarray,
    *,
    eps: float = BCE_EPSILON,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Averaged BCE of a group of logistic heads and its (w, b) gradient.

    ``inputs`` is ``(n, s)``, ``labels`` ``(n, k)``, ``weights`` ``(k, s)``,
    ``biases`` ``(k,)``. The loss averages over all ``n * k`` entries; the
    gradient is exact wherever the probability clamp is inactive.
    """
    probs = sigmoid(inputs @ weights.T + biases)
    loss = avg_bce_loss(probs, labels, eps=eps)
    residual = (probs - labels) / labels.size
    return loss, residual.T @ inputs, residual.sum(axis=0)
