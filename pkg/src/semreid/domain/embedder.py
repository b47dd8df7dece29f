"""Linear siamese embedder trained with the triplet loss.

One weight matrix is shared by the anchor, positive and negative branches.
Training samples a fixed triplet set once (uniformly, seeded) and runs
full-batch gradient descent with backtracking: an update that would raise
the mean loss is rejected and the step halved, so ``loss_history`` never
increases.
"""

from __future__ import annotations

import logging

import numpy as np

from semreid.errors import ModelError
from semreid.utils.rng import make_rng

from .dataset import with_features
from .losses import batch_triplet_loss
from .models import Dataset, DatasetView, LinearEmbedder
from .pipeline_config import EmbedderConfig

logger = logging.getLogger(__name__)


def sample_triplets(train: DatasetView, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` (anchor, positive, negative) index rows from ``train``.

    Raises:
        ModelError: ``no-negatives`` with fewer than two identities,
            ``no-positives`` when no identity has two images.
    """
    person_ids = train.person_ids()
    identities = np.unique(person_ids)
    if identities.size < 2:
        raise ModelError(
            "no-negatives", f"triplets need at least 2 identities, found {identities.size}"
        )
    members = {int(pid): np.flatnonzero(person_ids == pid) for pid in identities}
    anchors = [pid for pid, idx in members.items() if idx.size >= 2]
    if not anchors:
        raise ModelError("no-positives", "no identity has two images to form a positive pair")

    rows = np.empty((count, 3), dtype=np.int64)
    for t in range(count):
        pid = anchors[int(rng.integers(len(anchors)))]
        anchor, positive = rng.choice(members[pid], size=2, replace=False)
        others = identities[identities != pid]
        negative_pid = int(others[int(rng.integers(others.size))])
        negative = rng.choice(members[negative_pid])
        rows[t] = (anchor, positive, negative)
    return rows


def _loss_and_grad(
    weights: np.ndarray, xa: np.ndarray, xp: np.ndarray, xn: np.ndarray, margin: float
) -> tuple[float, np.ndarray]:
    ea, ep, en = xa @ weights, xp @ weights, xn @ weights
    loss, active = batch_triplet_loss(ea, ep, en, margin)
    if not active.any():
        return loss, np.zeros_like(weights)
    scale = active[:, None] / active.size
    ga = 2.0 * (en - ep) * scale
    gp = -2.0 * (ea - ep) * scale
    gn = 2.0 * (ea - en) * scale
    return loss, xa.T @ ga + xp.T @ gp + xn.T @ gn


def train_embedder(
    train: DatasetView,
    config: EmbedderConfig,
    *,
    seed: int,
    initial_weights: np.ndarray | None = None,
    triplets: np.ndarray | None = None,
) -> LinearEmbedder:
    """Fit the shared linear map by gradient descent on the mean triplet loss."""

    if len(train) == 0:
        raise ModelError("empty-train", "the training view has no descriptors")
    features = train.feature_matrix()
    if triplets is None:
        triplets = sample_triplets(train, config.num_triplets, make_rng(seed, "embedder:triplets"))

    in_dim = features.shape[1]
    out_dim = config.embed_dim or in_dim
    if initial_weights is None:
        weights = np.eye(in_dim, out_dim)
    else:
        weights = np.array(initial_weights, dtype=np.float64)
        if weights.shape != (in_dim, out_dim):
            raise ModelError(
                "dimension-mismatch",
                f"initial weights {weights.shape}, expected {(in_dim, out_dim)}",
            )

    xa, xp, xn = (features[triplets[:, i]] for i in range(3))
    loss, grad = _loss_and_grad(weights, xa, xp, xn, config.margin)
    history = [loss]
    step = config.step_size

    for _epoch in range(config.max_epochs):
        if loss == 0.0:
            break
        accepted = False
        while step >= config.min_step:
            candidate = weights - step * grad
            candidate_loss, candidate_grad = _loss_and_grad(candidate, xa, xp, xn, config.margin)
            if candidate_loss <= loss:
                weights, loss, grad = candidate, candidate_loss, candidate_grad
                accepted = True
                break
            step /= 2.0
        if not accepted:
            break
        history.append(loss)

    logger.info(
        "embedder trained: %d triplets, loss %.6f -> %.6f over %d epochs",
        len(triplets),
        history[0],
        history[-1],
        len(history) - 1,
    )
    return LinearEmbedder(
        weights=weights,
        step_size=config.step_size,
        max_epochs=config.max_epochs,
        margin=config.margin,
        loss_history=tuple(history),
    )


def triplet_accuracy(embedder: LinearEmbedder, features: np.ndarray, triplets: np.ndarray) -> float:
    """Fraction of triplets whose positive is strictly closer than the negative."""

    if triplets.size == 0:
        return 1.0
    embedded = embedder.embed(features)
    ea, ep, en = (embedded[triplets[:, i]] for i in range(3))
    closer = np.sum((ea - ep) ** 2, axis=1) < np.sum((ea - en) ** 2, axis=1)
    return float(np.mean(closer))


def all_triplets(train: DatasetView) -> np.ndarray:
    """Every valid (anchor, positive, negative) index row of ``train``."""

    person_ids = train.person_ids()
    rows = [
        (a, p, n)
        for a in range(len(person_ids))
        for p in range(len(person_ids))
        if a != p and person_ids[a] == person_ids[p]
        for n in range(len(person_ids))
        if person_ids[n] != person_ids[a]
    ]
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def embed_dataset(dataset: Dataset, embedder: LinearEmbedder) -> Dataset:
    """Replace every descriptor feature by its embedding."""

    if dataset.dim != embedder.input_dim:
        raise ModelError(
            "dimension-mismatch",
            f"embedder expects D={embedder.input_dim}, dataset has D={dataset.dim}",
        )
    return with_features(dataset, embedder.embed(dataset.view().feature_matrix()))
