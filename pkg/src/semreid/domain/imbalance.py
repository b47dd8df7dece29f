"""Imbalanced data solver: MCC-maximizing per-attribute thresholds.

Instead of binarizing every attribute at 0.5, each attribute gets the grid
threshold whose binarization maximizes the Matthews correlation
coefficient against the calibration labels. Ties go to the smallest
threshold, which favors recall on rare positives.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence

import numpy as np

from semreid.errors import CalibrationError

from .models import ConfusionCounts, ThresholdEntry, ThresholdTable
from .pipeline_config import DEFAULT_GRID

logger = logging.getLogger(__name__)


def confusion_counts(preds: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    preds = np.asarray(preds).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if preds.shape != labels.shape:
        raise CalibrationError("misaligned", f"preds {preds.shape} vs labels {labels.shape}")
    return ConfusionCounts(
        tp=int(np.sum(preds & labels)),
        tn=int(np.sum(~preds & ~labels)),
        fp=int(np.sum(preds & ~labels)),
        fn=int(np.sum(~preds & labels)),
    )


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""

    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    denominator = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denominator == 0:
        return 0.0
    value = (tp * tn - fp * fn) / math.sqrt(denominator)
    return max(-1.0, min(1.0, value))


def binarize(probs: np.ndarray, threshold: float) -> np.ndarray:
    """1 where ``probs >= threshold`` (inclusive), else 0."""

    if not 0.0 < threshold < 1.0:
        raise CalibrationError("threshold-range", f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(probs, dtype=np.float64) >= threshold).astype(np.int8)


def _validate_grid(grid: Sequence[float]) -> np.ndarray:
    if len(grid) == 0:
        raise CalibrationError("empty-grid", "the candidate threshold grid is empty")
    values = np.array(sorted(set(float(t) for t in grid)), dtype=np.float64)
    if values[0] <= 0.0 or values[-1] >= 1.0:
        raise CalibrationError("threshold-range", "grid thresholds must lie in (0, 1)")
    return values


def calibrate_attribute(
    probs: np.ndarray, labels: np.ndarray, grid: Sequence[float] = DEFAULT_GRID
) -> ThresholdEntry:
    """Best (threshold, MCC) for one attribute over ``grid``."""

    values = _validate_grid(grid)
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if probs.shape != labels.shape or probs.ndim != 1:
        raise CalibrationError("misaligned", f"probs {probs.shape} vs labels {labels.shape}")

    preds = probs[:, None] >= values[None, :]
    positives = labels[:, None]
    tp = np.sum(preds & positives, axis=0)
    fp = np.sum(preds & ~positives, axis=0)
    fn = np.sum(~preds & positives, axis=0)
    tn = np.sum(~preds & ~positives, axis=0)

    best = ThresholdEntry(threshold=float(values[0]), mcc=-math.inf)
    for g, threshold in enumerate(values):
        score = mcc(ConfusionCounts(int(tp[g]), int(tn[g]), int(fp[g]), int(fn[g])))
        if score > best.mcc:
            best = ThresholdEntry(threshold=float(threshold), mcc=score)
    return best


def calibrate(
    probs_per_attr: Mapping[str, np.ndarray],
    labels_per_attr: Mapping[str, np.ndarray],
    grid: Sequence[float] = DEFAULT_GRID,
    *,
    ontology_checksum: str = "",
) -> ThresholdTable:
    """Per-attribute grid search; keys of ``probs_per_attr`` fix the order."""

    missing = [name for name in probs_per_attr if name not in labels_per_attr]
    if missing:
        raise CalibrationError("misaligned", f"no labels for attributes {missing}")
    values = _validate_grid(grid)
    entries = {
        name: calibrate_attribute(probs, labels_per_attr[name], values)
        for name, probs in probs_per_attr.items()
    }
    logger.info("calibrated %d attribute thresholds over a %d-value grid", len(entries), values.size)
    return ThresholdTable(
        entries=entries, grid=tuple(float(t) for t in values), ontology_checksum=ontology_checksum
    )


def calibrate_matrix(
    probs: np.ndarray,
    labels: np.ndarray,
    names: Sequence[str],
    grid: Sequence[float] = DEFAULT_GRID,
    *,
    ontology_checksum: str = "",
) -> ThresholdTable:
    """:func:`calibrate` on ``(n, M)`` matrices whose columns follow ``names``."""

    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape or probs.ndim != 2 or probs.shape[1] != len(names):
        raise CalibrationError(
            "misaligned", f"probs {probs.shape}, labels {labels.shape}, {len(names)} names"
        )
    return calibrate(
        {name: probs[:, j] for j, name in enumerate(names)},
        {name: labels[:, j] for j, name in enumerate(names)},
        grid,
        ontology_checksum=ontology_checksum,
    )


def uniform_thresholds(
    names: Sequence[str], threshold: float = 0.5, *, ontology_checksum: str = ""
) -> ThresholdTable:
    """Same threshold for every attribute (MCC unknown, recorded as 0)."""

    if not 0.0 < threshold < 1.0:
        raise CalibrationError("threshold-range", f"threshold must lie in (0, 1), got {threshold}")
    return ThresholdTable(
        entries={name: ThresholdEntry(threshold, 0.0) for name in names},
        grid=(threshold,),
        ontology_checksum=ontology_checksum,
    )


def apply_thresholds(probs: np.ndarray, table: ThresholdTable, names: Sequence[str]) -> np.ndarray:
    """Binarize an ``(n, M)`` matrix column-wise with the table's thresholds."""

    missing = [name for name in names if name not in table.entries]
    if missing:
        raise CalibrationError("misaligned", f"threshold table lacks {missing}")
    thresholds = table.threshold_vector(tuple(names))
    return (np.asarray(probs, dtype=np.float64) >= thresholds).astype(np.int8)
