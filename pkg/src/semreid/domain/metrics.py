"""Retrieval (CMC, mAP) and attribute (F1) evaluation.

Single-query protocol: each query image is scored on its own ranking.
Relevance is "same person_id"; the AP denominator counts every relevant
gallery item that survives the protocol mask, so a filter that drops a
true match is penalized.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence

import numpy as np

from semreid.errors import MetricError

from .models import DatasetView, EvalReport, QueryResult
from .retrieval import protocol_mask

logger = logging.getLogger(__name__)

DEFAULT_KS: tuple[int, ...] = (1, 5, 10)


def average_precision(ranked_relevance: Sequence[int], total_relevant: int) -> float:
    """``(1/R) * sum_k precision@k * rel(k)``."""

    if total_relevant <= 0:
        raise MetricError("no-relevant", f"total_relevant must be positive, got {total_relevant}")
    relevance = np.asarray(ranked_relevance, dtype=bool)
    hits = int(relevance.sum())
    if hits > total_relevant:
        raise MetricError(
            "relevance-count", f"{hits} relevant items ranked but total_relevant is {total_relevant}"
        )
    if hits == 0:
        return 0.0
    ranks = np.flatnonzero(relevance) + 1
    precision = np.arange(1, hits + 1) / ranks
    return float(precision.sum() / total_relevant)


def cmc_at_k(rankings: Sequence[Sequence[int]], k: int) -> float:
    """Fraction of queries with a relevant item among the first ``k``."""

    if k < 1:
        raise MetricError("invalid-k", f"k must be at least 1, got {k}")
    if not rankings:
        raise MetricError("no-queries", "CMC needs at least one ranking")
    hits = sum(1 for relevance in rankings if any(relevance[:k]))
    return hits / len(rankings)


def f1(binary_preds: Sequence[int] | np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    preds = np.asarray(binary_preds).astype(bool)
    truth = np.asarray(labels).astype(bool)
    if preds.shape != truth.shape:
        raise MetricError("length-mismatch", f"preds {preds.shape} vs labels {truth.shape}")
    tp = int(np.sum(preds & truth))
    fp = int(np.sum(preds & ~truth))
    fn = int(np.sum(~preds & truth))
    denominator = 2 * tp + fp + fn
    return 0.0 if denominator == 0 else 2 * tp / denominator


def evaluate_retrieval(
    results: Sequence[QueryResult],
    queries: DatasetView,
    gallery: DatasetView,
    *,
    mask: bool = True,
    ks: Sequence[int] = DEFAULT_KS,
) -> EvalReport:
    """mAP and CMC of a batch of rankings.

    Queries with no admissible relevant gallery item are skipped, counted
    in ``skipped_queries`` and logged.
    """
    for k in ks:
        if k < 1:
            raise MetricError("invalid-k", f"k must be at least 1, got {k}")
    query_by_id = {q.image_id: q for q in queries}
    identity_of = {g.image_id: g.person_id for g in gallery}

    relevance_lists: list[list[int]] = []
    precisions: list[float] = []
    skipped = 0
    for result in results:
        q = query_by_id.get(result.query_id)
        if q is None:
            raise MetricError("unknown-query", f"'{result.query_id}' is not a query image")
        admissible = protocol_mask(q, gallery, enabled=mask)
        total = sum(1 for g in admissible if g.person_id == q.person_id)
        if total == 0:
            skipped += 1
            logger.warning("query %s has no admissible match in the gallery; skipped", q.image_id)
            continue
        relevance = [int(identity_of.get(image_id, -1) == q.person_id) for image_id in result.ranked_ids]
        relevance_lists.append(relevance)
        precisions.append(average_precision(relevance, total))

    if not relevance_lists:
        logger.warning("no query could be evaluated (%d skipped)", skipped)
        return EvalReport(cmc={k: 0.0 for k in ks}, skipped_queries=skipped)

    report = EvalReport(
        cmc={k: cmc_at_k(relevance_lists, k) for k in sorted(ks)},
        map_score=float(np.mean(precisions)),
        num_queries=len(relevance_lists),
        skipped_queries=skipped,
    )
    logger.info(
        "retrieval: %d queries, mAP %.4f, %s",
        report.num_queries,
        report.map_score,
        ", ".join(f"top-{k} {v:.4f}" for k, v in report.cmc.items()),
    )
    return report


def evaluate_attributes(
    binary: np.ndarray, labels: np.ndarray, names: Sequence[str]
) -> EvalReport:
    """Per-attribute F1 of an ``(n, M)`` binary prediction matrix."""

    binary = np.asarray(binary)
    labels = np.asarray(labels)
    if binary.shape != labels.shape or binary.ndim != 2 or binary.shape[1] != len(names):
        raise MetricError(
            "length-mismatch", f"preds {binary.shape}, labels {labels.shape}, {len(names)} names"
        )
    per_attr = {name: f1(binary[:, j], labels[:, j]) for j, name in enumerate(names)}
    avg = float(np.mean(list(per_attr.values()))) if per_attr else 0.0
    logger.info("attributes: average F1 %.4f over %d attributes", avg, len(per_attr))
    return EvalReport(per_attr_f1=per_attr, avg_f1=avg)


def merge_reports(retrieval: EvalReport, attributes: EvalReport) -> EvalReport:
    """Retrieval scores of the first report with the F1 part of the second."""

    return dataclasses.replace(
        retrieval, per_attr_f1=dict(attributes.per_attr_f1), avg_f1=attributes.avg_f1
    )
