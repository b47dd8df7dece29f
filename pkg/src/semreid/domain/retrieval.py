"""Online phase: attribute pre-filtering plus exact Euclidean ranking.

A query binarizes its predicted attribute probabilities with the
calibrated :class:`ThresholdTable`, drops gallery items whose binary
values disagree on the attributes named by a :class:`FilterSpec`, and
ranks the survivors by distance. ``rank-first`` ranks the whole gallery
and removes mismatches afterwards; both orders yield the same list.

Distances are computed once per query over the admissible gallery, so the
two orders compare bit-identical values.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from semreid.errors import OntologyError, RetrievalError

from .dataset import region_slice
from .enums import FilterMode, RankOrder, Region
from .imbalance import apply_thresholds
from .models import (
    DatasetView,
    Descriptor,
    FilterOutcome,
    FilterSpec,
    Ontology,
    QueryResult,
    RankedItem,
    ThresholdTable,
)
from .ontology import attributes_of_region

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Filter specs


def parse_filter_spec(
    text: str,
    *,
    ontology: Ontology | None = None,
    table: ThresholdTable | None = None,
    fallback_on_empty: bool = True,
) -> FilterSpec:
    """Parse ``none | attr:NAME | attrs:N1,N2 | region:R | best:K | best:K@R``.

    ``best:K`` picks the K attributes with the highest calibrated MCC and
    needs both ``ontology`` and ``table``. ``best:K@R`` picks among the
    attributes region R owns.
    """
    kind, _, argument = text.strip().partition(":")
    argument = argument.strip()
    match kind:
        case "none" if not argument:
            return FilterSpec.none()
        case "attr" if argument:
            return FilterSpec.single(argument, fallback_on_empty=fallback_on_empty)
        case "attrs" if argument:
            names = [name.strip() for name in argument.split(",") if name.strip()]
            return FilterSpec.attribute_set(names, fallback_on_empty=fallback_on_empty)
        case "region" if argument:
            return FilterSpec.all_of_region(_parse_region(argument), fallback_on_empty=fallback_on_empty)
        case "best" if argument:
            if ontology is None or table is None:
                raise RetrievalError("malformed-filter", "best:K needs a calibrated threshold table")
            count, _, region_name = argument.partition("@")
            try:
                k = int(count)
            except ValueError as exc:
                raise RetrievalError("malformed-filter", f"'{count}' is not an integer") from exc
            region = _parse_region(region_name.strip()) if region_name else None
            scores = {name: entry.mcc for name, entry in table.entries.items()}
            names = select_best_attributes(scores, k, ontology, region=region)
            if not names:
                raise RetrievalError("malformed-filter", f"region '{region}' owns no attributes")
            return FilterSpec.attribute_set(names, fallback_on_empty=fallback_on_empty)
    raise RetrievalError(
        "malformed-filter",
        f"'{text}' is not none, attr:NAME, attrs:N1,N2, region:R, best:K or best:K@R",
    )


def _parse_region(name: str) -> Region:
    try:
        return Region(name)
    except ValueError as exc:
        raise RetrievalError("unknown-region", f"'{name}' is not a region") from exc


def format_filter_spec(spec: FilterSpec) -> str:
    """Inverse of :func:`parse_filter_spec` for the resolved spec."""

    match spec.mode:
        case FilterMode.NONE:
            return "none"
        case FilterMode.SINGLE:
            return f"attr:{spec.attributes[0]}"
        case FilterMode.ATTRIBUTE_SET:
            return "attrs:" + ",".join(spec.attributes)
        case FilterMode.REGION:
            return f"region:{spec.region}"


def resolve_filter_attributes(spec: FilterSpec, ontology: Ontology) -> tuple[str, ...]:
    """Attribute names a spec compares, validated against the ontology."""

    if spec.mode == FilterMode.NONE:
        return ()
    if spec.mode == FilterMode.REGION:
        if spec.region is None:
            raise RetrievalError("malformed-filter", "region filter without a region")
        try:
            return tuple(attr.name for attr in attributes_of_region(ontology, spec.region))
        except OntologyError as exc:
            raise RetrievalError(exc.code, exc.detail) from exc
    unknown = [name for name in spec.attributes if not ontology.has_attribute(name)]
    if unknown:
        raise RetrievalError("unknown-attribute", f"filter names unknown attributes {unknown}")
    if not spec.attributes:
        raise RetrievalError("malformed-filter", f"{spec.mode} filter names no attributes")
    return spec.attributes


def select_best_attributes(
    scores: Mapping[str, float], k: int, ontology: Ontology, *, region: Region | None = None
) -> tuple[str, ...]:
    """The ``k`` highest-scoring attributes, best first.

    Ties keep ontology order. ``region`` restricts the choice to the
    attributes that region owns.
    """
    if k < 1:
        raise RetrievalError("invalid-k", f"k must be at least 1, got {k}")
    unknown = sorted(name for name in scores if not ontology.has_attribute(name))
    if unknown:
        raise RetrievalError("unknown-attribute", f"scores for unknown attributes {unknown}")
    allowed = (
        ontology.attribute_names
        if region is None
        else tuple(attr.name for attr in attributes_of_region(ontology, region))
    )
    candidates = [name for name in allowed if name in scores]
    candidates.sort(key=lambda name: (-scores[name], ontology.index_of(name)))
    return tuple(candidates[:k])


# ---------------------------------------------------------------------------
# Stages


def attribute_filter(
    query_attrs: np.ndarray,
    gallery_attrs: np.ndarray,
    spec: FilterSpec,
    ontology: Ontology,
) -> FilterOutcome:
    """Keep gallery rows whose binary values equal the query's on every spec attribute.

    ``gallery_attrs`` is the ``(n, M)`` binarized matrix of the gallery.
    With fallback on, an empty survivor set becomes the whole gallery and
    ``removed_count`` is 0.
    """
    gallery_attrs = np.asarray(gallery_attrs)
    size = gallery_attrs.shape[0]
    names = resolve_filter_attributes(spec, ontology)
    if not names:
        return FilterOutcome(tuple(range(size)), 0, False)

    columns = [ontology.index_of(name) for name in names]
    query_values = np.asarray(query_attrs)[columns]
    keep = np.all(gallery_attrs[:, columns] == query_values, axis=1)
    survivors = tuple(int(i) for i in np.flatnonzero(keep))
    if not survivors and size > 0 and spec.fallback_on_empty:
        return FilterOutcome(tuple(range(size)), 0, True)
    return FilterOutcome(survivors, size - len(survivors), False)


def euclidean_distances(query_feature: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Exact distances from one vector to each row of ``features``."""

    query_feature = np.asarray(query_feature, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        return np.zeros(0)
    if features.ndim != 2 or features.shape[1] != query_feature.shape[-1]:
        raise RetrievalError(
            "dimension-mismatch",
            f"query has D={query_feature.shape[-1]}, candidates have shape {features.shape}",
        )
    return np.sqrt(np.sum((features - query_feature) ** 2, axis=1))


def _ordered(
    positions: Sequence[int], distances: np.ndarray, image_ids: Sequence[str]
) -> list[int]:
    return sorted(positions, key=lambda i: (float(distances[i]), image_ids[i]))


def rank_by_distance(query_feature: np.ndarray, candidates: DatasetView) -> tuple[RankedItem, ...]:
    """Candidates by ascending distance, ties by ``image_id``."""

    if len(candidates) == 0:
        return ()
    distances = euclidean_distances(query_feature, candidates.feature_matrix())
    ids = candidates.image_ids
    return tuple(
        RankedItem(ids[i], float(distances[i])) for i in _ordered(range(len(ids)), distances, ids)
    )


def protocol_mask(q: Descriptor, gallery: DatasetView, *, enabled: bool = True) -> DatasetView:
    """Drop gallery items that share both identity and camera with the query."""

    if not enabled:
        return gallery
    return DatasetView(
        tuple(
            d
            for d in gallery
            if not (d.person_id == q.person_id and d.camera_id == q.camera_id)
        )
    )


def query(
    q: Descriptor,
    gallery: DatasetView,
    table: ThresholdTable,
    spec: FilterSpec,
    ontology: Ontology,
    *,
    order: RankOrder = RankOrder.FILTER_FIRST,
    mask: bool = True,
) -> QueryResult:
    """Run one query through the protocol mask, the filter and the ranker."""

    admissible = protocol_mask(q, gallery, enabled=mask)
    ids = admissible.image_ids
    distances = euclidean_distances(q.feature, admissible.feature_matrix())

    if spec.mode == FilterMode.NONE or len(admissible) == 0:
        resolve_filter_attributes(spec, ontology)
        outcome = FilterOutcome(tuple(range(len(admissible))), 0, False)
    else:
        gallery_probs = admissible.prob_matrix()
        if q.attr_probs is None or gallery_probs is None:
            raise RetrievalError(
                "missing-probabilities", "attribute filtering needs attr_probs on query and gallery"
            )
        names = ontology.attribute_names
        query_bits = apply_thresholds(q.attr_probs[None, :], table, names)[0]
        outcome = attribute_filter(
            query_bits, apply_thresholds(gallery_probs, table, names), spec, ontology
        )

    if order == RankOrder.FILTER_FIRST:
        ranked = _ordered(outcome.survivors, distances, ids)
    else:
        keep = set(outcome.survivors)
        ranked = [i for i in _ordered(range(len(ids)), distances, ids) if i in keep]

    return QueryResult(
        query_id=q.image_id,
        ranking=tuple(RankedItem(ids[i], float(distances[i])) for i in ranked),
        removed_count=outcome.removed_count,
        fallback_used=outcome.fallback_used,
    )


def run_queries(
    queries: DatasetView,
    gallery: DatasetView,
    table: ThresholdTable,
    spec: FilterSpec,
    ontology: Ontology,
    *,
    order: RankOrder = RankOrder.FILTER_FIRST,
    mask: bool = True,
    max_workers: int = 1,
) -> tuple[QueryResult, ...]:
    """Answer every query; results keep query order whatever the worker count."""

    def _one(q: Descriptor) -> QueryResult:
        return query(q, gallery, table, spec, ontology, order=order, mask=mask)

    if max_workers <= 1:
        results = tuple(_one(q) for q in queries)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = tuple(pool.map(_one, queries))

    fallbacks = sum(result.fallback_used for result in results)
    removed = sum(result.removed_count for result in results)
    logger.info(
        "answered %d queries (%s, %s): %d gallery items filtered, %d fallbacks",
        len(results),
        order.value,
        spec.mode.value,
        removed,
        fallbacks,
    )
    return results


# ---------------------------------------------------------------------------
# Global + local features


def concat_region_feature(
    embedded: np.ndarray, raw: np.ndarray, region: Region
) -> np.ndarray:
    """Embedding followed by one region slice of the raw descriptor."""

    return np.concatenate([embedded, region_slice(np.asarray(raw), region)], axis=-1)


def with_local_region(embedded: DatasetView, raw: DatasetView, region: Region) -> DatasetView:
    """View whose features are :func:`concat_region_feature` of aligned views."""

    if embedded.image_ids != raw.image_ids:
        raise RetrievalError("misaligned", "embedded and raw views list different images")
    return DatasetView(
        tuple(
            dataclasses.replace(e, feature=concat_region_feature(e.feature, r.feature, region))
            for e, r in zip(embedded, raw, strict=True)
        )
    )
