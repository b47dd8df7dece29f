"""Region-local attribute classifiers driven by the ontology.

Each region with attributes gets one group of logistic heads. All heads in
a group read the same region slice of the descriptor (inner-group sharing)
and no head reads outside it (inter-group separation). The global
baseline instead fits every attribute on the whole descriptor.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from semreid.errors import ModelError

from .dataset import region_bounds
from .enums import AttributeScope, Region
from .losses import logistic_group_loss_and_grad, sigmoid
from .models import DatasetView, Descriptor, Ontology, RegionClassifierGroup
from .ontology import attributes_of_region, region_groups
from .pipeline_config import DEFAULT_PIPELINE, ClassifierConfig

logger = logging.getLogger(__name__)


def group_inputs(features: np.ndarray, region: Region | None) -> np.ndarray:
    """Columns of ``features`` a group with this region reads."""

    if region is None:
        return features
    start, stop = region_bounds(features.shape[-1], region)
    return features[..., start:stop]


def train_region_group(
    train: DatasetView,
    region: Region,
    ontology: Ontology,
    config: ClassifierConfig = DEFAULT_PIPELINE.classifier,
) -> RegionClassifierGroup:
    """Fit the logistic heads of every attribute owned by ``region``."""

    names = tuple(attr.name for attr in attributes_of_region(ontology, region))
    if not names:
        raise ModelError("empty-group", f"region '{region}' owns no attributes")
    return _fit_group(train, names, AttributeScope.LOCAL, region, ontology, config)


def train_global_classifier(
    train: DatasetView, ontology: Ontology, config: ClassifierConfig = DEFAULT_PIPELINE.classifier
) -> RegionClassifierGroup:
    """Baseline: one group predicting every attribute from the whole descriptor."""

    if len(ontology) == 0:
        raise ModelError("empty-group", "the ontology has no attributes")
    return _fit_group(train, ontology.attribute_names, AttributeScope.GLOBAL, None, ontology, config)


def train_attribute_groups(
    train: DatasetView,
    ontology: Ontology,
    config: ClassifierConfig = DEFAULT_PIPELINE.classifier,
    *,
    max_workers: int = 1,
) -> tuple[RegionClassifierGroup, ...]:
    """One local group per region that owns attributes, in ontology order.

    Groups share no state, so they train on a thread pool when
    ``max_workers > 1``.
    """
    regions = list(region_groups(ontology))
    if max_workers <= 1:
        return tuple(train_region_group(train, r, ontology, config) for r in regions)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return tuple(pool.map(lambda r: train_region_group(train, r, ontology, config), regions))


def _fit_group(
    train: DatasetView,
    names: tuple[str, ...],
    scope: AttributeScope,
    region: Region | None,
    ontology: Ontology,
    config: ClassifierConfig,
) -> RegionClassifierGroup:
    labels = train.label_matrix()
    if labels is None:
        raise ModelError("missing-labels", "every training descriptor needs attr_labels")
    columns = [ontology.index_of(name) for name in names]
    targets = labels[:, columns].astype(np.float64)
    inputs = group_inputs(train.feature_matrix(), region)

    weights = np.zeros((len(names), inputs.shape[1]))
    biases = np.zeros(len(names))
    # The group loss averages over heads; scaling by the head count keeps the
    # per-head step independent of group size.
    rate = config.step_size * len(names)
    loss = float("nan")
    for _epoch in range(config.max_epochs):
        loss, grad_w, grad_b = logistic_group_loss_and_grad(
            inputs, targets, weights, biases, eps=config.epsilon
        )
        weights -= rate * grad_w
        biases -= rate * grad_b

    degenerate = tuple(
        name for j, name in enumerate(names) if np.all(targets[:, j] == targets[0, j])
    )
    for name in degenerate:
        logger.warning("attribute %r has constant training labels; model flagged degenerate", name)
    logger.info(
        "trained %s group %s (%d attributes), final avg BCE %.6f",
        scope.value,
        region.value if region is not None else "all",
        len(names),
        loss,
    )
    return RegionClassifierGroup(
        scope=scope,
        region=region,
        attributes=names,
        weights=weights,
        biases=biases,
        degenerate=degenerate,
    )


def check_coverage(groups: Sequence[RegionClassifierGroup], ontology: Ontology) -> None:
    """Every ontology attribute must be predicted by exactly one group."""

    counts = Counter(name for group in groups for name in group.attributes)
    unknown = sorted(name for name in counts if not ontology.has_attribute(name))
    if unknown:
        raise ModelError("unknown-attribute", f"groups predict unknown attributes {unknown}")
    overlap = sorted(name for name, n in counts.items() if n > 1)
    if overlap:
        raise ModelError("coverage-overlap", f"attributes predicted more than once: {overlap}")
    gap = [name for name in ontology.attribute_names if name not in counts]
    if gap:
        raise ModelError("coverage-gap", f"attributes without a model: {gap}")


def predict_matrix(
    groups: Sequence[RegionClassifierGroup], features: np.ndarray, ontology: Ontology
) -> np.ndarray:
    """Attribute probabilities for each row of ``features`` in canonical order."""

    check_coverage(groups, ontology)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    probs = np.empty((features.shape[0], len(ontology)))
    for group in groups:
        columns = [ontology.index_of(name) for name in group.attributes]
        probs[:, columns] = sigmoid(group_inputs(features, group.region) @ group.weights.T + group.biases)
    return probs


def predict_attr_probs(
    groups: Sequence[RegionClassifierGroup], descriptor: Descriptor, ontology: Ontology
) -> np.ndarray:
    """Probability vector of one descriptor; each attribute reads only its region."""

    return predict_matrix(groups, descriptor.feature[None, :], ontology)[0]
