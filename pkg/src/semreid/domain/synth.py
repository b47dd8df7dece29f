"""Seeded synthetic Re-ID datasets.

Each identity gets a centroid in R^D and a binary attribute vector. Every
attribute owns one coordinate inside its region's slice of the centroid,
set to ``+attr_signal`` or ``-attr_signal`` by the label; all other
coordinates are independent Gaussian noise, so an attribute carries no
signal outside its region. Images are noisy copies of the centroid with
simulated classifier outputs (flipped, shrunk toward the base rate,
jittered) as ``attr_probs``.

Train identities are disjoint from test identities. Image ``j`` of
identity ``i`` is shot by camera ``(i + j) % camera_count``; for a test
identity image 0 is the query and the rest form its cross-camera gallery.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from semreid.errors import SynthConfigError
from semreid.utils.rng import make_rng

from .dataset import build_dataset, region_bounds
from .enums import STRIPE_ORDER, Region, Split
from .models import Dataset, Descriptor, Ontology
from .ontology import bundled_ontology

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SynthConfig:
    seed: int = 1501
    num_identities: int = 40
    images_per_identity: int = 4
    dim: int = 64
    ontology: Ontology = field(default_factory=bundled_ontology)
    feature_noise_sigma: float = 0.3
    attr_flip_rate: float = 0.05
    attr_prob_jitter: float = 0.1
    positive_rate_per_attr: Mapping[str, float] = field(default_factory=dict)
    camera_count: int = 6
    default_positive_rate: float = 0.3
    centroid_scale: float = 1.0
    attr_signal: float = 1.0
    train_fraction: float = 0.5
    attr_prob_shrink: float = 0.0

    def __post_init__(self) -> None:
        checks = (
            (self.seed >= 0, f"seed must be non-negative, got {self.seed}"),
            (self.num_identities >= 2, f"num_identities must be >= 2, got {self.num_identities}"),
            (
                self.images_per_identity >= 2,
                f"images_per_identity must be >= 2, got {self.images_per_identity}",
            ),
            (self.dim > 0 and self.dim % 4 == 0, f"dim must be a positive multiple of 4, got {self.dim}"),
            (self.feature_noise_sigma >= 0, "feature_noise_sigma must be non-negative"),
            (0.0 <= self.attr_flip_rate < 0.5, f"attr_flip_rate must lie in [0, 0.5), got {self.attr_flip_rate}"),
            (self.attr_prob_jitter >= 0, "attr_prob_jitter must be non-negative"),
            (self.camera_count >= 2, f"camera_count must be >= 2, got {self.camera_count}"),
            (0.0 < self.default_positive_rate < 1.0, "default_positive_rate must lie in (0, 1)"),
            (self.centroid_scale >= 0, "centroid_scale must be non-negative"),
            (self.attr_signal > 0, "attr_signal must be positive"),
            (0.0 < self.train_fraction < 1.0, "train_fraction must lie in (0, 1)"),
            (0.0 <= self.attr_prob_shrink <= 1.0, "attr_prob_shrink must lie in [0, 1]"),
        )
        for ok, message in checks:
            if not ok:
                raise SynthConfigError("invalid-config", message)
        for name, rate in self.positive_rate_per_attr.items():
            if not self.ontology.has_attribute(name):
                raise SynthConfigError("unknown-attribute", f"positive rate for unknown '{name}'")
            if not 0.0 < rate < 1.0:
                raise SynthConfigError("invalid-config", f"positive rate of '{name}' must lie in (0, 1)")
        attribute_layout(self.ontology, self.dim)

    def positive_rate(self, name: str) -> float:
        """Configured rate, else the ontology's, else the default."""

        if name in self.positive_rate_per_attr:
            return self.positive_rate_per_attr[name]
        declared = self.ontology.attributes[self.ontology.index_of(name)].positive_rate
        if declared is not None and 0.0 < declared < 1.0:
            return declared
        return self.default_positive_rate


def attribute_layout(ontology: Ontology, dim: int) -> dict[str, int]:
    """Coordinate each attribute is encoded on.

    Stripe attributes fill their stripe from its start; body attributes
    follow, alternating between the upper and lower stripes.
    """
    if dim % 4 != 0:
        raise SynthConfigError("invalid-config", f"dim must be a multiple of 4, got {dim}")
    next_free = {region: region_bounds(dim, region)[0] for region in STRIPE_ORDER}
    layout: dict[str, int] = {}

    def _take(name: str, region: Region) -> None:
        coordinate = next_free[region]
        if coordinate >= region_bounds(dim, region)[1]:
            raise SynthConfigError(
                "dimension-too-small",
                f"D={dim} leaves no free {region} coordinate for '{name}'",
            )
        layout[name] = coordinate
        next_free[region] = coordinate + 1

    for attr in ontology.attributes:
        if attr.region != Region.BODY:
            _take(attr.name, attr.region)
    body = [attr for attr in ontology.attributes if attr.region == Region.BODY]
    for i, attr in enumerate(body):
        _take(attr.name, Region.UPPER if i % 2 == 0 else Region.LOWER)
    return layout


def generate(cfg: SynthConfig) -> Dataset:
    """Identity-clustered descriptors with region-local attribute signal."""

    rng = make_rng(cfg.seed, "synth:generate")
    layout = attribute_layout(cfg.ontology, cfg.dim)
    rates = np.array([cfg.positive_rate(name) for name in cfg.ontology.attribute_names])

    labels = (rng.random((cfg.num_identities, len(rates))) < rates).astype(np.int8)
    centroids = rng.normal(0.0, cfg.centroid_scale, size=(cfg.num_identities, cfg.dim))
    _encode_attributes(centroids, labels, layout, cfg)

    dataset = _assemble(cfg, centroids, labels, _train_identities(cfg.num_identities, cfg), rng)
    logger.info(
        "generated %d descriptors for %d identities (D=%d, M=%d)",
        len(dataset),
        cfg.num_identities,
        cfg.dim,
        dataset.num_attributes,
    )
    return dataset


def scenario_confusable(
    cfg: SynthConfig, *, designated_attribute: str | None = None, pair_gap: float = 0.0
) -> Dataset:
    """Identity pairs that look alike and differ only on one attribute.

    Pair members share a centroid up to a random offset of length
    ``pair_gap``. The designated attribute is not encoded in the features
    at all: its label is 1 for the first member and 0 for the second; all
    other labels are shared.
    """
    if cfg.num_identities % 2 or cfg.num_identities < 4:
        raise SynthConfigError(
            "invalid-config", f"confusable pairs need an even num_identities >= 4, got {cfg.num_identities}"
        )
    if pair_gap < 0:
        raise SynthConfigError("invalid-config", f"pair_gap must be non-negative, got {pair_gap}")
    names = cfg.ontology.attribute_names
    designated = designated_attribute if designated_attribute is not None else names[0]
    if not cfg.ontology.has_attribute(designated):
        raise SynthConfigError("unknown-attribute", f"'{designated}' is not an ontology attribute")
    column = cfg.ontology.index_of(designated)

    rng = make_rng(cfg.seed, "synth:confusable")
    layout = attribute_layout(cfg.ontology, cfg.dim)
    rates = np.array([cfg.positive_rate(name) for name in names])
    pairs = cfg.num_identities // 2

    pair_labels = (rng.random((pairs, len(rates))) < rates).astype(np.int8)
    labels = np.repeat(pair_labels, 2, axis=0)
    labels[0::2, column] = 1
    labels[1::2, column] = 0

    base = rng.normal(0.0, cfg.centroid_scale, size=(pairs, cfg.dim))
    centroids = np.repeat(base, 2, axis=0)
    _encode_attributes(centroids, labels, layout, cfg)
    centroids[:, layout[designated]] = 0.0
    directions = rng.normal(size=(pairs, cfg.dim))
    directions[:, layout[designated]] = 0.0
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centroids[1::2] += pair_gap * directions

    train_pairs = _train_identities(pairs, cfg)
    train = frozenset(i for p in train_pairs for i in (2 * p, 2 * p + 1))
    dataset = _assemble(cfg, centroids, labels, train, rng)
    logger.info(
        "generated confusable scenario: %d pairs differing on %r, gap %.3f",
        pairs,
        designated,
        pair_gap,
    )
    return dataset


def synth_config_provenance(cfg: SynthConfig, **extra: Any) -> dict[str, Any]:
    """JSON-ready description of ``cfg`` (the ontology by name)."""

    payload: dict[str, Any] = {}
    for item in dataclasses.fields(cfg):
        value = getattr(cfg, item.name)
        if item.name == "ontology":
            payload[item.name] = value.name
        elif item.name == "positive_rate_per_attr":
            payload[item.name] = dict(sorted(value.items()))
        else:
            payload[item.name] = value
    payload.update(extra)
    return payload


def _train_identities(count: int, cfg: SynthConfig) -> frozenset[int]:
    n_train = min(count - 1, max(1, round(count * cfg.train_fraction)))
    return frozenset(range(n_train))


def _encode_attributes(
    centroids: np.ndarray, labels: np.ndarray, layout: Mapping[str, int], cfg: SynthConfig
) -> None:
    for j, name in enumerate(cfg.ontology.attribute_names):
        centroids[:, layout[name]] = np.where(labels[:, j] == 1, cfg.attr_signal, -cfg.attr_signal)


def _assemble(
    cfg: SynthConfig,
    centroids: np.ndarray,
    labels: np.ndarray,
    train: frozenset[int],
    rng: np.random.Generator,
) -> Dataset:
    rates = np.array([cfg.positive_rate(name) for name in cfg.ontology.attribute_names])
    descriptors: list[Descriptor] = []
    for identity, (centroid, identity_labels) in enumerate(zip(centroids, labels, strict=True)):
        for j in range(cfg.images_per_identity):
            camera = (identity + j) % cfg.camera_count
            if identity in train:
                split = Split.TRAIN
            else:
                split = Split.QUERY if j == 0 else Split.GALLERY
            feature = centroid + rng.normal(0.0, cfg.feature_noise_sigma, size=cfg.dim)
            flips = rng.random(identity_labels.size) < cfg.attr_flip_rate
            observed = np.where(flips, 1 - identity_labels, identity_labels).astype(np.float64)
            shrunk = (1.0 - cfg.attr_prob_shrink) * observed + cfg.attr_prob_shrink * rates
            jitter = rng.normal(0.0, cfg.attr_prob_jitter, size=identity_labels.size)
            descriptors.append(
                Descriptor(
                    image_id=f"{identity:04d}_c{camera}_{j:02d}",
                    person_id=identity,
                    camera_id=camera,
                    split=split,
                    feature=feature,
                    attr_probs=np.clip(shrunk + jitter, 0.0, 1.0),
                    attr_labels=identity_labels.copy(),
                )
            )
    return build_dataset(cfg.ontology, descriptors, dim=cfg.dim)
