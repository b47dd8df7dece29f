"""Dataclasses describing every semreid domain entity.

The rules modules (ontology, dataset, losses, imbalance, retrieval,
metrics, synth) operate on these types only. Persistence adapters in
:mod:`semreid.artifacts` translate them to and from JSON documents.

Vectors are ``numpy`` arrays. Types holding arrays use identity equality
(``eq=False``); compare their payloads with ``numpy.array_equal``.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np

from .enums import AttributeScope, FilterMode, Region, Split

# --- Ontology -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RegionDef:
    """A body region; composite regions name the parts they merge."""

    name: Region
    composite_of: tuple[Region, ...] = ()


@dataclass(frozen=True, slots=True)
class Category:
    """Clothing/facial item category living in one region."""

    name: str
    region: Region


@dataclass(frozen=True, slots=True)
class AttributeDef:
    """Binary attribute owned by exactly one region."""

    name: str
    region: Region
    category: str | None = None
    positive_rate: float | None = None


@dataclass(frozen=True, slots=True)
class Ontology:
    """Validated region -> category -> attribute tree.

    The order of ``attributes`` is the canonical attribute-vector order.
    """

    name: str
    regions: tuple[RegionDef, ...]
    categories: tuple[Category, ...]
    attributes: tuple[AttributeDef, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {attr.name: i for i, attr in enumerate(self.attributes)}
        )

    def __len__(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(attr.name for attr in self.attributes)

    def has_attribute(self, name: str) -> bool:
        return name in self._index

    def index_of(self, name: str) -> int:
        """Position of ``name`` in the attribute vector (KeyError if unknown)."""

        return self._index[name]

    def region_def(self, region: Region) -> RegionDef | None:
        for region_def in self.regions:
            if region_def.name == region:
                return region_def
        return None


# --- Descriptors ----------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class Descriptor:
    """One image: identity/camera metadata, embedding and attribute vectors."""

    image_id: str
    person_id: int
    camera_id: int
    split: Split
    feature: np.ndarray
    attr_probs: np.ndarray | None = None
    attr_labels: np.ndarray | None = None


@dataclass(frozen=True, slots=True, eq=False)
class DatasetView:
    """Read-only ordered selection of descriptors (a split, a candidate set...)."""

    descriptors: tuple[Descriptor, ...] = ()

    def __len__(self) -> int:
        return len(self.descriptors)

    def __iter__(self) -> Iterator[Descriptor]:
        return iter(self.descriptors)

    def __getitem__(self, index: int) -> Descriptor:
        return self.descriptors[index]

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(d.image_id for d in self.descriptors)

    def person_ids(self) -> np.ndarray:
        return np.array([d.person_id for d in self.descriptors], dtype=np.int64)

    def feature_matrix(self) -> np.ndarray:
        """Stack features into an ``(n, D)`` matrix (``(0, 0)`` when empty)."""

        if not self.descriptors:
            return np.zeros((0, 0))
        return np.stack([d.feature for d in self.descriptors])

    def prob_matrix(self) -> np.ndarray | None:
        if not self.descriptors or any(d.attr_probs is None for d in self.descriptors):
            return None
        return np.stack([d.attr_probs for d in self.descriptors])

    def label_matrix(self) -> np.ndarray | None:
        if not self.descriptors or any(d.attr_labels is None for d in self.descriptors):
            return None
        return np.stack([d.attr_labels for d in self.descriptors])

    def identities(self) -> tuple[int, ...]:
        return tuple(sorted({d.person_id for d in self.descriptors}))


@dataclass(frozen=True, slots=True, eq=False)
class Dataset:
    """Validated collection of descriptors bound to one ontology."""

    ontology: Ontology
    descriptors: tuple[Descriptor, ...]
    dim: int
    num_attributes: int

    def __len__(self) -> int:
        return len(self.descriptors)

    def view(self) -> DatasetView:
        return DatasetView(self.descriptors)


# --- Toy models -----------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class TripletBatch:
    """Anchor / positive / negative embeddings and the margin."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    margin: float


@dataclass(frozen=True, slots=True, eq=False)
class TripletGradients:
    """Gradients of the triplet loss w.r.t. each member."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


@dataclass(frozen=True, slots=True, eq=False)
class LinearEmbedder:
    """Shared linear map ``x -> x @ weights`` applied to every triplet branch."""

    weights: np.ndarray
    step_size: float
    max_epochs: int
    margin: float
    loss_history: tuple[float, ...] = ()

    @property
    def input_dim(self) -> int:
        return int(self.weights.shape[0])

    @property
    def output_dim(self) -> int:
        return int(self.weights.shape[1])

    def embed(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights


@dataclass(frozen=True, slots=True, eq=False)
class RegionClassifierGroup:
    """Per-attribute logistic heads sharing one region slice as input.

    ``weights`` has one row per attribute; ``region`` is ``None`` for the
    global baseline, which reads the whole descriptor.
    """

    scope: AttributeScope
    region: Region | None
    attributes: tuple[str, ...]
    weights: np.ndarray
    biases: np.ndarray
    degenerate: tuple[str, ...] = ()


# --- Imbalance solver -----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    """Binary confusion matrix counts."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True, slots=True)
class ThresholdEntry:
    threshold: float
    mcc: float


@dataclass(frozen=True, slots=True)
class ThresholdTable:
    """Calibrated binarization threshold and achieved MCC per attribute."""

    entries: Mapping[str, ThresholdEntry]
    grid: tuple[float, ...]
    ontology_checksum: str = ""

    def threshold_of(self, name: str) -> float:
        return self.entries[name].threshold

    def threshold_vector(self, names: tuple[str, ...]) -> np.ndarray:
        return np.array([self.entries[name].threshold for name in names], dtype=np.float64)


# --- Retrieval ------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FilterSpec:
    """Which attributes a gallery candidate must agree on with the query."""

    mode: FilterMode = FilterMode.NONE
    attributes: tuple[str, ...] = ()
    region: Region | None = None
    fallback_on_empty: bool = True

    @classmethod
    def none(cls) -> FilterSpec:
        return cls()

    @classmethod
    def single(cls, name: str, *, fallback_on_empty: bool = True) -> FilterSpec:
        return cls(FilterMode.SINGLE, (name,), fallback_on_empty=fallback_on_empty)

    @classmethod
    def attribute_set(cls, names: tuple[str, ...] | list[str], *, fallback_on_empty: bool = True) -> FilterSpec:
        return cls(FilterMode.ATTRIBUTE_SET, tuple(names), fallback_on_empty=fallback_on_empty)

    @classmethod
    def all_of_region(cls, region: Region, *, fallback_on_empty: bool = True) -> FilterSpec:
        return cls(FilterMode.REGION, region=region, fallback_on_empty=fallback_on_empty)


@dataclass(frozen=True, slots=True)
class FilterOutcome:
    """Survivors of attribute pre-filtering, as gallery positions."""

    survivors: tuple[int, ...]
    removed_count: int
    fallback_used: bool


@dataclass(frozen=True, slots=True)
class RankedItem:
    image_id: str
    distance: float


@dataclass(frozen=True, slots=True)
class QueryResult:
    """Ranked gallery ids for one query plus the filter trace."""

    query_id: str
    ranking: tuple[RankedItem, ...]
    removed_count: int = 0
    fallback_used: bool = False

    @property
    def ranked_ids(self) -> tuple[str, ...]:
        return tuple(item.image_id for item in self.ranking)


# --- Evaluation -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class EvalReport:
    """Retrieval (CMC, mAP) and attribute (F1) scores."""

    cmc: dict[int, float] = field(default_factory=dict)
    map_score: float = 0.0
    per_attr_f1: dict[str, float] = field(default_factory=dict)
    avg_f1: float = 0.0
    num_queries: int = 0
    skipped_queries: int = 0
