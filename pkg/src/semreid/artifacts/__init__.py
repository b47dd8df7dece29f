"""Pydantic schemas for every document semreid reads or writes.

Documents are plain JSON (JSON lines for descriptor records). Each one
carries ``schema_version`` and, except the ontology itself, the checksum
of the ontology it was produced against plus a ``provenance`` mapping with
the configuration of the command that wrote it. Nothing time-dependent is
stored, so identical runs give byte-identical files.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- Ontology -------------------------------------------------------------------


class AttributeNode(_Document):
    name: str = Field(min_length=1)
    positive_rate: float | None = Field(default=None, ge=0.0, le=1.0)


class CategoryNode(_Document):
    name: str = Field(min_length=1)
    attributes: list[AttributeNode] = Field(default_factory=list)


class RegionNode(_Document):
    name: str
    composite_of: list[str] = Field(default_factory=list)
    categories: list[CategoryNode] = Field(default_factory=list)
    attributes: list[AttributeNode] = Field(default_factory=list)


class OntologyDocument(_Document):
    """Region -> category -> attribute tree.

    Attribute vector order is the traversal order: regions in document
    order; inside a region, each category's attributes, then the
    region-level attributes.
    """

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = Field(min_length=1)
    regions: list[RegionNode]


# --- Dataset --------------------------------------------------------------------


class DescriptorRecord(_Document):
    """One line of the descriptor-records file."""

    image_id: str = Field(min_length=1)
    person_id: int = Field(ge=0)
    camera_id: int = Field(ge=0)
    split: str
    feature: list[float]
    attr_probs: list[float] | None = None
    attr_labels: list[int] | None = None


class DatasetManifest(_Document):
    """Names the ontology document, the records file and the dimensions."""

    schema_version: Literal[1] = SCHEMA_VERSION
    ontology: str
    ontology_checksum: str
    dim: int = Field(ge=0)
    num_attributes: int = Field(ge=0)
    records: str = "descriptors.jsonl"
    num_records: int = Field(ge=0)
    provenance: dict[str, Any] = Field(default_factory=dict)


# --- Models ---------------------------------------------------------------------


class EmbedderPayload(_Document):
    weights: list[list[float]]
    step_size: float
    max_epochs: int
    margin: float
    loss_history: list[float] = Field(default_factory=list)


class GroupPayload(_Document):
    scope: Literal["local", "global"]
    region: str | None
    attributes: list[str]
    weights: list[list[float]]
    biases: list[float]
    degenerate: list[str] = Field(default_factory=list)


class ModelDocument(_Document):
    schema_version: Literal[1] = SCHEMA_VERSION
    ontology_checksum: str
    embedder: EmbedderPayload | None = None
    groups: list[GroupPayload] = Field(default_factory=list)
    provenance: dict[str, Any] = Field(default_factory=dict)


# --- Thresholds -----------------------------------------------------------------


class ThresholdPayload(_Document):
    threshold: float = Field(gt=0.0, lt=1.0)
    mcc: float = Field(ge=-1.0, le=1.0)


class ThresholdDocument(_Document):
    schema_version: Literal[1] = SCHEMA_VERSION
    ontology_checksum: str
    grid: list[float]
    calibration_split: str
    attribute_order: list[str]
    entries: dict[str, ThresholdPayload]
    provenance: dict[str, Any] = Field(default_factory=dict)


# --- Rankings and reports -------------------------------------------------------


class RankedPayload(_Document):
    image_id: str
    distance: float = Field(ge=0.0)


class QueryResultPayload(_Document):
    query_id: str
    ranking: list[RankedPayload]
    removed_count: int = Field(ge=0)
    fallback_used: bool


class RankingDocument(_Document):
    schema_version: Literal[1] = SCHEMA_VERSION
    ontology_checksum: str
    filter: str
    order: str
    mask: bool
    results: list[QueryResultPayload]
    provenance: dict[str, Any] = Field(default_factory=dict)


class EvalReportDocument(_Document):
    schema_version: Literal[1] = SCHEMA_VERSION
    ontology_checksum: str
    cmc: dict[str, float]
    map: float
    per_attr_f1: dict[str, float]
    avg_f1: float
    num_queries: int
    skipped_queries: int
    provenance: dict[str, Any] = Field(default_factory=dict)


__all__ = [
    "SCHEMA_VERSION",
    "AttributeNode",
    "CategoryNode",
    "DatasetManifest",
    "DescriptorRecord",
    "EmbedderPayload",
    "EvalReportDocument",
    "GroupPayload",
    "ModelDocument",
    "OntologyDocument",
    "QueryResultPayload",
    "RankedPayload",
    "RankingDocument",
    "RegionNode",
    "ThresholdDocument",
    "ThresholdPayload",
]
