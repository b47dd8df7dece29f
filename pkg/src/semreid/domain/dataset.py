"""Descriptor datasets: validation, split views, region slices and file I/O.

A dataset directory holds three files::

    dataset.json        manifest (ontology file, checksum, D, M, provenance)
    ontology.json       copy of the ontology document the dataset was built on
    descriptors.jsonl   one DescriptorRecord per line

Reals are written in Python's shortest round-trip decimal form, so reading
a written dataset reproduces every vector bit for bit.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from semreid.artifacts import DatasetManifest, DescriptorRecord
from semreid.errors import ChecksumError, DatasetError
from semreid.repository import JsonArtifactStore

from .enums import STRIPE_ORDER, Region, Split
from .models import Dataset, DatasetView, Descriptor, Ontology
from .ontology import load_ontology, ontology_checksum, save_ontology

logger = logging.getLogger(__name__)

MANIFEST_NAME = "dataset.json"
ONTOLOGY_NAME = "ontology.json"
RECORDS_NAME = "descriptors.jsonl"

RecordSource = DescriptorRecord | Mapping[str, Any] | str


# ---------------------------------------------------------------------------
# Construction and validation


def read_dataset(
    records: Iterable[RecordSource], ontology: Ontology, *, dim: int | None = None
) -> Dataset:
    """Validate descriptor records against ``ontology``.

    ``records`` may be parsed records, mappings or JSON lines. ``dim`` pins
    the expected feature dimension (otherwise taken from the first record).

    Raises:
        DatasetError: ``malformed-document``, ``unknown-split``,
            ``dimension-mismatch``, ``indivisible-dimension``,
            ``probability-range``, ``label-range`` or ``duplicate-image-id``.
    """
    descriptors = [_descriptor_from_record(_coerce_record(raw)) for raw in records]
    return build_dataset(ontology, descriptors, dim=dim)


def build_dataset(
    ontology: Ontology, descriptors: Iterable[Descriptor], *, dim: int | None = None
) -> Dataset:
    """Validate already-constructed descriptors and bind them to ``ontology``."""

    items = tuple(descriptors)
    num_attributes = len(ontology)
    expected_dim = dim if dim is not None else (items[0].feature.shape[0] if items else 0)
    if expected_dim % 4 != 0:
        raise DatasetError(
            "indivisible-dimension", f"feature dimension {expected_dim} is not divisible by 4"
        )

    seen: set[str] = set()
    for descriptor in items:
        _validate_descriptor(descriptor, expected_dim, num_attributes)
        if descriptor.image_id in seen:
            raise DatasetError("duplicate-image-id", f"image_id '{descriptor.image_id}' repeats")
        seen.add(descriptor.image_id)

    return Dataset(
        ontology=ontology, descriptors=items, dim=expected_dim, num_attributes=num_attributes
    )


def _coerce_record(raw: RecordSource) -> DescriptorRecord:
    try:
        if isinstance(raw, DescriptorRecord):
            return raw
        if isinstance(raw, str):
            return DescriptorRecord.model_validate_json(raw)
        return DescriptorRecord.model_validate(raw)
    except ValidationError as exc:
        raise DatasetError("malformed-document", str(exc)) from exc


def _descriptor_from_record(record: DescriptorRecord) -> Descriptor:
    try:
        split = Split(record.split)
    except ValueError as exc:
        raise DatasetError(
            "unknown-split", f"'{record.split}' on {record.image_id} is not train/query/gallery"
        ) from exc
    return Descriptor(
        image_id=record.image_id,
        person_id=record.person_id,
        camera_id=record.camera_id,
        split=split,
        feature=np.asarray(record.feature, dtype=np.float64),
        attr_probs=(
            None if record.attr_probs is None else np.asarray(record.attr_probs, dtype=np.float64)
        ),
        attr_labels=(
            None if record.attr_labels is None else np.asarray(record.attr_labels, dtype=np.int8)
        ),
    )


def _validate_descriptor(descriptor: Descriptor, dim: int, num_attributes: int) -> None:
    image_id = descriptor.image_id
    if descriptor.feature.ndim != 1 or descriptor.feature.shape[0] != dim:
        raise DatasetError(
            "dimension-mismatch",
            f"{image_id}: feature has shape {descriptor.feature.shape}, expected ({dim},)",
        )
    if not np.all(np.isfinite(descriptor.feature)):
        raise DatasetError("non-finite", f"{image_id}: feature has non-finite components")

    probs = descriptor.attr_probs
    if probs is not None:
        if probs.shape != (num_attributes,):
            raise DatasetError(
                "dimension-mismatch",
                f"{image_id}: attr_probs has length {probs.shape[0]}, ontology has {num_attributes}",
            )
        if not np.all((probs >= 0.0) & (probs <= 1.0)):
            raise DatasetError("probability-range", f"{image_id}: attr_probs outside [0, 1]")

    labels = descriptor.attr_labels
    if labels is not None:
        if labels.shape != (num_attributes,):
            raise DatasetError(
                "dimension-mismatch",
                f"{image_id}: attr_labels has length {labels.shape[0]}, ontology has {num_attributes}",
            )
        if not np.all((labels == 0) | (labels == 1)):
            raise DatasetError("label-range", f"{image_id}: attr_labels must be 0/1")


# ---------------------------------------------------------------------------
# Views and slices


def split_views(dataset: Dataset) -> tuple[DatasetView, DatasetView, DatasetView]:
    """Partition descriptors into (train, query, gallery) views."""

    buckets: dict[Split, list[Descriptor]] = {split: [] for split in Split}
    for descriptor in dataset.descriptors:
        buckets[descriptor.split].append(descriptor)
    return (
        DatasetView(tuple(buckets[Split.TRAIN])),
        DatasetView(tuple(buckets[Split.QUERY])),
        DatasetView(tuple(buckets[Split.GALLERY])),
    )


def view_of(dataset: Dataset, split: Split) -> DatasetView:
    return DatasetView(tuple(d for d in dataset.descriptors if d.split == split))


def region_bounds(dim: int, region: Region) -> tuple[int, int]:
    """Half-open component range of ``region`` in a ``dim``-vector.

    Each stripe is a quarter of the vector; body spans upper and lower.
    """
    if dim % 4 != 0:
        raise DatasetError("indivisible-dimension", f"dimension {dim} is not divisible by 4")
    quarter = dim // 4
    if region == Region.BODY:
        return quarter, 3 * quarter
    position = STRIPE_ORDER.index(region)
    return position * quarter, (position + 1) * quarter


def region_slice(
    descriptor: Descriptor | np.ndarray, region: Region, ontology: Ontology | None = None
) -> np.ndarray:
    """The components of a descriptor's feature that belong to ``region``."""

    if ontology is not None and ontology.region_def(region) is None:
        raise DatasetError("unknown-region", f"region '{region}' is not in the ontology")
    feature = descriptor.feature if isinstance(descriptor, Descriptor) else descriptor
    start, stop = region_bounds(feature.shape[-1], region)
    return feature[..., start:stop]


# ---------------------------------------------------------------------------
# Derived datasets


def with_attr_probs(dataset: Dataset, probs: np.ndarray) -> Dataset:
    """Copy of ``dataset`` whose attr_probs rows are replaced by ``probs``."""

    if probs.shape != (len(dataset), dataset.num_attributes):
        raise DatasetError(
            "dimension-mismatch",
            f"probability matrix {probs.shape} does not match ({len(dataset)}, {dataset.num_attributes})",
        )
    descriptors = [
        dataclasses.replace(d, attr_probs=np.asarray(row, dtype=np.float64))
        for d, row in zip(dataset.descriptors, probs, strict=True)
    ]
    return build_dataset(dataset.ontology, descriptors, dim=dataset.dim)


def with_features(dataset: Dataset, features: np.ndarray) -> Dataset:
    """Copy of ``dataset`` with new feature rows (e.g. embedded descriptors)."""

    if features.ndim != 2 or features.shape[0] != len(dataset):
        raise DatasetError(
            "dimension-mismatch", f"feature matrix {features.shape} has the wrong row count"
        )
    descriptors = [
        dataclasses.replace(d, feature=np.asarray(row, dtype=np.float64))
        for d, row in zip(dataset.descriptors, features, strict=True)
    ]
    return build_dataset(dataset.ontology, descriptors, dim=features.shape[1])


# ---------------------------------------------------------------------------
# Files


def descriptor_to_record(descriptor: Descriptor) -> DescriptorRecord:
    return DescriptorRecord(
        image_id=descriptor.image_id,
        person_id=descriptor.person_id,
        camera_id=descriptor.camera_id,
        split=descriptor.split.value,
        feature=descriptor.feature.tolist(),
        attr_probs=None if descriptor.attr_probs is None else descriptor.attr_probs.tolist(),
        attr_labels=None if descriptor.attr_labels is None else descriptor.attr_labels.tolist(),
    )


def write_dataset(
    dataset: Dataset, directory: Path, *, provenance: Mapping[str, Any] | None = None
) -> Path:
    """Write manifest, ontology copy and records into ``directory``."""

    store = JsonArtifactStore(directory)
    save_ontology(dataset.ontology, store.path_for(ONTOLOGY_NAME))
    store.save_lines(RECORDS_NAME, (descriptor_to_record(d) for d in dataset.descriptors))
    manifest = DatasetManifest(
        ontology=ONTOLOGY_NAME,
        ontology_checksum=ontology_checksum(dataset.ontology),
        dim=dataset.dim,
        num_attributes=dataset.num_attributes,
        records=RECORDS_NAME,
        num_records=len(dataset),
        provenance=dict(provenance or {}),
    )
    path = store.save(MANIFEST_NAME, manifest)
    logger.info("wrote %d descriptors to %s", len(dataset), directory)
    return path


def load_manifest(path: Path) -> DatasetManifest:
    """Read the manifest of a dataset directory (or the manifest file itself)."""

    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    try:
        return DatasetManifest.model_validate_json(manifest_path.read_bytes())
    except ValidationError as exc:
        raise DatasetError("malformed-document", str(exc)) from exc


def load_dataset(path: Path, *, ontology: Ontology | None = None) -> Dataset:
    """Load a dataset directory written by :func:`write_dataset`.

    When ``ontology`` is given it must match the checksum in the manifest.
    """
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    if ontology is None:
        ontology = load_ontology(base / manifest.ontology)
    found = ontology_checksum(ontology)
    if found != manifest.ontology_checksum:
        raise ChecksumError(manifest.ontology_checksum, found, artifact="ontology")

    if manifest.num_attributes != len(ontology):
        raise DatasetError(
            "dimension-mismatch",
            f"manifest declares M={manifest.num_attributes}, ontology has {len(ontology)}",
        )
    store = JsonArtifactStore(base)
    dataset = read_dataset(store.iter_lines(manifest.records), ontology, dim=manifest.dim)
    if len(dataset) != manifest.num_records:
        raise DatasetError(
            "count-mismatch",
            f"manifest declares {manifest.num_records} records, file holds {len(dataset)}",
        )
    return dataset
