"""Pedestrian attribute ontology: loading, validation, grouping queries.

The ontology is a tree of five body regions, clothing/facial categories
inside each region, and binary attributes. Every attribute belongs to
exactly one region; that grouping decides which slice of a descriptor an
attribute classifier reads and which attributes a region filter uses.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from semreid.artifacts import AttributeNode, CategoryNode, OntologyDocument, RegionNode
from semreid.errors import OntologyError
from semreid.repository import dump_document

from .enums import BODY_PARTS, Region
from .models import AttributeDef, Category, Ontology, RegionDef

BUNDLED_ONTOLOGY = "market1501_ontology.json"

OntologySource = OntologyDocument | Mapping[str, Any] | Path | str


@dataclass(frozen=True, slots=True)
class OntologyRelation:
    """A ``subject --relation--> object`` triple implied by the tree."""

    subject: str
    relation: str
    object: str


# ---------------------------------------------------------------------------
# Loading


def load_ontology(source: OntologySource) -> Ontology:
    """Parse and validate an ontology document.

    ``source`` may be a parsed :class:`OntologyDocument`, a mapping with the
    document fields, or a path to a JSON file.

    Raises:
        OntologyError: ``malformed-document``, ``unknown-region``,
            ``duplicate-region``, ``missing-region``, ``cycle``,
            ``invalid-composite``, ``duplicate-category`` or
            ``duplicate-attribute``.
    """
    return _build(_coerce_document(source))


@lru_cache
def bundled_ontology() -> Ontology:
    """The shipped Market1501 ontology (25 attributes)."""

    text = resources.files("semreid").joinpath("data", BUNDLED_ONTOLOGY).read_text("utf-8")
    return load_ontology(_parse_json(text))


def bundled_ontology_path() -> Path:
    return Path(str(resources.files("semreid").joinpath("data", BUNDLED_ONTOLOGY)))


def _parse_json(text: str) -> OntologyDocument:
    try:
        return OntologyDocument.model_validate_json(text)
    except ValidationError as exc:
        raise OntologyError("malformed-document", str(exc)) from exc


def _coerce_document(source: OntologySource) -> OntologyDocument:
    if isinstance(source, OntologyDocument):
        return source
    if isinstance(source, Mapping):
        try:
            return OntologyDocument.model_validate(source)
        except ValidationError as exc:
            raise OntologyError("malformed-document", str(exc)) from exc
    return _parse_json(Path(source).read_text(encoding="utf-8"))


def _parse_region(name: str) -> Region:
    try:
        return Region(name)
    except ValueError as exc:
        valid = ", ".join(r.value for r in Region)
        raise OntologyError(
            "unknown-region", f"region '{name}' is not one of {valid}"
        ) from exc


def _build(document: OntologyDocument) -> Ontology:
    region_defs = _build_regions(document.regions)

    categories: list[Category] = []
    attributes: list[AttributeDef] = []
    seen_categories: set[tuple[Region, str]] = set()
    owner: dict[str, Region] = {}

    def _add(node: AttributeNode, region: Region, category: str | None) -> None:
        if node.name in owner:
            raise OntologyError(
                "duplicate-attribute",
                f"'{node.name}' appears under {owner[node.name]} and {region}",
            )
        owner[node.name] = region
        attributes.append(AttributeDef(node.name, region, category, node.positive_rate))

    for node, region_def in zip(document.regions, region_defs, strict=True):
        for category_node in node.categories:
            key = (region_def.name, category_node.name)
            if key in seen_categories:
                raise OntologyError(
                    "duplicate-category",
                    f"category '{category_node.name}' is declared twice in {region_def.name}",
                )
            seen_categories.add(key)
            categories.append(Category(category_node.name, region_def.name))
            for attr_node in category_node.attributes:
                _add(attr_node, region_def.name, category_node.name)
        for attr_node in node.attributes:
            _add(attr_node, region_def.name, None)

    return Ontology(
        name=document.name,
        regions=tuple(region_defs),
        categories=tuple(categories),
        attributes=tuple(attributes),
    )


def _build_regions(nodes: list[RegionNode]) -> list[RegionDef]:
    region_defs: list[RegionDef] = []
    seen: set[Region] = set()
    for node in nodes:
        region = _parse_region(node.name)
        if region in seen:
            raise OntologyError("duplicate-region", f"region '{region}' is declared twice")
        seen.add(region)
        parts = tuple(_parse_region(part) for part in node.composite_of)
        region_defs.append(RegionDef(region, parts))

    missing = set(Region) - seen
    if missing:
        names = ", ".join(sorted(r.value for r in missing))
        raise OntologyError("missing-region", f"regions not declared: {names}")

    _check_acyclic(region_defs)

    for region_def in region_defs:
        if region_def.name == Region.BODY:
            if set(region_def.composite_of) != BODY_PARTS or len(region_def.composite_of) != 2:
                raise OntologyError(
                    "invalid-composite", "body must be the composite of exactly upper and lower"
                )
        elif region_def.composite_of:
            raise OntologyError(
                "invalid-composite", f"only body may be composite, not '{region_def.name}'"
            )
    return region_defs


def _check_acyclic(region_defs: list[RegionDef]) -> None:
    edges = {rd.name: rd.composite_of for rd in region_defs}
    done: set[Region] = set()

    def _visit(region: Region, path: tuple[Region, ...]) -> None:
        if region in path:
            chain = " -> ".join(r.value for r in (*path, region))
            raise OntologyError("cycle", f"composite regions form a cycle: {chain}")
        if region in done:
            return
        for part in edges.get(region, ()):
            _visit(part, (*path, region))
        done.add(region)

    for region in edges:
        _visit(region, ())


# ---------------------------------------------------------------------------
# Serialization


def dump_ontology(ontology: Ontology) -> OntologyDocument:
    """Inverse of :func:`load_ontology` (attribute order preserved)."""

    region_nodes: list[RegionNode] = []
    for region_def in ontology.regions:
        category_nodes = [
            CategoryNode(
                name=category.name,
                attributes=[
                    _attribute_node(attr)
                    for attr in ontology.attributes
                    if attr.region == category.region and attr.category == category.name
                ],
            )
            for category in ontology.categories
            if category.region == region_def.name
        ]
        loose = [
            _attribute_node(attr)
            for attr in ontology.attributes
            if attr.region == region_def.name and attr.category is None
        ]
        region_nodes.append(
            RegionNode(
                name=region_def.name.value,
                composite_of=[part.value for part in region_def.composite_of],
                categories=category_nodes,
                attributes=loose,
            )
        )
    return OntologyDocument(name=ontology.name, regions=region_nodes)


def _attribute_node(attr: AttributeDef) -> AttributeNode:
    return AttributeNode(name=attr.name, positive_rate=attr.positive_rate)


def save_ontology(ontology: Ontology, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_document(dump_ontology(ontology)), encoding="utf-8")
    return path


def ontology_checksum(ontology: Ontology) -> str:
    """SHA-256 of the canonical (compact, sorted-key) ontology document."""

    payload = json.dumps(
        dump_ontology(ontology).model_dump(mode="json"), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Grouping queries


def _require_region(ontology: Ontology, region: Region | str) -> Region:
    resolved = _parse_region(region) if isinstance(region, str) else region
    if ontology.region_def(resolved) is None:
        raise OntologyError("unknown-region", f"region '{resolved}' is not in the ontology")
    return resolved


def attributes_of_region(ontology: Ontology, region: Region | str) -> tuple[AttributeDef, ...]:
    """Attributes owned by ``region``, in canonical order.

    ``body`` returns its own attributes only, not those of upper and lower.
    """
    resolved = _require_region(ontology, region)
    return tuple(attr for attr in ontology.attributes if attr.region == resolved)


def region_of_attribute(ontology: Ontology, name: str) -> Region:
    """The unique region owning attribute ``name``."""

    if not ontology.has_attribute(name):
        raise OntologyError("unknown-attribute", f"'{name}' is not an ontology attribute")
    return ontology.attributes[ontology.index_of(name)].region


def region_groups(ontology: Ontology) -> dict[Region, tuple[str, ...]]:
    """Attribute names per region, skipping regions without attributes."""

    groups: dict[Region, tuple[str, ...]] = {}
    for region_def in ontology.regions:
        names = tuple(a.name for a in attributes_of_region(ontology, region_def.name))
        if names:
            groups[region_def.name] = names
    return groups


def ontology_relations(ontology: Ontology) -> tuple[OntologyRelation, ...]:
    """The ``part of`` / ``has a`` / ``is a`` triples of the tree."""

    relations: list[OntologyRelation] = []
    for region_def in ontology.regions:
        relations.append(OntologyRelation(region_def.name.value, "part of", "person"))
        relations.extend(
            OntologyRelation(part.value, "part of", region_def.name.value)
            for part in region_def.composite_of
        )
    for category in ontology.categories:
        relations.append(OntologyRelation(category.region.value, "has a", category.name))
    for attr in ontology.attributes:
        parent = attr.category if attr.category is not None else attr.region.value
        relations.append(OntologyRelation(parent, "has a", attr.name))
        relations.append(OntologyRelation(attr.name, "is a", "binary"))
    return tuple(relations)
