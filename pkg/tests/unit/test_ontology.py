"""Tests for the attribute ontology."""

from __future__ import annotations

import copy

import pytest

from semreid.domain.enums import Region
from semreid.domain.ontology import (
    OntologyRelation,
    attributes_of_region,
    bundled_ontology,
    dump_ontology,
    load_ontology,
    ontology_checksum,
    ontology_relations,
    region_groups,
    region_of_attribute,
    save_ontology,
)
from semreid.errors import OntologyError


def _document() -> dict:
    return {
        "name": "tiny",
        "regions": [
            {"name": "head", "categories": [{"name": "hat", "attributes": [{"name": "cap"}]}]},
            {
                "name": "body",
                "composite_of": ["upper", "lower"],
                "attributes": [{"name": "backpack"}],
            },
            {"name": "upper", "attributes": [{"name": "up red"}, {"name": "up blue"}]},
            {"name": "lower", "categories": [{"name": "legs", "attributes": [{"name": "skirt"}]}]},
            {"name": "foot"},
        ],
    }


def _expect(code: str, document: dict) -> None:
    with pytest.raises(OntologyError) as info:
        load_ontology(document)
    assert info.value.code == code


class TestBundledOntology:
    def test_has_25_attributes(self):
        assert len(bundled_ontology()) == 25

    def test_region_partition(self):
        ontology = bundled_ontology()
        counts = {r: len(attributes_of_region(ontology, r)) for r in Region}
        assert counts == {
            Region.HEAD: 3,
            Region.BODY: 3,
            Region.UPPER: 9,
            Region.LOWER: 10,
            Region.FOOT: 0,
        }

    def test_canonical_order(self):
        ontology = bundled_ontology()
        assert ontology.attribute_names[:4] == ("gender", "hair length", "wearing hat", "backpack")
        assert ontology.index_of("down brown") == 24

    def test_region_of_attribute(self):
        ontology = bundled_ontology()
        assert region_of_attribute(ontology, "wearing hat") == Region.HEAD
        assert region_of_attribute(ontology, "handbag") == Region.BODY
        assert region_of_attribute(ontology, "down black") == Region.LOWER

    def test_unknown_attribute(self):
        with pytest.raises(OntologyError) as info:
            region_of_attribute(bundled_ontology(), "up orange")
        assert info.value.code == "unknown-attribute"

    def test_region_groups_skip_foot(self):
        groups = region_groups(bundled_ontology())
        assert Region.FOOT not in groups
        assert sum(len(names) for names in groups.values()) == 25

    def test_declared_positive_rate(self):
        ontology = bundled_ontology()
        assert ontology.attributes[ontology.index_of("wearing hat")].positive_rate == pytest.approx(0.026)


class TestRoundTrip:
    def test_dump_then_load(self):
        ontology = bundled_ontology()
        again = load_ontology(dump_ontology(ontology))
        assert again.attribute_names == ontology.attribute_names
        assert ontology_checksum(again) == ontology_checksum(ontology)

    def test_save_then_load(self, tmp_path):
        ontology = load_ontology(_document())
        path = save_ontology(ontology, tmp_path / "o.json")
        assert load_ontology(path) == ontology

    def test_checksum_changes_with_content(self):
        renamed = _document()
        renamed["name"] = "other"
        assert ontology_checksum(load_ontology(renamed)) != ontology_checksum(
            load_ontology(_document())
        )


class TestValidation:
    def test_traversal_order(self):
        ontology = load_ontology(_document())
        assert ontology.attribute_names == ("cap", "backpack", "up red", "up blue", "skirt")

    def test_body_only_returns_own_attributes(self):
        names = [a.name for a in attributes_of_region(load_ontology(_document()), Region.BODY)]
        assert names == ["backpack"]

    def test_duplicate_attribute(self):
        document = _document()
        document["regions"][4]["attributes"] = [{"name": "cap"}]
        _expect("duplicate-attribute", document)

    def test_unknown_region(self):
        document = _document()
        document["regions"][4]["name"] = "tail"
        _expect("unknown-region", document)

    def test_missing_region(self):
        document = _document()
        del document["regions"][4]
        _expect("missing-region", document)

    def test_duplicate_region(self):
        document = _document()
        document["regions"].append({"name": "foot"})
        _expect("duplicate-region", document)

    def test_cycle(self):
        document = _document()
        document["regions"][2]["composite_of"] = ["body"]
        _expect("cycle", document)

    def test_invalid_composite(self):
        document = _document()
        document["regions"][1]["composite_of"] = ["upper", "foot"]
        _expect("invalid-composite", document)

    def test_only_body_is_composite(self):
        document = _document()
        document["regions"][0]["composite_of"] = ["foot"]
        _expect("invalid-composite", document)

    def test_duplicate_category(self):
        document = _document()
        document["regions"][0]["categories"].append({"name": "hat", "attributes": []})
        _expect("duplicate-category", document)

    def test_category_name_shared_across_regions(self):
        document = _document()
        document["regions"][2]["categories"] = [{"name": "color", "attributes": [{"name": "up green"}]}]
        document["regions"][3]["categories"].append(
            {"name": "color", "attributes": [{"name": "down green"}]}
        )
        ontology = load_ontology(document)
        assert region_of_attribute(ontology, "up green") == Region.UPPER
        assert region_of_attribute(ontology, "down green") == Region.LOWER

        again = load_ontology(dump_ontology(ontology))
        assert again == ontology
        colors = [
            [attr.name for attr in category.attributes]
            for region in dump_ontology(again).regions
            for category in region.categories
            if category.name == "color"
        ]
        assert colors == [["up green"], ["down green"]]

    def test_malformed_document(self):
        document = copy.deepcopy(_document())
        document["regions"][0]["colour"] = "red"
        _expect("malformed-document", document)

    def test_unknown_region_query(self):
        with pytest.raises(OntologyError) as info:
            attributes_of_region(load_ontology(_document()), "tail")
        assert info.value.code == "unknown-region"


def test_relations():
    relations = set(ontology_relations(load_ontology(_document())))
    assert OntologyRelation("upper", "part of", "body") in relations
    assert OntologyRelation("lower", "part of", "body") in relations
    assert OntologyRelation("foot", "part of", "person") in relations
    assert OntologyRelation("head", "has a", "hat") in relations
    assert OntologyRelation("hat", "has a", "cap") in relations
    assert OntologyRelation("upper", "has a", "up red") in relations
    assert OntologyRelation("skirt", "is a", "binary") in relations
