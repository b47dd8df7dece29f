"""Tests for attribute pre-filtering, ranking and the query pipeline."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semreid.domain.enums import FilterMode, RankOrder, Region, Split
from semreid.domain.imbalance import uniform_thresholds
from semreid.domain.models import (
    DatasetView,
    Descriptor,
    FilterSpec,
    RankedItem,
    ThresholdEntry,
    ThresholdTable,
)
from semreid.domain.ontology import bundled_ontology
from semreid.domain.retrieval import (
    attribute_filter,
    concat_region_feature,
    format_filter_spec,
    parse_filter_spec,
    protocol_mask,
    query,
    rank_by_distance,
    run_queries,
    select_best_attributes,
    with_local_region,
)
from semreid.errors import RetrievalError

ONTOLOGY = bundled_ontology()
M = len(ONTOLOGY)
TABLE = uniform_thresholds(ONTOLOGY.attribute_names, 0.5)


def _probs(**values: float) -> np.ndarray:
    probs = np.zeros(M)
    for name, value in values.items():
        probs[ONTOLOGY.index_of(name.replace("_", " "))] = value
    return probs


def _item(image_id: str, feature, *, pid: int = 0, cam: int = 0, split=Split.GALLERY, **attrs):
    return Descriptor(
        image_id=image_id,
        person_id=pid,
        camera_id=cam,
        split=split,
        feature=np.array(feature, dtype=float),
        attr_probs=_probs(**attrs),
    )


def _bits(**values: int) -> np.ndarray:
    return _probs(**values).astype(np.int8)


class TestAttributeFilter:
    def test_single_attribute(self):
        gallery = np.stack([_bits(down_black=1), _bits(down_black=0), _bits(down_black=1)])
        outcome = attribute_filter(_bits(down_black=1), gallery, FilterSpec.single("down black"), ONTOLOGY)
        assert outcome.survivors == (0, 2)
        assert outcome.removed_count == 1
        assert not outcome.fallback_used

    def test_attribute_set_is_conjunctive(self):
        names = ["up red", "up white", "up yellow", "lower length", "down black"]
        query_bits = _bits(up_red=1, lower_length=1, down_black=1)
        g1 = _bits(up_red=1, lower_length=1)
        g2 = _bits(up_red=1, lower_length=1, down_black=1)
        outcome = attribute_filter(query_bits, np.stack([g1, g2]), FilterSpec.attribute_set(names), ONTOLOGY)
        assert outcome.survivors == (1,)

    def test_fallback_on_empty(self):
        gallery = np.stack([_bits(), _bits()])
        outcome = attribute_filter(_bits(up_red=1), gallery, FilterSpec.single("up red"), ONTOLOGY)
        assert outcome.survivors == (0, 1)
        assert outcome.fallback_used

    def test_no_fallback(self):
        gallery = np.stack([_bits(), _bits()])
        spec = FilterSpec.single("up red", fallback_on_empty=False)
        outcome = attribute_filter(_bits(up_red=1), gallery, spec, ONTOLOGY)
        assert outcome.survivors == ()
        assert outcome.removed_count == 2

    def test_region_filter_uses_region_attributes(self):
        gallery = np.stack([_bits(gender=1), _bits(up_red=1)])
        outcome = attribute_filter(_bits(), gallery, FilterSpec.all_of_region(Region.HEAD), ONTOLOGY)
        assert outcome.survivors == (1,)

    def test_unknown_attribute(self):
        with pytest.raises(RetrievalError) as info:
            attribute_filter(_bits(), np.stack([_bits()]), FilterSpec.single("up orange"), ONTOLOGY)
        assert info.value.code == "unknown-attribute"

    @given(rows=st.lists(st.lists(st.integers(0, 1), min_size=M, max_size=M), min_size=1, max_size=12))
    def test_counts_add_up(self, rows):
        gallery = np.array(rows, dtype=np.int8)
        spec = FilterSpec.single("down black", fallback_on_empty=False)
        outcome = attribute_filter(_bits(down_black=1), gallery, spec, ONTOLOGY)
        assert outcome.removed_count + len(outcome.survivors) == len(rows)


class TestRankByDistance:
    def test_ascending(self):
        view = DatasetView((_item("g2", [3, 0]), _item("g1", [1, 0])))
        ranking = rank_by_distance(np.zeros(2), view)
        assert [(i.image_id, i.distance) for i in ranking] == [("g1", 1.0), ("g2", 3.0)]

    def test_identical_feature_ranks_first(self):
        view = DatasetView((_item("g1", [1, 1]), _item("g2", [0.5, -2])))
        top = rank_by_distance(np.array([0.5, -2.0]), view)[0]
        assert top == RankedItem("g2", 0.0)

    def test_ties_by_image_id(self):
        view = DatasetView((_item("b", [0, 1]), _item("a", [1, 0]), _item("c", [-1, 0])))
        assert [i.image_id for i in rank_by_distance(np.zeros(2), view)] == ["a", "b", "c"]

    def test_empty(self):
        assert rank_by_distance(np.zeros(2), DatasetView()) == ()

    def test_dimension_mismatch(self):
        with pytest.raises(RetrievalError) as info:
            rank_by_distance(np.zeros(3), DatasetView((_item("g", [0, 1]),)))
        assert info.value.code == "dimension-mismatch"

    @given(
        points=st.lists(
            st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=20
        )
    )
    def test_total_order(self, points):
        view = DatasetView(tuple(_item(f"g{i:02d}", p) for i, p in enumerate(points)))
        ranking = rank_by_distance(np.zeros(2), view)
        assert len(ranking) == len(points)
        assert len({item.image_id for item in ranking}) == len(points)
        distances = [item.distance for item in ranking]
        assert distances == sorted(distances)


class TestProtocolMask:
    def test_same_person_same_camera_excluded(self):
        q = _item("q", [0, 0], pid=1, cam=2, split=Split.QUERY)
        gallery = DatasetView(
            (_item("same", [0, 0], pid=1, cam=2), _item("other-cam", [0, 0], pid=1, cam=3), _item("other", [0, 0], pid=2, cam=2))
        )
        assert protocol_mask(q, gallery).image_ids == ("other-cam", "other")

    def test_disabled(self):
        q = _item("q", [0, 0], pid=1, cam=2, split=Split.QUERY)
        gallery = DatasetView((_item("same", [0, 0], pid=1, cam=2),))
        assert protocol_mask(q, gallery, enabled=False) is gallery


class TestQuery:
    def _scene(self):
        q = _item("q", [0.0, 0.0], pid=1, cam=0, split=Split.QUERY, down_black=0.9)
        gallery = DatasetView(
            (
                _item("impostor", [0.1, 0.0], pid=2, cam=1, down_black=0.1),
                _item("match", [0.3, 0.0], pid=1, cam=1, down_black=0.8),
                _item("far", [5.0, 0.0], pid=3, cam=1, down_black=0.7),
            )
        )
        return q, gallery

    def test_no_filter_is_plain_knn(self):
        q, gallery = self._scene()
        result = query(q, gallery, TABLE, FilterSpec.none(), ONTOLOGY)
        assert result.ranking == rank_by_distance(q.feature, gallery)
        assert result.removed_count == 0

    def test_filter_promotes_true_match(self):
        q, gallery = self._scene()
        assert query(q, gallery, TABLE, FilterSpec.none(), ONTOLOGY).ranked_ids[0] == "impostor"
        result = query(q, gallery, TABLE, FilterSpec.single("down black"), ONTOLOGY)
        assert result.ranked_ids == ("match", "far")
        assert result.removed_count == 1

    def test_orders_agree(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            q = Descriptor("q", 0, 0, Split.QUERY, rng.normal(size=4), attr_probs=rng.random(M))
            gallery = DatasetView(
                tuple(
                    Descriptor(f"g{i}", int(rng.integers(3)), int(rng.integers(2)), Split.GALLERY,
                               rng.normal(size=4), attr_probs=rng.random(M))
                    for i in range(12)
                )
            )
            spec = FilterSpec.attribute_set(ONTOLOGY.attribute_names[:2])
            first = query(q, gallery, TABLE, spec, ONTOLOGY, order=RankOrder.FILTER_FIRST)
            second = query(q, gallery, TABLE, spec, ONTOLOGY, order=RankOrder.RANK_FIRST)
            assert first == second

    def test_query_uses_calibrated_thresholds(self):
        q, gallery = self._scene()
        entries = dict(TABLE.entries)
        entries["down black"] = ThresholdEntry(0.05, 1.0)
        low = ThresholdTable(entries=entries, grid=TABLE.grid)
        result = query(q, gallery, low, FilterSpec.single("down black"), ONTOLOGY)
        assert result.ranked_ids == ("impostor", "match", "far")

    def test_missing_probabilities(self):
        q, gallery = self._scene()
        bare = Descriptor("q", 1, 0, Split.QUERY, q.feature)
        with pytest.raises(RetrievalError) as info:
            query(bare, gallery, TABLE, FilterSpec.single("down black"), ONTOLOGY)
        assert info.value.code == "missing-probabilities"

    def test_run_queries_keeps_order(self):
        q, gallery = self._scene()
        queries = DatasetView(tuple(
            Descriptor(f"q{i}", 1, 0, Split.QUERY, q.feature + i, attr_probs=q.attr_probs) for i in range(6)
        ))
        serial = run_queries(queries, gallery, TABLE, FilterSpec.none(), ONTOLOGY)
        threaded = run_queries(queries, gallery, TABLE, FilterSpec.none(), ONTOLOGY, max_workers=3)
        assert serial == threaded
        assert [r.query_id for r in serial] == [f"q{i}" for i in range(6)]


class TestFilterSpecs:
    def test_parse_forms(self):
        assert parse_filter_spec("none") == FilterSpec.none()
        assert parse_filter_spec("attr:down black") == FilterSpec.single("down black")
        assert parse_filter_spec("attrs:up red, down black") == FilterSpec.attribute_set(
            ["up red", "down black"]
        )
        assert parse_filter_spec("region:upper") == FilterSpec.all_of_region(Region.UPPER)

    def test_parse_best(self):
        entries = {name: ThresholdEntry(0.5, 0.1) for name in ONTOLOGY.attribute_names}
        entries["bag"] = ThresholdEntry(0.3, 0.9)
        entries["up red"] = ThresholdEntry(0.4, 0.8)
        table = ThresholdTable(entries=entries, grid=(0.3, 0.4, 0.5))
        spec = parse_filter_spec("best:2", ontology=ONTOLOGY, table=table)
        assert spec.mode == FilterMode.ATTRIBUTE_SET
        assert spec.attributes == ("bag", "up red")

    def test_parse_best_within_region(self):
        entries = {name: ThresholdEntry(0.5, 0.1) for name in ONTOLOGY.attribute_names}
        entries["bag"] = ThresholdEntry(0.3, 0.9)
        entries["up red"] = ThresholdEntry(0.4, 0.8)
        table = ThresholdTable(entries=entries, grid=(0.3, 0.4, 0.5))

        upper = parse_filter_spec("best:1@upper", ontology=ONTOLOGY, table=table)
        assert upper.attributes == ("up red",)
        body = parse_filter_spec("best:2 @ body", ontology=ONTOLOGY, table=table)
        assert body.attributes == ("bag", "backpack")
        head = parse_filter_spec("best:1@head", ontology=ONTOLOGY, table=table)
        assert head.attributes == ("gender",)
        assert format_filter_spec(upper) == "attrs:up red"

    @pytest.mark.parametrize(
        ("text", "code"),
        [("best:1@tail", "unknown-region"), ("best:1@foot", "malformed-filter"), ("best:x@upper", "malformed-filter")],
    )
    def test_parse_best_within_region_rejects(self, text, code):
        table = ThresholdTable(
            entries={name: ThresholdEntry(0.5, 0.1) for name in ONTOLOGY.attribute_names}, grid=(0.5,)
        )
        with pytest.raises(RetrievalError) as info:
            parse_filter_spec(text, ontology=ONTOLOGY, table=table)
        assert info.value.code == code

    @pytest.mark.parametrize("text", ["", "attr:", "bogus:1", "region:tail", "best:2"])
    def test_parse_rejects(self, text):
        with pytest.raises(RetrievalError):
            parse_filter_spec(text)

    def test_format_round_trip(self):
        for text in ("none", "attr:bag", "attrs:bag,up red", "region:body"):
            assert format_filter_spec(parse_filter_spec(text)) == text

    def test_select_best_ties_keep_ontology_order(self):
        scores = dict.fromkeys(ONTOLOGY.attribute_names, 0.5)
        assert select_best_attributes(scores, 3, ONTOLOGY) == ("gender", "hair length", "wearing hat")

    def test_select_best_per_region(self):
        scores = {name: float(i) for i, name in enumerate(ONTOLOGY.attribute_names)}
        assert select_best_attributes(scores, 1, ONTOLOGY, region=Region.HEAD) == ("wearing hat",)

    def test_select_best_invalid_k(self):
        with pytest.raises(RetrievalError) as info:
            select_best_attributes({}, 0, ONTOLOGY)
        assert info.value.code == "invalid-k"


class TestLocalRegion:
    def test_concat(self):
        raw = np.arange(8.0)
        out = concat_region_feature(np.array([9.0, 9.0]), raw, Region.UPPER)
        assert out.tolist() == [9.0, 9.0, 2.0, 3.0]

    def test_view(self):
        raw = DatasetView((_item("a", np.arange(8.0)),))
        embedded = DatasetView((_item("a", [1.0, 2.0]),))
        combined = with_local_region(embedded, raw, Region.FOOT)
        assert combined[0].feature.tolist() == [1.0, 2.0, 6.0, 7.0]

    def test_misaligned_views(self):
        with pytest.raises(RetrievalError):
            with_local_region(DatasetView((_item("a", [1.0]),)), DatasetView((_item("b", [1.0] * 4),)), Region.HEAD)
