"""Enumerations used across the semreid domain."""

from __future__ import annotations

from enum import StrEnum


class Region(StrEnum):
    """Body regions of the attribute ontology.

    ``body`` is the composite of ``upper`` and ``lower``.
    """

    HEAD = "head"
    UPPER = "upper"
    LOWER = "lower"
    FOOT = "foot"
    BODY = "body"


# Horizontal stripes, top to bottom, each a quarter of the descriptor.
STRIPE_ORDER: tuple[Region, ...] = (Region.HEAD, Region.UPPER, Region.LOWER, Region.FOOT)

BODY_PARTS: frozenset[Region] = frozenset({Region.UPPER, Region.LOWER})


class Split(StrEnum):
    """Dataset split tags."""

    TRAIN = "train"
    QUERY = "query"
    GALLERY = "gallery"


class FilterMode(StrEnum):
    """Attribute pre-filtering modes."""

    NONE = "none"
    SINGLE = "single"
    ATTRIBUTE_SET = "attribute_set"
    REGION = "region"


class RankOrder(StrEnum):
    """Composition order of the two online stages."""

    FILTER_FIRST = "filter-first"
    RANK_FIRST = "rank-first"


class AttributeScope(StrEnum):
    """Input scope of an attribute classifier group."""

    LOCAL = "local"
    GLOBAL = "global"


class Scenario(StrEnum):
    """Synthetic dataset families."""

    DEFAULT = "default"
    CONFUSABLE = "confusable"
