"""Semantic-level person re-identification: ontology, calibration, filtering, ranking."""

__version__ = "0.1.0"
