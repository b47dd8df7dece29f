"""Tests for MCC and per-attribute threshold calibration."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semreid.domain.imbalance import (
    apply_thresholds,
    binarize,
    calibrate,
    calibrate_attribute,
    calibrate_matrix,
    confusion_counts,
    mcc,
    uniform_thresholds,
)
from semreid.domain.models import ConfusionCounts
from semreid.domain.pipeline_config import DEFAULT_GRID
from semreid.errors import CalibrationError

counts = st.builds(
    ConfusionCounts,
    tp=st.integers(0, 10_000),
    tn=st.integers(0, 10_000),
    fp=st.integers(0, 10_000),
    fn=st.integers(0, 10_000),
)


def _oracle_mcc(preds: list[int], labels: list[int]) -> float:
    tp = sum(1 for p, y in zip(preds, labels, strict=True) if p and y)
    tn = sum(1 for p, y in zip(preds, labels, strict=True) if not p and not y)
    fp = sum(1 for p, y in zip(preds, labels, strict=True) if p and not y)
    fn = sum(1 for p, y in zip(preds, labels, strict=True) if not p and y)
    denominator = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return 0.0 if denominator == 0 else (tp * tn - fp * fn) / math.sqrt(denominator)


def _oracle_calibrate(probs: list[float], labels: list[int]) -> tuple[float, float]:
    best_t, best_m = None, -2.0
    for t in DEFAULT_GRID:
        m = _oracle_mcc([int(p >= t) for p in probs], labels)
        if m > best_m:
            best_t, best_m = t, m
    return best_t, best_m


class TestMcc:
    def test_perfect(self):
        assert mcc(ConfusionCounts(5, 5, 0, 0)) == pytest.approx(1.0, abs=1e-9)

    def test_inverted(self):
        assert mcc(ConfusionCounts(0, 0, 5, 5)) == pytest.approx(-1.0, abs=1e-9)

    def test_worked_example(self):
        assert mcc(ConfusionCounts(3, 4, 1, 2)) == pytest.approx(0.408248290463863, abs=1e-9)

    def test_degenerate_denominator(self):
        assert mcc(ConfusionCounts(tp=0, tn=97, fp=0, fn=3)) == 0.0

    @given(c=counts)
    def test_range(self, c):
        assert -1.0 <= mcc(c) <= 1.0

    @given(c=counts)
    def test_swap_symmetry(self, c):
        assert mcc(c) == mcc(ConfusionCounts(tp=c.tn, tn=c.tp, fp=c.fn, fn=c.fp))

    def test_confusion_counts(self):
        c = confusion_counts(np.array([1, 1, 0, 0, 1]), np.array([1, 0, 0, 1, 1]))
        assert c == ConfusionCounts(tp=2, tn=1, fp=1, fn=1)
        assert c.total == 5

    @given(
        pairs=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50)
    )
    def test_joint_inversion(self, pairs):
        preds = np.array([p for p, _ in pairs])
        labels = np.array([y for _, y in pairs])
        assert mcc(confusion_counts(preds, labels)) == mcc(confusion_counts(1 - preds, 1 - labels))


class TestBinarize:
    def test_inclusive_threshold(self):
        assert binarize(np.array([0.2, 0.5, 0.9]), 0.5).tolist() == [0, 1, 1]

    def test_low_threshold_all_ones(self):
        assert binarize(np.array([0.01, 0.3, 1.0]), 0.01).tolist() == [1, 1, 1]

    def test_empty(self):
        assert binarize(np.array([]), 0.5).tolist() == []

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2, 1.5])
    def test_threshold_range(self, threshold):
        with pytest.raises(CalibrationError) as info:
            binarize(np.array([0.5]), threshold)
        assert info.value.code == "threshold-range"


class TestCalibrate:
    def test_separable_example(self):
        entry = calibrate_attribute(np.array([0.2, 0.4, 0.6, 0.9]), np.array([0, 0, 1, 1]))
        assert entry.threshold == pytest.approx(0.41)
        assert entry.mcc == pytest.approx(1.0)

    def test_all_zero_labels(self):
        entry = calibrate_attribute(np.array([0.1, 0.7, 0.3]), np.zeros(3))
        assert entry.threshold == pytest.approx(0.01)
        assert entry.mcc == 0.0

    def test_exact_probabilities(self):
        entry = calibrate_attribute(np.array([0.0, 1.0, 1.0, 0.0]), np.array([0, 1, 1, 0]))
        assert entry.threshold == pytest.approx(0.01)
        assert entry.mcc == pytest.approx(1.0)

    def test_per_attribute_mapping(self):
        table = calibrate(
            {"a": np.array([0.2, 0.4, 0.6, 0.9]), "b": np.array([0.9, 0.8, 0.1, 0.3])},
            {"a": np.array([0, 0, 1, 1]), "b": np.array([1, 1, 0, 0])},
        )
        assert list(table.entries) == ["a", "b"]
        assert table.threshold_of("a") == pytest.approx(0.41)
        assert table.threshold_of("b") == pytest.approx(0.31)

    def test_misaligned(self):
        with pytest.raises(CalibrationError) as info:
            calibrate({"a": np.array([0.1, 0.2])}, {"a": np.array([1])})
        assert info.value.code == "misaligned"

    def test_missing_labels_for_attribute(self):
        with pytest.raises(CalibrationError) as info:
            calibrate({"a": np.array([0.1])}, {"b": np.array([1])})
        assert info.value.code == "misaligned"

    def test_empty_grid(self):
        with pytest.raises(CalibrationError) as info:
            calibrate({"a": np.array([0.1])}, {"a": np.array([1])}, grid=())
        assert info.value.code == "empty-grid"

    def test_threshold_from_custom_grid(self):
        grid = (0.3, 0.7)
        table = calibrate({"a": np.array([0.2, 0.4, 0.6, 0.9])}, {"a": np.array([0, 0, 1, 1])}, grid)
        assert table.threshold_of("a") in grid

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            n = int(rng.integers(1, 201))
            m = int(rng.integers(1, 26))
            labels = (rng.random((n, m)) < rng.uniform(0.02, 0.6)).astype(np.int8)
            probs = np.clip(labels * rng.uniform(0.2, 0.8) + rng.normal(0.2, 0.25, size=(n, m)), 0, 1)
            names = [f"attr{j}" for j in range(m)]
            table = calibrate_matrix(probs, labels, names)
            for j, name in enumerate(names):
                threshold, score = _oracle_calibrate(probs[:, j].tolist(), labels[:, j].tolist())
                assert table.entries[name].threshold == threshold
                assert table.entries[name].mcc == pytest.approx(score, abs=1e-12)


def test_uniform_thresholds_and_apply():
    table = uniform_thresholds(["a", "b"], 0.5)
    binary = apply_thresholds(np.array([[0.5, 0.49], [0.1, 0.9]]), table, ["a", "b"])
    assert binary.tolist() == [[1, 0], [0, 1]]


def test_apply_thresholds_requires_every_attribute():
    with pytest.raises(CalibrationError):
        apply_thresholds(np.zeros((1, 2)), uniform_thresholds(["a"]), ["a", "b"])
