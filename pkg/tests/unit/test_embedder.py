"""Tests for the linear siamese embedder."""

from __future__ import annotations

import numpy as np
import pytest

from semreid.domain.embedder import (
    all_triplets,
    sample_triplets,
    train_embedder,
    triplet_accuracy,
)
from semreid.domain.enums import Split
from semreid.domain.models import DatasetView, Descriptor
from semreid.domain.pipeline_config import EmbedderConfig
from semreid.errors import ModelError


def _view(points: list[tuple[int, list[float]]]) -> DatasetView:
    return DatasetView(
        tuple(
            Descriptor(
                image_id=f"img{i}",
                person_id=pid,
                camera_id=i % 2,
                split=Split.TRAIN,
                feature=np.array(feature + [0.0] * (8 - len(feature))),
            )
            for i, (pid, feature) in enumerate(points)
        )
    )


def _confusing_view() -> DatasetView:
    # Same-identity pairs differ along axis 0 more than identities differ along axis 1.
    return _view([(0, [1.0, 0.0]), (0, [-1.0, 0.0]), (1, [1.0, 1.2]), (1, [-1.0, 1.2])])


class TestSampleTriplets:
    def test_single_identity(self):
        with pytest.raises(ModelError) as info:
            sample_triplets(_view([(0, [0.0]), (0, [1.0])]), 4, np.random.default_rng(0))
        assert info.value.code == "no-negatives"

    def test_no_positive_pairs(self):
        with pytest.raises(ModelError) as info:
            sample_triplets(_view([(0, [0.0]), (1, [1.0])]), 4, np.random.default_rng(0))
        assert info.value.code == "no-positives"

    def test_rows_are_valid(self):
        view = _confusing_view()
        pids = view.person_ids()
        for a, p, n in sample_triplets(view, 64, np.random.default_rng(1)):
            assert a != p
            assert pids[a] == pids[p]
            assert pids[a] != pids[n]


class TestTrainEmbedder:
    def test_learns_to_separate_identities(self):
        view = _confusing_view()
        triplets = all_triplets(view)
        assert triplet_accuracy(
            train_embedder(view, EmbedderConfig(margin=0.5, max_epochs=0), seed=1), view.feature_matrix(), triplets
        ) < 1.0

        model = train_embedder(view, EmbedderConfig(margin=0.5, max_epochs=300), seed=1)
        assert triplet_accuracy(model, view.feature_matrix(), triplets) == 1.0

    def test_loss_history_never_increases(self):
        model = train_embedder(_confusing_view(), EmbedderConfig(margin=0.5, max_epochs=50), seed=2)
        history = np.array(model.loss_history)
        assert np.all(np.diff(history) <= 0.0)
        assert history[-1] < history[0]

    def test_zero_loss_leaves_weights_unchanged(self):
        view = _view([(0, [0.0]), (0, [0.1]), (1, [10.0]), (1, [10.1])])
        model = train_embedder(view, EmbedderConfig(margin=0.5), seed=3)
        assert np.array_equal(model.weights, np.eye(8))
        assert model.loss_history == (0.0,)

    def test_same_seed_same_weights(self):
        config = EmbedderConfig(margin=0.5, max_epochs=20)
        a = train_embedder(_confusing_view(), config, seed=4)
        b = train_embedder(_confusing_view(), config, seed=4)
        assert np.array_equal(a.weights, b.weights)

    def test_single_identity_has_no_negatives(self):
        with pytest.raises(ModelError) as info:
            train_embedder(_view([(0, [0.0]), (0, [1.0])]), EmbedderConfig(margin=0.5), seed=0)
        assert info.value.code == "no-negatives"

    def test_empty_train(self):
        with pytest.raises(ModelError) as info:
            train_embedder(DatasetView(), EmbedderConfig(margin=0.5), seed=0)
        assert info.value.code == "empty-train"

    def test_shared_weights_embed_every_branch(self):
        model = train_embedder(_confusing_view(), EmbedderConfig(margin=0.5, max_epochs=5), seed=5)
        features = _confusing_view().feature_matrix()
        assert np.allclose(model.embed(features), features @ model.weights)
        assert model.input_dim == model.output_dim == 8

    def test_projection_dimension(self):
        model = train_embedder(
            _confusing_view(), EmbedderConfig(margin=0.5, embed_dim=4, max_epochs=5), seed=6
        )
        assert model.weights.shape == (8, 4)

    def test_config_requires_positive_margin(self):
        with pytest.raises(ValueError, match="margin must be positive"):
            EmbedderConfig(margin=0.0)
