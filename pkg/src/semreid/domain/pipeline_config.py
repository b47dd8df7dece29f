"""Declarative hyper-parameters for the offline and online phases."""

from __future__ import annotations

from dataclasses import dataclass, field

from .enums import RankOrder

DEFAULT_GRID: tuple[float, ...] = tuple(i / 100 for i in range(1, 100))
"""Candidate thresholds 0.01, 0.02, ..., 0.99."""

BCE_EPSILON = 1e-7


@dataclass(frozen=True, slots=True)
class EmbedderConfig:
    """Linear siamese embedder training.

    ``margin`` has no default: the triplet margin is a required choice.
    """

    margin: float
    embed_dim: int | None = None  # None keeps the input dimension
    step_size: float = 0.01
    max_epochs: int = 100
    num_triplets: int = 512
    min_step: float = 1e-8  # backtracking floor

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be non-negative, got {self.max_epochs}")
        if self.num_triplets < 1:
            raise ValueError(f"num_triplets must be positive, got {self.num_triplets}")
        if self.embed_dim is not None and self.embed_dim < 1:
            raise ValueError(f"embed_dim must be positive, got {self.embed_dim}")


@dataclass(frozen=True, slots=True)
class ClassifierConfig:
    """Logistic attribute heads trained on averaged BCE."""

    step_size: float = 0.5
    max_epochs: int = 500
    epsilon: float = BCE_EPSILON

    def __post_init__(self) -> None:
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be non-negative, got {self.max_epochs}")


@dataclass(frozen=True, slots=True)
class CalibrationConfig:
    grid: tuple[float, ...] = DEFAULT_GRID


@dataclass(frozen=True, slots=True)
class RetrievalConfig:
    cmc_ks: tuple[int, ...] = (1, 5, 10)
    fallback_on_empty: bool = True
    order: RankOrder = RankOrder.FILTER_FIRST


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Top-level container for every stage."""

    embedder: EmbedderConfig = field(default_factory=lambda: EmbedderConfig(margin=0.5))
    classifier: ClassifierConfig = ClassifierConfig()
    calibration: CalibrationConfig = CalibrationConfig()
    retrieval: RetrievalConfig = RetrievalConfig()


DEFAULT_PIPELINE = PipelineConfig()
