"""Domain model and pure rules of the semantic Re-ID engine.

* Dataclasses for every entity (see :mod:`models`) and enumerations.
* Hyper-parameter objects (see :mod:`pipeline_config`).
* The offline phase: ontology, datasets, toy models, threshold calibration.
* The online phase: attribute pre-filtering, ranking and evaluation.

Everything here works in memory; :mod:`semreid.runtime` persists results
through the artifact store.
"""

from . import (
    attributes,
    dataset,
    embedder,
    enums,
    imbalance,
    losses,
    metrics,
    models,
    ontology,
    pipeline_config,
    retrieval,
    synth,
)

__all__ = [
    "attributes",
    "dataset",
    "embedder",
    "enums",
    "imbalance",
    "losses",
    "metrics",
    "models",
    "ontology",
    "pipeline_config",
    "retrieval",
    "synth",
]
