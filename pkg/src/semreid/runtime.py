"""Service layer behind the CLI: offline and online stages on disk.

Offline: ``gen_synth`` -> ``train_toy`` -> ``calibrate``.
Online: ``query`` -> ``evaluate``. ``pipeline`` chains all five into one
output directory. Every document written carries the checksum of the
ontology it was built against and the stage configuration (never paths),
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from semreid.artifacts import (
    EmbedderPayload,
    EvalReportDocument,
    GroupPayload,
    ModelDocument,
    QueryResultPayload,
    RankedPayload,
    RankingDocument,
    ThresholdDocument,
    ThresholdPayload,
)
from semreid.config import Settings, get_settings
from semreid.domain import attributes, embedder, imbalance, metrics, retrieval, synth
from semreid.domain.dataset import load_dataset, split_views, view_of, with_attr_probs, write_dataset
from semreid.domain.enums import AttributeScope, RankOrder, Region, Scenario, Split
from semreid.domain.models import (
    Dataset,
    DatasetView,
    EvalReport,
    LinearEmbedder,
    QueryResult,
    RankedItem,
    RegionClassifierGroup,
    ThresholdEntry,
    ThresholdTable,
)
from semreid.domain.ontology import load_ontology, ontology_checksum
from semreid.domain.pipeline_config import DEFAULT_PIPELINE, PipelineConfig
from semreid.errors import CalibrationError, ChecksumError, SemReidError
from semreid.repository import JsonArtifactStore

logger = logging.getLogger(__name__)

DATASET_DIR = "dataset"
MODEL_NAME = "model.json"
THRESHOLDS_NAME = "thresholds.json"
RANKINGS_NAME = "rankings.json"
REPORT_NAME = "report.json"


# ---------------------------------------------------------------------------
# Document conversion


def embedder_to_payload(model: LinearEmbedder) -> EmbedderPayload:
    return EmbedderPayload(
        weights=model.weights.tolist(),
        step_size=model.step_size,
        max_epochs=model.max_epochs,
        margin=model.margin,
        loss_history=list(model.loss_history),
    )


def embedder_from_payload(payload: EmbedderPayload) -> LinearEmbedder:
    return LinearEmbedder(
        weights=np.array(payload.weights, dtype=np.float64),
        step_size=payload.step_size,
        max_epochs=payload.max_epochs,
        margin=payload.margin,
        loss_history=tuple(payload.loss_history),
    )


def group_to_payload(group: RegionClassifierGroup) -> GroupPayload:
    return GroupPayload(
        scope=group.scope.value,
        region=None if group.region is None else group.region.value,
        attributes=list(group.attributes),
        weights=group.weights.tolist(),
        biases=group.biases.tolist(),
        degenerate=list(group.degenerate),
    )


def group_from_payload(payload: GroupPayload) -> RegionClassifierGroup:
    weights = np.array(payload.weights, dtype=np.float64).reshape(len(payload.attributes), -1)
    return RegionClassifierGroup(
        scope=AttributeScope(payload.scope),
        region=None if payload.region is None else Region(payload.region),
        attributes=tuple(payload.attributes),
        weights=weights,
        biases=np.array(payload.biases, dtype=np.float64),
        degenerate=tuple(payload.degenerate),
    )


def table_to_document(
    table: ThresholdTable,
    names: tuple[str, ...],
    *,
    split: Split,
    provenance: dict[str, Any],
) -> ThresholdDocument:
    return ThresholdDocument(
        ontology_checksum=table.ontology_checksum,
        grid=list(table.grid),
        calibration_split=split.value,
        attribute_order=list(names),
        entries={
            name: ThresholdPayload(threshold=entry.threshold, mcc=entry.mcc)
            for name, entry in table.entries.items()
        },
        provenance=provenance,
    )


def table_from_document(document: ThresholdDocument) -> ThresholdTable:
    return ThresholdTable(
        entries={
            name: ThresholdEntry(payload.threshold, payload.mcc)
            for name, payload in document.entries.items()
        },
        grid=tuple(document.grid),
        ontology_checksum=document.ontology_checksum,
    )


def result_to_payload(result: QueryResult) -> QueryResultPayload:
    return QueryResultPayload(
        query_id=result.query_id,
        ranking=[RankedPayload(image_id=i.image_id, distance=i.distance) for i in result.ranking],
        removed_count=result.removed_count,
        fallback_used=result.fallback_used,
    )


def result_from_payload(payload: QueryResultPayload) -> QueryResult:
    return QueryResult(
        query_id=payload.query_id,
        ranking=tuple(RankedItem(item.image_id, item.distance) for item in payload.ranking),
        removed_count=payload.removed_count,
        fallback_used=payload.fallback_used,
    )


def report_to_document(
    report: EvalReport, *, checksum: str, provenance: dict[str, Any]
) -> EvalReportDocument:
    return EvalReportDocument(
        ontology_checksum=checksum,
        cmc={str(k): v for k, v in report.cmc.items()},
        map=report.map_score,
        per_attr_f1=dict(report.per_attr_f1),
        avg_f1=report.avg_f1,
        num_queries=report.num_queries,
        skipped_queries=report.skipped_queries,
        provenance=provenance,
    )


def read_document[M: BaseModel](path: Path, model: type[M]) -> M:
    """Load ``path`` as ``model``; schema violations become ``malformed-document``."""

    try:
        return JsonArtifactStore(path.parent).load(path.name, model)
    except ValidationError as exc:
        raise SemReidError("malformed-document", f"{path.name}: {exc}") from exc


def write_document(path: Path, document: BaseModel) -> Path:
    return JsonArtifactStore(path.parent).save(path.name, document)


def _require_checksum(expected: str, found: str, *, artifact: str) -> None:
    if expected != found:
        raise ChecksumError(expected, found, artifact=artifact)


# ---------------------------------------------------------------------------
# Service


class ReidService:
    """Runs pipeline stages against artifacts on disk."""

    def __init__(
        self, settings: Settings | None = None, config: PipelineConfig = DEFAULT_PIPELINE
    ) -> None:
        self.settings = settings or get_settings()
        self.config = config

    # -- offline --------------------------------------------------------------

    def gen_synth(
        self,
        out_dir: Path,
        cfg: synth.SynthConfig,
        *,
        scenario: Scenario = Scenario.DEFAULT,
        designated_attribute: str | None = None,
        pair_gap: float = 0.0,
    ) -> Path:
        """Generate a synthetic dataset directory; returns the manifest path."""

        if scenario == Scenario.CONFUSABLE:
            dataset = synth.scenario_confusable(
                cfg, designated_attribute=designated_attribute, pair_gap=pair_gap
            )
            provenance = synth.synth_config_provenance(
                cfg,
                scenario=scenario.value,
                designated_attribute=designated_attribute or cfg.ontology.attribute_names[0],
                pair_gap=pair_gap,
            )
        else:
            dataset = synth.generate(cfg)
            provenance = synth.synth_config_provenance(cfg, scenario=scenario.value)
        return write_dataset(dataset, out_dir, provenance={"command": "gen-synth", **provenance})

    def load(self, dataset_path: Path, ontology_path: Path | None = None) -> Dataset:
        """Load a dataset, optionally pinning the ontology it must match."""

        ontology = None if ontology_path is None else load_ontology(ontology_path)
        return load_dataset(dataset_path, ontology=ontology)

    def train_toy(
        self,
        dataset_path: Path,
        out_path: Path,
        *,
        seed: int,
        scope: AttributeScope = AttributeScope.LOCAL,
        ontology_path: Path | None = None,
    ) -> ModelDocument:
        """Fit the embedder and attribute groups on the train split."""

        dataset = self.load(dataset_path, ontology_path)
        train = view_of(dataset, Split.TRAIN)
        logger.info("training toy models on %d train descriptors", len(train))
        linear = embedder.train_embedder(train, self.config.embedder, seed=seed)
        if scope == AttributeScope.GLOBAL:
            groups: tuple[RegionClassifierGroup, ...] = (
                attributes.train_global_classifier(train, dataset.ontology, self.config.classifier),
            )
        else:
            groups = attributes.train_attribute_groups(
                train,
                dataset.ontology,
                self.config.classifier,
                max_workers=self.settings.max_workers,
            )
        document = ModelDocument(
            ontology_checksum=ontology_checksum(dataset.ontology),
            embedder=embedder_to_payload(linear),
            groups=[group_to_payload(group) for group in groups],
            provenance={
                "command": "train-toy",
                "seed": seed,
                "scope": scope.value,
                "embedder": dataclasses.asdict(self.config.embedder),
                "classifier": dataclasses.asdict(self.config.classifier),
            },
        )
        write_document(out_path, document)
        return document

    def calibrate(
        self,
        dataset_path: Path,
        out_path: Path,
        *,
        model_path: Path | None = None,
        split: Split | None = None,
        uniform: float | None = None,
        ontology_path: Path | None = None,
    ) -> ThresholdDocument:
        """Per-attribute MCC thresholds from one split's predictions.

        ``uniform`` writes the same threshold for every attribute instead.
        """
        dataset = self.load(dataset_path, ontology_path)
        checksum = ontology_checksum(dataset.ontology)
        split = split or self.settings.calibration_split
        names = dataset.ontology.attribute_names
        if uniform is not None:
            table = imbalance.uniform_thresholds(names, uniform, ontology_checksum=checksum)
        else:
            predicted = self._with_predictions(dataset, model_path, checksum)
            view = view_of(predicted, split)
            probs, labels = view.prob_matrix(), view.label_matrix()
            if probs is None or labels is None:
                raise CalibrationError(
                    "missing-labels", f"the {split} split needs attr_probs and attr_labels"
                )
            table = imbalance.calibrate_matrix(
                probs, labels, names, self.config.calibration.grid, ontology_checksum=checksum
            )
        document = table_to_document(
            table,
            names,
            split=split,
            provenance={
                "command": "calibrate",
                "uniform": uniform,
                "predictions": "model" if model_path is not None else "dataset",
            },
        )
        write_document(out_path, document)
        return document

    # -- online ---------------------------------------------------------------

    def query(
        self,
        dataset_path: Path,
        thresholds_path: Path,
        out_path: Path,
        *,
        filter_text: str = "none",
        order: RankOrder | None = None,
        mask: bool | None = None,
        model_path: Path | None = None,
        local_region: Region | None = None,
        ontology_path: Path | None = None,
    ) -> RankingDocument:
        """Rank the gallery for every query image and write the rankings."""

        dataset = self.load(dataset_path, ontology_path)
        checksum = ontology_checksum(dataset.ontology)
        table = self._load_table(thresholds_path, checksum)
        order = order or self.config.retrieval.order
        mask = self.settings.protocol_mask if mask is None else mask

        queries, gallery = self._online_views(dataset, model_path, checksum, local_region)
        spec = retrieval.parse_filter_spec(
            filter_text,
            ontology=dataset.ontology,
            table=table,
            fallback_on_empty=self.config.retrieval.fallback_on_empty,
        )
        results = retrieval.run_queries(
            queries,
            gallery,
            table,
            spec,
            dataset.ontology,
            order=order,
            mask=mask,
            max_workers=self.settings.max_workers,
        )
        document = RankingDocument(
            ontology_checksum=checksum,
            filter=retrieval.format_filter_spec(spec),
            order=order.value,
            mask=mask,
            results=[result_to_payload(result) for result in results],
            provenance={
                "command": "query",
                "filter": filter_text,
                "local_region": None if local_region is None else local_region.value,
                "features": "embedded" if model_path is not None else "raw",
            },
        )
        write_document(out_path, document)
        return document

    def evaluate(
        self,
        dataset_path: Path,
        rankings_path: Path,
        out_path: Path,
        *,
        thresholds_path: Path | None = None,
        model_path: Path | None = None,
        ontology_path: Path | None = None,
    ) -> EvalReportDocument:
        """Score rankings (CMC, mAP) and, given thresholds, attribute F1 on the test splits."""

        dataset = self.load(dataset_path, ontology_path)
        checksum = ontology_checksum(dataset.ontology)
        rankings = read_document(rankings_path, RankingDocument)
        _require_checksum(checksum, rankings.ontology_checksum, artifact="rankings")

        _train, queries, gallery = split_views(dataset)
        report = metrics.evaluate_retrieval(
            [result_from_payload(payload) for payload in rankings.results],
            queries,
            gallery,
            mask=rankings.mask,
            ks=self.config.retrieval.cmc_ks,
        )
        if thresholds_path is not None:
            table = self._load_table(thresholds_path, checksum)
            predicted = self._with_predictions(dataset, model_path, checksum)
            test = DatasetView(
                tuple(d for d in predicted.descriptors if d.split != Split.TRAIN)
            )
            probs, labels = test.prob_matrix(), test.label_matrix()
            if probs is not None and labels is not None:
                names = dataset.ontology.attribute_names
                binary = imbalance.apply_thresholds(probs, table, names)
                report = metrics.merge_reports(
                    report, metrics.evaluate_attributes(binary, labels, names)
                )
            else:
                logger.warning("test splits lack probabilities or labels; attribute F1 skipped")

        document = report_to_document(
            report,
            checksum=checksum,
            provenance={
                "command": "evaluate",
                "filter": rankings.filter,
                "order": rankings.order,
                "mask": rankings.mask,
                "attributes": thresholds_path is not None,
            },
        )
        write_document(out_path, document)
        return document

    def pipeline(
        self,
        out_dir: Path,
        cfg: synth.SynthConfig,
        *,
        scenario: Scenario = Scenario.DEFAULT,
        filter_text: str = "none",
        order: RankOrder | None = None,
        mask: bool | None = None,
        split: Split | None = None,
        scope: AttributeScope = AttributeScope.LOCAL,
        local_region: Region | None = None,
    ) -> EvalReportDocument:
        """gen-synth -> train-toy -> calibrate -> query -> evaluate in ``out_dir``."""

        dataset_dir = out_dir / DATASET_DIR
        model_path = out_dir / MODEL_NAME
        thresholds_path = out_dir / THRESHOLDS_NAME
        rankings_path = out_dir / RANKINGS_NAME

        self.gen_synth(dataset_dir, cfg, scenario=scenario)
        self.train_toy(dataset_dir, model_path, seed=cfg.seed, scope=scope)
        self.calibrate(dataset_dir, thresholds_path, model_path=model_path, split=split)
        self.query(
            dataset_dir,
            thresholds_path,
            rankings_path,
            filter_text=filter_text,
            order=order,
            mask=mask,
            model_path=model_path,
            local_region=local_region,
        )
        return self.evaluate(
            dataset_dir,
            rankings_path,
            out_dir / REPORT_NAME,
            thresholds_path=thresholds_path,
            model_path=model_path,
        )

    # -- helpers --------------------------------------------------------------

    def _load_table(self, path: Path, checksum: str) -> ThresholdTable:
        document = read_document(path, ThresholdDocument)
        _require_checksum(checksum, document.ontology_checksum, artifact="thresholds")
        return table_from_document(document)

    def _load_model(self, path: Path, checksum: str) -> ModelDocument:
        document = read_document(path, ModelDocument)
        _require_checksum(checksum, document.ontology_checksum, artifact="model")
        return document

    def _with_predictions(
        self, dataset: Dataset, model_path: Path | None, checksum: str
    ) -> Dataset:
        """``dataset`` with attr_probs from the model's groups, if a model is given."""

        if model_path is None:
            return dataset
        model = self._load_model(model_path, checksum)
        if not model.groups:
            return dataset
        groups = [group_from_payload(payload) for payload in model.groups]
        probs = attributes.predict_matrix(
            groups, dataset.view().feature_matrix(), dataset.ontology
        )
        return with_attr_probs(dataset, probs)

    def _online_views(
        self,
        dataset: Dataset,
        model_path: Path | None,
        checksum: str,
        local_region: Region | None,
    ) -> tuple[DatasetView, DatasetView]:
        """Query and gallery views with predicted probabilities and ranking features."""

        predicted = self._with_predictions(dataset, model_path, checksum)
        ranked = predicted
        if model_path is not None:
            model = self._load_model(model_path, checksum)
            if model.embedder is not None:
                ranked = embedder.embed_dataset(predicted, embedder_from_payload(model.embedder))

        _train, queries, gallery = split_views(ranked)
        if local_region is not None:
            _train, raw_queries, raw_gallery = split_views(predicted)
            queries = retrieval.with_local_region(queries, raw_queries, local_region)
            gallery = retrieval.with_local_region(gallery, raw_gallery, local_region)
        return queries, gallery

