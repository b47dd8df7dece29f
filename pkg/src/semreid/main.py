"""Command-line entry point: ``semreid <command> [options]``.

Offline commands build artifacts (``gen-synth``, ``train-toy``,
``calibrate``); online commands consume them (``query``, ``evaluate``);
``pipeline`` runs all five into one directory.

Exit status: 0 success, 1 validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from semreid import __version__
from semreid.config import Settings, get_settings
from semreid.domain.enums import AttributeScope, RankOrder, Region, Scenario, Split
from semreid.domain.ontology import bundled_ontology, load_ontology
from semreid.domain.synth import SynthConfig
from semreid.errors import SemReidError
from semreid.runtime import ReidService

logger = logging.getLogger("semreid.cli")

COMMANDS = ("gen-synth", "train-toy", "calibrate", "query", "evaluate", "pipeline")


@dataclass(slots=True)
class RunConfig:
    """Everything one CLI invocation needs."""

    command: str
    out: Path | None = None
    ontology: Path | None = None
    dataset: Path | None = None
    model: Path | None = None
    thresholds: Path | None = None
    rankings: Path | None = None
    filter: str = "none"
    order: RankOrder | None = None
    mask: bool | None = None
    seed: int | None = None
    scenario: Scenario = Scenario.DEFAULT
    calibration_split: Split | None = None
    local_region: Region | None = None
    scope: AttributeScope = AttributeScope.LOCAL
    uniform: float | None = None
    identities: int = 40
    images: int = 4
    dim: int = 64
    cameras: int = 6
    noise: float = 0.3
    flip: float = 0.05
    jitter: float = 0.1
    shrink: float = 0.0
    rates: dict[str, float] = field(default_factory=dict)
    designated: str | None = None
    pair_gap: float = 0.0


def synth_config(cfg: RunConfig, seed: int) -> SynthConfig:
    return SynthConfig(
        seed=seed,
        num_identities=cfg.identities,
        images_per_identity=cfg.images,
        dim=cfg.dim,
        ontology=bundled_ontology() if cfg.ontology is None else load_ontology(cfg.ontology),
        feature_noise_sigma=cfg.noise,
        attr_flip_rate=cfg.flip,
        attr_prob_jitter=cfg.jitter,
        positive_rate_per_attr=dict(cfg.rates),
        camera_count=cfg.cameras,
        attr_prob_shrink=cfg.shrink,
    )


def _required(value: Path | None, flag: str, command: str) -> Path:
    if value is None:
        raise SemReidError("missing-argument", f"{command} needs {flag}")
    return value


def _dispatch(cfg: RunConfig, settings: Settings) -> Path:
    service = ReidService(settings)
    seed = settings.default_seed if cfg.seed is None else cfg.seed
    command = cfg.command

    if command == "pipeline":
        out = cfg.out or settings.artifacts_dir
        service.pipeline(
            out,
            synth_config(cfg, seed),
            scenario=cfg.scenario,
            filter_text=cfg.filter,
            order=cfg.order,
            mask=cfg.mask,
            split=cfg.calibration_split,
            scope=cfg.scope,
            local_region=cfg.local_region,
        )
        return out / "report.json"

    out = _required(cfg.out, "--out", command)
    if command == "gen-synth":
        return service.gen_synth(
            out,
            synth_config(cfg, seed),
            scenario=cfg.scenario,
            designated_attribute=cfg.designated,
            pair_gap=cfg.pair_gap,
        )

    dataset = _required(cfg.dataset, "--dataset", command)
    match command:
        case "train-toy":
            service.train_toy(dataset, out, seed=seed, scope=cfg.scope, ontology_path=cfg.ontology)
        case "calibrate":
            service.calibrate(
                dataset,
                out,
                model_path=cfg.model,
                split=cfg.calibration_split,
                uniform=cfg.uniform,
                ontology_path=cfg.ontology,
            )
        case "query":
            service.query(
                dataset,
                _required(cfg.thresholds, "--thresholds", command),
                out,
                filter_text=cfg.filter,
                order=cfg.order,
                mask=cfg.mask,
                model_path=cfg.model,
                local_region=cfg.local_region,
                ontology_path=cfg.ontology,
            )
        case "evaluate":
            service.evaluate(
                dataset,
                _required(cfg.rankings, "--rankings", command),
                out,
                thresholds_path=cfg.thresholds,
                model_path=cfg.model,
                ontology_path=cfg.ontology,
            )
        case _:
            raise SemReidError("unknown-command", f"'{command}' is not one of {', '.join(COMMANDS)}")
    return out


def run(cfg: RunConfig, settings: Settings | None = None) -> int:
    """Execute one command; returns the process exit status."""

    settings = settings or get_settings()
    try:
        written = _dispatch(cfg, settings)
    except SemReidError as exc:
        logger.error("%s failed [%s]: %s", cfg.command, exc.code, exc.detail)
        return 1
    except ValueError as exc:
        logger.error("%s failed [invalid-input]: %s", cfg.command, exc)
        return 1
    except OSError as exc:
        logger.error("%s failed [io-error]: %s", cfg.command, exc)
        return 2
    logger.info("%s finished: %s", cfg.command, written)
    return 0


def _rate(text: str) -> tuple[str, float]:
    name, sep, value = text.rpartition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=RATE, got '{text}'")
    try:
        return name, float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"'{value}' is not a number") from exc


def _mask(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semreid", description="Semantic person re-identification toolkit"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="Output file or directory")
    common.add_argument("--ontology", type=Path, help="Ontology document to build on or check against")
    common.add_argument("--seed", type=int, help="Run seed (defaults to SEMREID_DEFAULT_SEED)")

    synthetic = argparse.ArgumentParser(add_help=False)
    synthetic.add_argument("--scenario", type=Scenario, choices=list(Scenario), default=Scenario.DEFAULT)
    synthetic.add_argument("--identities", type=int, default=40, help="Number of identities")
    synthetic.add_argument("--images", type=int, default=4, help="Images per identity")
    synthetic.add_argument("--dim", type=int, default=64, help="Descriptor dimension (multiple of 4)")
    synthetic.add_argument("--cameras", type=int, default=6, help="Number of cameras")
    synthetic.add_argument("--noise", type=float, default=0.3, help="Feature noise sigma")
    synthetic.add_argument("--flip", type=float, default=0.05, help="Attribute flip rate")
    synthetic.add_argument("--jitter", type=float, default=0.1, help="Probability jitter sigma")
    synthetic.add_argument("--shrink", type=float, default=0.0, help="Shrink probabilities toward the base rate")
    synthetic.add_argument(
        "--rate", type=_rate, action="append", default=[], metavar="NAME=RATE",
        help="Positive rate of one attribute (repeatable)",
    )

    online = argparse.ArgumentParser(add_help=False)
    online.add_argument(
        "--filter", default="none", help="none | attr:NAME | attrs:N1,N2 | region:R | best:K | best:K@R"
    )
    online.add_argument("--order", type=RankOrder, choices=list(RankOrder))
    online.add_argument("--mask", type=_mask, metavar="{on,off}", help="Same-camera protocol mask")
    online.add_argument("--local-region", type=Region, choices=list(Region), dest="local_region")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--scope", type=AttributeScope, choices=list(AttributeScope), default=AttributeScope.LOCAL)

    calibration = argparse.ArgumentParser(add_help=False)
    calibration.add_argument("--calibration-split", type=Split, choices=list(Split), dest="calibration_split")

    gen = subparsers.add_parser("gen-synth", parents=[common, synthetic], help="Generate a synthetic dataset")
    gen.add_argument("--designated", help="Attribute separating confusable pairs")
    gen.add_argument("--pair-gap", type=float, default=0.0, dest="pair_gap")

    train = subparsers.add_parser("train-toy", parents=[common, training], help="Train embedder and attribute groups")
    train.add_argument("--dataset", type=Path, required=True)

    calibrate = subparsers.add_parser("calibrate", parents=[common, calibration], help="Calibrate MCC thresholds")
    calibrate.add_argument("--dataset", type=Path, required=True)
    calibrate.add_argument("--model", type=Path, help="Predict probabilities with this model")
    calibrate.add_argument("--uniform", type=float, help="Write one threshold for every attribute")

    query = subparsers.add_parser("query", parents=[common, online], help="Rank the gallery for every query")
    query.add_argument("--dataset", type=Path, required=True)
    query.add_argument("--thresholds", type=Path, required=True)
    query.add_argument("--model", type=Path)

    evaluate = subparsers.add_parser("evaluate", help="Score rankings", parents=[common])
    evaluate.add_argument("--dataset", type=Path, required=True)
    evaluate.add_argument("--rankings", type=Path, required=True)
    evaluate.add_argument("--thresholds", type=Path, help="Also score attribute F1")
    evaluate.add_argument("--model", type=Path)

    subparsers.add_parser(
        "pipeline",
        parents=[common, synthetic, online, training, calibration],
        help="gen-synth, train-toy, calibrate, query and evaluate in one directory",
    )
    return parser


def parse_run_config(argv: Sequence[str] | None = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    args["rates"] = dict(args.pop("rate", []))
    known = set(RunConfig.__dataclass_fields__)
    return RunConfig(**{key: value for key, value in args.items() if key in known})


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(), format="%(levelname)s %(name)s: %(message)s"
    )
    return run(parse_run_config(argv), settings)


if __name__ == "__main__":
    raise SystemExit(main())
