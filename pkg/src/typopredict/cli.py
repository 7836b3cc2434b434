"""Command-line entry points for the full masking/training/evaluation pipeline.

Typical round trip::

    typopredict mask dev.tsv --out dev_masked.tsv --rate 0.5 --seed 42
    typopredict fit-prob train.tsv --dev dev_masked.tsv --out prob.json
    typopredict train-neural train.tsv --dev dev_masked.tsv --out neural.npz
    typopredict predict merged.tsv --system combined \
        --prob-model prob.json --neural-model neural.npz --out preds.tsv
    typopredict evaluate --gold dev.tsv preds.tsv --masked merged.tsv

Fitting commands merge the visible cells of the dev/test splits into the
training data first (the evaluation splits are part of the world being
modelled, only their masked cells are unknown); ``--no-merge`` disables that.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import embedding
from .correlation import CorrelationPredictor
from .data import Dataset, Role, mask_split, merge_visible, parse_dataset, serialize_dataset
from .ensemble import (
    DEFAULT_NEURAL_THRESHOLD,
    DEFAULT_PROB_THRESHOLD,
    CombinerConfig,
    ThresholdCombiner,
)
from .errors import ConfigError, TypopredictError
from .evaluation import (
    MostFrequentBaseline,
    disagreement_report,
    evaluate_predictions,
    write_report,
)
from .geo import GeoZoning, load_zoning
from .neighbors import NearestNeighborPredictor
from .predictions import read_predictions, write_predictions

DEFAULT_SEED = 42

log = logging.getLogger("typopredict")


def _add_merge_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("train", help="training data (TSV)")
    parser.add_argument("--dev", help="dev split with masked cells, merged before fitting")
    parser.add_argument("--test", help="test split with masked cells, merged before fitting")
    parser.add_argument(
        "--no-merge",
        action="store_true",
        help="fit on the training split alone, ignoring --dev/--test",
    )


def _load_merged(args) -> Dataset:
    dataset = parse_dataset(args.train, Role.TRAIN)
    if getattr(args, "no_merge", False):
        return dataset
    for path, role in ((getattr(args, "dev", None), Role.DEV), (getattr(args, "test", None), Role.TEST)):
        if path:
            dataset = merge_visible(dataset, parse_dataset(path, role))
    return dataset


def _zoning(args) -> GeoZoning:
    if getattr(args, "zones", None):
        return load_zoning(args.zones)
    return GeoZoning()


def _csv_values(text: str, cast) -> tuple:
    try:
        return tuple(cast(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typopredict",
        description="Predict missing typological feature values of languages.",
    )
    parser.add_argument(
        "--log-level",
        default="info",
        choices=("debug", "info", "warning", "error"),
        help="stderr logging verbosity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", help="hide a random share of the known feature values")
    p.add_argument("input", help="dataset to mask (TSV)")
    p.add_argument("--out", required=True, help="where to write the masked dataset")
    p.add_argument("--rate", type=float, default=0.5, help="masking probability per known cell")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("fit-prob", help="fit the pairwise co-occurrence model")
    _add_merge_options(p)
    p.add_argument("--out", required=True, help="where to save the model (JSON)")
    p.add_argument(
        "--scoring",
        default="score2",
        choices=("cond", "score1", "score2"),
        help="candidate ranking score",
    )
    p.add_argument("--log-base", type=float, default=None, help="log base for reported confidences")
    p.add_argument("--zones", help="file with custom latitude/longitude cut points")
    p.set_defaults(func=_cmd_fit_prob)

    p = sub.add_parser("train-neural", help="train the embedding discriminator")
    _add_merge_options(p)
    p.add_argument("--out", required=True, help="where to save the model (NPZ)")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--clusters", type=int, default=300)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--zones", help="file with custom latitude/longitude cut points")
    p.set_defaults(func=_cmd_train_neural)

    p = sub.add_parser(
        "grid-search", help="score embedding hyperparameter combinations against gold data"
    )
    _add_merge_options(p)
    p.add_argument("--gold", required=True, help="unmasked data for the masked cells")
    p.add_argument("--out", help="where to write all scores (JSON)")
    p.add_argument("--clusters", default=None, help="comma-separated cluster counts")
    p.add_argument("--dims", default=None, help="comma-separated embedding sizes")
    p.add_argument("--dropouts", default=None, help="comma-separated dropout rates")
    p.add_argument("--epochs", type=int, default=None, help="override training epochs")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("predict", help="predict every masked cell of a dataset")
    p.add_argument("data", help="dataset with masked cells (TSV); also the fitting data")
    p.add_argument(
        "--system",
        required=True,
        choices=("baseline", "prob", "neural", "knn-hamming", "knn-embed", "combined"),
    )
    p.add_argument("--out", required=True, help="where to write the predictions (TSV)")
    p.add_argument("--prob-model", help="saved co-occurrence model (JSON)")
    p.add_argument("--neural-model", help="saved embedding model (NPZ)")
    p.add_argument("--k", type=int, default=None, help="neighbourhood size for the knn systems")
    p.add_argument(
        "--tn",
        type=float,
        default=DEFAULT_NEURAL_THRESHOLD,
        help="combined: neural score below this counts as unsure",
    )
    p.add_argument(
        "--tp",
        type=float,
        default=DEFAULT_PROB_THRESHOLD,
        help="combined: co-occurrence score above this counts as confident",
    )
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score prediction files against gold data")
    p.add_argument("predictions", nargs="+", help="prediction files (TSV)")
    p.add_argument("--gold", required=True, help="unmasked gold data (TSV)")
    p.add_argument(
        "--masked",
        help="the masked dataset; when given, unpredicted masked cells count as wrong",
    )
    p.add_argument("--json", dest="json_out", help="also write the full report(s) as JSON")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser(
        "analyze-disagreement", help="compare two prediction files cell by cell"
    )
    p.add_argument("pred_a", help="first prediction file (TSV)")
    p.add_argument("pred_b", help="second prediction file (TSV)")
    p.add_argument("--gold", required=True, help="unmasked gold data (TSV)")
    p.add_argument("--masked", help="the masked dataset defining the evaluated cells")
    p.add_argument("--json", dest="json_out", help="write the report as JSON")
    p.set_defaults(func=_cmd_disagreement)

    p = sub.add_parser("export-embeddings", help="dump trained embeddings as labelled TSV")
    p.add_argument("--model", required=True, help="saved embedding model (NPZ)")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="lang", choices=("lang", "token"))
    p.set_defaults(func=_cmd_export)

    return parser


def _cmd_mask(args) -> int:
    dataset = parse_dataset(args.input)
    masked = mask_split(dataset, rate=args.rate, seed=args.seed)
    serialize_dataset(masked, args.out)
    log.info("masked %d of %d known cells -> %s", masked.n_masked, dataset.n_known, args.out)
    return 0


def _cmd_fit_prob(args) -> int:
    dataset = _load_merged(args)
    kwargs = {"scoring": args.scoring, "zoning": _zoning(args)}
    if args.log_base is not None:
        kwargs["log_base"] = args.log_base
    predictor = CorrelationPredictor(**kwargs).fit(dataset)
    predictor.save(args.out)
    log.info("fitted co-occurrence model on %d languages -> %s", len(dataset), args.out)
    return 0


def _cmd_train_neural(args) -> int:
    dataset = _load_merged(args)
    predictor = embedding.NeuralPredictor(
        dim=args.dim,
        dropout=args.dropout,
        clusters=args.clusters,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        zoning=_zoning(args),
    )
    predictor.fit(dataset, log=log.info)
    predictor.save(args.out)
    log.info(
        "trained on %d languages, final mean loss %.4f -> %s",
        len(dataset),
        predictor.losses_[-1],
        args.out,
    )
    return 0


def _cmd_grid_search(args) -> int:
    dataset = _load_merged(args)
    gold = parse_dataset(args.gold, Role.DEV)
    clusters = _csv_values(args.clusters, int) if args.clusters else embedding.GRID_CLUSTERS
    dims = _csv_values(args.dims, int) if args.dims else embedding.GRID_DIMS
    dropouts = _csv_values(args.dropouts, float) if args.dropouts else embedding.GRID_DROPOUTS
    grid = tuple(
        embedding.HyperParams(dim=dim, dropout=dropout, clusters=k)
        for k in clusters
        for dim in dims
        for dropout in dropouts
    )
    if args.epochs is not None:
        grid = tuple(replace(h, epochs=args.epochs) for h in grid)
    results = embedding.grid_search(
        dataset, gold, grid, seed=args.seed, jobs=args.jobs, log=log.info
    )
    best = embedding.best_config(results)
    if args.out:
        payload = {
            "results": [
                {
                    "clusters": r.hyper.clusters,
                    "dim": r.hyper.dim,
                    "dropout": r.hyper.dropout,
                    "epochs": r.hyper.epochs,
                    "lr": r.hyper.lr,
                    "accuracy": r.accuracy,
                }
                for r in results
            ],
            "best": {
                "clusters": best.hyper.clusters,
                "dim": best.hyper.dim,
                "dropout": best.hyper.dropout,
                "accuracy": best.accuracy,
            },
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    print(
        f"best: clusters={best.hyper.clusters} dim={best.hyper.dim} "
        f"dropout={best.hyper.dropout:g} accuracy={100.0 * best.accuracy:.2f}%"
    )
    return 0


def _require(value, option: str, system: str):
    if not value:
        raise ConfigError(f"--system {system} requires {option}")
    return value


def _cmd_predict(args) -> int:
    dataset = parse_dataset(args.data)
    system = args.system
    if system == "baseline":
        predictions = MostFrequentBaseline().fit(dataset).predict(dataset)
    elif system == "prob":
        model = CorrelationPredictor.load(_require(args.prob_model, "--prob-model", system))
        predictions = model.predict(dataset)
    elif system == "neural":
        model = embedding.NeuralPredictor.from_file(
            _require(args.neural_model, "--neural-model", system)
        )
        predictions = model.predict(dataset)
    elif system == "knn-hamming":
        knn = NearestNeighborPredictor(metric="hamming", k=args.k)
        predictions = knn.fit(dataset).predict(dataset)
    elif system == "knn-embed":
        trained = embedding.load_model(_require(args.neural_model, "--neural-model", system))
        knn = NearestNeighborPredictor(metric="embedding", k=args.k, embedding_model=trained)
        predictions = knn.fit(dataset).predict(dataset)
    else:  # combined
        prob = CorrelationPredictor.load(_require(args.prob_model, "--prob-model", system))
        neural = embedding.NeuralPredictor.from_file(
            _require(args.neural_model, "--neural-model", system)
        )
        combiner = ThresholdCombiner.from_fitted(
            prob, neural, CombinerConfig(neural_threshold=args.tn, prob_threshold=args.tp)
        )
        predictions = combiner.predict(dataset)
    write_predictions(predictions, args.out)
    log.info("%s: predicted %d cells -> %s", system, len(predictions), args.out)
    return 0


def _cmd_evaluate(args) -> int:
    gold = parse_dataset(args.gold)
    masked = parse_dataset(args.masked) if args.masked else None
    reports = []
    for path in args.predictions:
        predictions = read_predictions(path)
        report = evaluate_predictions(gold, predictions, masked=masked)
        reports.append(report)
        prefix = f"{path}: " if len(args.predictions) > 1 else ""
        print(f"{prefix}{report.format_text()}")
    if args.json_out:
        if len(reports) == 1:
            write_report(reports[0], args.json_out)
        else:
            with open(args.json_out, "w", encoding="utf-8") as fh:
                json.dump([r.to_json_dict() for r in reports], fh, ensure_ascii=False, indent=2)
                fh.write("\n")
    return 0


def _cmd_disagreement(args) -> int:
    gold = parse_dataset(args.gold)
    masked = parse_dataset(args.masked) if args.masked else None
    report = disagreement_report(
        gold, read_predictions(args.pred_a), read_predictions(args.pred_b), masked=masked
    )
    print(report.format_text())
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    return 0


def _cmd_export(args) -> int:
    model = embedding.load_model(args.model)
    embedding.export_embeddings(model, args.out, kind=args.kind)
    log.info("wrote %s embeddings -> %s", args.kind, args.out)
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except TypopredictError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
