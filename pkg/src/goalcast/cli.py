"""Command-line front end.

Data goes to files or standard output; diagnostics go to standard error.
Every run records a config fingerprint: inside JSON outputs, and as a
``<name>.config.json`` sidecar next to CSV files written with ``--out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_seasons, write_csv
from .errors import GoalcastError, UnknownTeam
from .evaluation import (
    MODEL_NAMES,
    POISSON_COLUMNS,
    ModelSpec,
    dataset_digest,
    make_folds,
    per_league_cv,
    run_cv,
    write_confusion_csv,
    write_distribution_csv,
    write_summary_csv,
)
from .evaluation import base_model as build_base_model
from .features import FEATURE_SETS, FeatureSetSpec, IdCodes, build_feature_table, fixture_features, write_feature_csv
from .learners import BaseModel, NeuralNetModel, NNConfig, RandomForestModel, RFConfig
from .poisson import PoissonModel
from .season_stats import autocorrelation, trend_test
from .synth import GeneratorConfig, generate

logger = logging.getLogger("goalcast")

DEFAULT_FEATURES = {"poisson": "dg_sg_ab", "nn": "dg_sg", "rf": "dg_sg", "base": "dg_ab"}
MODEL_CLASSES = {cls.variant: cls for cls in (PoissonModel, NeuralNetModel, RandomForestModel, BaseModel)}


def fingerprint(args: argparse.Namespace, datasets=None) -> dict:
    """Canonical description of a run plus its SHA-256."""
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "log_level", "jobs")}
    cfg = json.loads(json.dumps(cfg, default=str))
    cfg["version"] = __version__
    if datasets is not None:
        cfg["data_sha256"] = dataset_digest(datasets)
    cfg["sha256"] = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    return cfg


@contextmanager
def output(path, name=None):
    """Yield a text stream: stdout when ``path`` is None, else a file.

    When ``path`` is a directory, ``name`` is the file created inside it.
    """
    if path is None:
        yield sys.stdout
        return
    target = Path(path)
    if name is not None:
        target.mkdir(parents=True, exist_ok=True)
        target = target / name
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as fh:
        yield fh


def write_sidecar(path, fp, name=None):
    if path is None:
        logger.info("config fingerprint %s", fp["sha256"])
        return
    target = Path(path) / name if name is not None else Path(path)
    target.with_name(target.name + ".config.json").write_text(json.dumps(fp, sort_keys=True, indent=2) + "\n")


def dump_json(obj, stream):
    stream.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _datasets(args):
    seasons, warnings = load_seasons(args.input)
    for w in warnings:
        logger.warning(w)
    return sorted(seasons.values(), key=lambda d: d.key), warnings


def _feature_spec(args, model="base"):
    name = args.features or DEFAULT_FEATURES[model]
    return FeatureSetSpec(name, home_adjust=args.home_adjust, standardize=getattr(args, "standardize", False))


def _model_spec(args):
    nn = NNConfig() if args.max_epochs is None else NNConfig(max_epochs=args.max_epochs)
    rf = RFConfig() if args.n_trees is None else RFConfig(n_trees=args.n_trees)
    return ModelSpec(args.model, nn=nn, rf=rf, poisson_method=args.poisson_method,
                     poisson_refit=args.poisson_refit, base_per_fold=args.base_per_fold)


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args):
    datasets, warnings = _datasets(args)
    summary = {
        "n_matches": sum(len(ds) for ds in datasets),
        "leagues": sorted({ds.league for ds in datasets}),
        "seasons": [
            {"league": ds.league, "season": ds.season, "matches": len(ds), "teams": ds.n_teams,
             "rounds": ds.max_round, "complete": ds.complete}
            for ds in datasets
        ],
        "warnings": warnings,
        "fingerprint": fingerprint(args, datasets),
    }
    with output(args.out) as fh:
        dump_json(summary, fh)


def cmd_synth(args):
    cfg = GeneratorConfig(seed=args.seed, n_teams=args.n_teams, n_seasons=args.n_seasons, base_rate=args.base_rate,
                          spread=args.spread, attack_defence_corr=args.attack_defence_corr,
                          home_advantage=args.ha, redraw_midseason=args.redraw, league=args.league,
                          first_season=args.first_season)
    records = generate(cfg)
    with output(args.out) as fh:
        write_csv(records, fh)
    write_sidecar(args.out, fingerprint(args))


def cmd_features(args):
    datasets, _ = _datasets(args)
    spec = _feature_spec(args)
    id_codes = IdCodes.from_seasons(datasets) if spec.use_ids else None
    table = build_feature_table(datasets, spec, id_codes=id_codes)
    with output(args.out) as fh:
        write_feature_csv(table, fh)
    write_sidecar(args.out, fingerprint(args, datasets))


def cmd_autocorr(args):
    datasets, _ = _datasets(args)
    series = autocorrelation(datasets, args.dn_max, use_home_adjustment=not args.no_home_correction,
                             normalize=args.normalize)
    with output(args.out) as fh:
        series.write_csv(fh)
    fit = trend_test(series)
    logger.info("trend slope %.5f ± %.5f (%s)", fit.slope, fit.slope_se, "flat" if fit.flat else "not flat")
    write_sidecar(args.out, fingerprint(args, datasets))


def cmd_evaluate(args):
    datasets, _ = _datasets(args)
    model_spec = _model_spec(args)
    feature_spec = _feature_spec(args, args.model)
    if args.per_league:
        reports = per_league_cv(datasets, model_spec, feature_spec, args.target, args.seed, args.holdout_seed,
                                args.strict_leakage, args.jobs)
    else:
        folds, holdout = make_folds(datasets, args.holdout_seed)
        reports = [run_cv(datasets, folds, model_spec, feature_spec, args.target, args.seed, args.strict_leakage,
                          holdout, args.jobs)]
    fp = fingerprint(args, datasets)
    payload = {"fingerprint": fp, "reports": [r.to_dict() for r in reports]}
    if args.out is None:
        dump_json(payload, sys.stdout)
        return
    with output(args.out, "report.json") as fh:
        dump_json(payload, fh)
    with output(args.out, "summary.csv") as fh:
        write_summary_csv(reports, fh)
    write_sidecar(args.out, fp, "summary.csv")
    for r in reports:
        suffix = f"_{r.league}" if r.league else ""
        with output(args.out, f"confusion{suffix}.csv") as fh:
            write_confusion_csv(r, fh)
        write_sidecar(args.out, fp, f"confusion{suffix}.csv")
        with output(args.out, f"distribution{suffix}.csv") as fh:
            write_distribution_csv(r, fh)
        write_sidecar(args.out, fp, f"distribution{suffix}.csv")


def train_model(datasets, args):
    """Fit the requested model on every match of ``datasets``."""
    model_spec = _model_spec(args)
    feature_spec = _feature_spec(args, args.model)
    target = args.target
    id_codes = None
    if args.model == "poisson":
        if feature_spec.name not in ("dg_ab", "dg_sg_ab"):
            raise ValueError("the Poisson model takes feature set 'dg_ab' or 'dg_sg_ab'")
        feature_spec = replace(feature_spec, home_adjust=True)
        table = build_feature_table(datasets, feature_spec, columns=POISSON_COLUMNS)
        model = PoissonModel.fit(table.X, table.home_goals, table.away_goals, target=target,
                                 use_sigma=feature_spec.name != "dg_ab", method=model_spec.poisson_method)
    elif args.model == "base":
        model = build_base_model(datasets, target)
    else:
        if feature_spec.standardize:
            raise ValueError("--standardize is only supported by evaluate")
        id_codes = IdCodes.from_seasons(datasets) if feature_spec.use_ids else None
        table = build_feature_table(datasets, feature_spec, id_codes=id_codes)
        if args.model == "nn":
            model = NeuralNetModel.fit(table.X, table.labels(target), target, table.ids,
                                       replace(model_spec.nn, seed=args.seed))
        else:
            model = RandomForestModel.fit(table.X, table.labels(target), target, table.ids,
                                          replace(model_spec.rf, seed=args.seed))
    return {
        "format_version": 1,
        "features": asdict(feature_spec),
        "id_codes": None if id_codes is None else {"teams": id_codes.teams, "seasons": id_codes.seasons},
        "model": model.to_dict(),
    }


def load_model(blob):
    model = MODEL_CLASSES[blob["model"]["variant"]].from_dict(blob["model"])
    spec = FeatureSetSpec(**blob["features"])
    codes = blob.get("id_codes")
    id_codes = None if codes is None else IdCodes(codes["teams"], codes["seasons"])
    return model, spec, id_codes


def _season_for(datasets, args):
    candidates = [ds for ds in datasets
                  if (args.league is None or ds.league == args.league)
                  and (args.season is None or ds.season == args.season)
                  and args.home in ds.teams]
    if not candidates:
        raise UnknownTeam(f"{args.home!r} not found in the selected seasons")
    return candidates[-1]


def cmd_predict(args):
    datasets, _ = _datasets(args)
    if args.load_model:
        blob = json.loads(Path(args.load_model).read_text())
    else:
        if args.model is None:
            raise ValueError("predict needs --model or --load-model")
        blob = train_model(datasets, args)
        if args.save_model:
            Path(args.save_model).write_text(json.dumps(blob, sort_keys=True) + "\n")
    model, spec, id_codes = load_model(blob)
    ds = _season_for(datasets, args)
    columns = POISSON_COLUMNS if isinstance(model, PoissonModel) else None
    values, ids = fixture_features(ds, args.home, args.away, spec, columns=columns, id_codes=id_codes)
    dist = model.predict_distribution(values, ids)
    result = {
        "league": ds.league,
        "season": ds.season,
        "home_team": args.home,
        "away_team": args.away,
        "target": model.target,
        "model": model.variant,
        "features": dict(zip(columns or spec.columns, np.asarray(values).tolist())),
        "distribution": dist.to_dict(),
        "argmax": dist.argmax(),
        "mean": dist.mean(),
        "fingerprint": fingerprint(args, datasets),
    }
    with output(args.out) as fh:
        dump_json(result, fh)


# --------------------------------------------------------------------------
# argument parsing


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="goalcast", description="Soccer outcome prediction toolkit.")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_input(p):
        p.add_argument("--input", nargs="+", required=True, help="match CSV file(s)")

    def with_out(p, help_text="output file (default: standard output)"):
        p.add_argument("--out", default=None, help=help_text)

    def with_features(p):
        p.add_argument("--features", choices=sorted(FEATURE_SETS), default=None)
        p.add_argument("--home-adjust", action="store_true", help="correct goals for the season's home advantage")

    def with_model(p, required=True):
        p.add_argument("--model", choices=MODEL_NAMES, required=required)
        p.add_argument("--target", choices=["diff", "total"], default="diff")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-epochs", type=positive_int, default=None, help="neural net epoch cap")
        p.add_argument("--n-trees", type=positive_int, default=None, help="random forest size")
        p.add_argument("--poisson-method", choices=["ols", "glm"], default="ols")
        p.add_argument("--poisson-refit", choices=["fold", "match"], default="fold")
        p.add_argument("--base-per-fold", action="store_true")

    p = sub.add_parser("ingest", help="validate match files and summarise them")
    with_input(p)
    with_out(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate synthetic seasons")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-teams", type=int, default=18)
    p.add_argument("--n-seasons", type=int, default=1)
    p.add_argument("--base-rate", type=float, default=1.35)
    p.add_argument("--spread", type=float, default=0.25)
    p.add_argument("--attack-defence-corr", type=float, default=0.0)
    p.add_argument("--ha", type=float, default=0.3, help="home advantage in goals")
    p.add_argument("--redraw", action="store_true", help="redraw team strengths at mid-season")
    p.add_argument("--league", default="SYN")
    p.add_argument("--first-season", type=int, default=2000)
    with_out(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="write leave-one-out feature rows")
    with_input(p)
    with_features(p)
    with_out(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("autocorr", help="goal-difference autocorrelation by game lag")
    with_input(p)
    p.add_argument("--dn-max", type=positive_int, required=True)
    p.add_argument("--no-home-correction", action="store_true")
    p.add_argument("--normalize", action="store_true")
    with_out(p)
    p.set_defaults(func=cmd_autocorr)

    p = sub.add_parser("evaluate", help="matchday cross-validation")
    with_input(p)
    with_model(p)
    with_features(p)
    p.add_argument("--standardize", action="store_true", help="z-score features with training-fold statistics")
    p.add_argument("--holdout-seed", type=int, default=None)
    p.add_argument("--strict-leakage", action="store_true", help="exclude the test round from all feature averages")
    p.add_argument("--per-league", action="store_true")
    p.add_argument("--jobs", type=positive_int, default=1)
    with_out(p, "output directory (default: report JSON on standard output)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="outcome distribution for one fixture")
    with_input(p)
    with_model(p, required=False)
    with_features(p)
    p.add_argument("--home", required=True)
    p.add_argument("--away", required=True)
    p.add_argument("--league", default=None)
    p.add_argument("--season", default=None)
    p.add_argument("--save-model", default=None)
    p.add_argument("--load-model", default=None)
    with_out(p)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (GoalcastError, ValueError, OSError, KeyError) as exc:
        print(f"goalcast {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
