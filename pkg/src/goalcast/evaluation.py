"""Matchday cross-validation.

Every scheduled round is one test fold: the models are trained on all other
rounds of the evaluation seasons and scored on the held-out round. Fold
metrics are averaged with a standard error over folds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import SeasonDataset
from .distribution import OutcomeDistribution, argmax_classes, classes_for
from .errors import FoldFailed, TooFewSeasons
from .features import FeatureSetSpec, FeatureTable, IdCodes, _SeasonArrays, build_feature_table
from .learners import BaseModel, NeuralNetModel, NNConfig, RandomForestModel, RFConfig
from .learners.base import PROB_FLOOR
from .metrics import MetricValue, cross_entropy_batch, mean_with_stderr, rps_batch
from .poisson import G_MAX, LAMBDA_FLOOR, PoissonModel

logger = logging.getLogger(__name__)

MODEL_NAMES = ("poisson", "nn", "rf", "base")
POISSON_COLUMNS = ("x_dG_AB", "x_sG_AB")
HOLDOUT_SEASONS = 5


@dataclass(frozen=True)
class FoldPlan:
    fold_id: int  # the scheduled round used as test set
    test: tuple[tuple[str, str, int], ...]  # (league, season, match index)

    def __len__(self):
        return len(self.test)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    nn: NNConfig = NNConfig()
    rf: RFConfig = RFConfig()
    poisson_method: str = "ols"
    poisson_refit: str = "fold"  # or "match"
    g_max: int = G_MAX
    lambda_floor: float = LAMBDA_FLOOR
    base_per_fold: bool = False

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_NAMES)}")
        if self.poisson_refit not in ("fold", "match"):
            raise ValueError("poisson_refit must be 'fold' or 'match'")


@dataclass
class FoldResult:
    fold_id: int
    n: int
    cross_entropy: float
    rps: float


@dataclass
class CvReport:
    model: str
    features: str
    target: str
    folds: list[FoldResult]
    cross_entropy: MetricValue
    rps: MetricValue
    confusion: np.ndarray
    averaged_distribution: np.ndarray
    empirical_distribution: np.ndarray
    fingerprint: dict
    league: str | None = None
    # per-match arrays, kept in memory only
    predictions: np.ndarray | None = field(default=None, repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def classes(self):
        return classes_for(self.target)

    def to_dict(self):
        return {
            "model": self.model,
            "features": self.features,
            "target": self.target,
            "league": self.league,
            "classes": list(self.classes),
            "aggregate": {"cross_entropy": self.cross_entropy.to_dict(), "rps": self.rps.to_dict()},
            "folds": [asdict(f) for f in self.folds],
            "confusion_matrix": self.confusion.tolist(),
            "averaged_distribution": self.averaged_distribution.tolist(),
            "empirical_distribution": self.empirical_distribution.tolist(),
            "fingerprint": self.fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def summary_row(self):
        return [self.model, self.features, self.target, self.league or "all",
                f"{self.cross_entropy.value:.6f}", f"{self.cross_entropy.std_err:.6f}",
                f"{self.rps.value:.6f}", f"{self.rps.std_err:.6f}"]


SUMMARY_HEADER = ["model", "features", "target", "league", "cross_entropy", "cross_entropy_se", "rps", "rps_se"]


def write_summary_csv(reports: Sequence[CvReport], stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for r in reports:
        writer.writerow(r.summary_row())


def write_confusion_csv(report: CvReport, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["predicted\\true", *report.classes])
    for c, row in zip(report.classes, report.confusion):
        writer.writerow([c, *row.tolist()])


def write_distribution_csv(report: CvReport, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["class", "predicted", "empirical"])
    for c, p, e in zip(report.classes, report.averaged_distribution, report.empirical_distribution):
        writer.writerow([c, repr(float(p)), repr(float(e))])


# --------------------------------------------------------------------------
# fold planning


def make_folds(datasets: Sequence[SeasonDataset], holdout_seed: int | None = None, n_holdout: int = HOLDOUT_SEASONS):
    """Split seasons into holdout and evaluation, and rounds into folds.

    With ``holdout_seed=None`` no season is held out. Returns
    ``(folds, holdout_keys)``.
    """
    keys = sorted(ds.key for ds in datasets)
    holdout: list[tuple[str, str]] = []
    if holdout_seed is not None:
        if len(keys) < n_holdout + 1:
            raise TooFewSeasons(f"need at least {n_holdout + 1} seasons to hold out {n_holdout}, got {len(keys)}")
        rng = np.random.default_rng(holdout_seed)
        holdout = sorted(keys[k] for k in rng.choice(len(keys), size=n_holdout, replace=False))
    held = set(holdout)
    by_round: dict[int, list] = {}
    for ds in sorted(datasets, key=lambda d: d.key):
        if ds.key in held:
            continue
        for i, m in enumerate(ds.matches):
            by_round.setdefault(m.round, []).append((ds.league, ds.season, i))
    folds = [FoldPlan(r, tuple(by_round[r])) for r in sorted(by_round)]
    return folds, holdout


def evaluation_datasets(datasets, holdout):
    held = set(holdout)
    return sorted((ds for ds in datasets if ds.key not in held), key=lambda d: d.key)


# --------------------------------------------------------------------------
# training / prediction for one fold


def fold_seed(seed: int, fold_id: int) -> int:
    return int(np.random.SeedSequence([seed, fold_id]).generate_state(1)[0])


def _standardize(train_X, *others):
    mean = train_X.mean(axis=0)
    scale = train_X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return [(x - mean) / scale for x in (train_X, *others)]


def _fit_and_predict(spec: ModelSpec, feature_spec: FeatureSetSpec, target, train: FeatureTable, test: FeatureTable,
                     seed: int, base: BaseModel | None):
    if spec.name == "base":
        model = base if base is not None else BaseModel.fit(train.labels(target), target)
        return model.predict_proba(test.X)
    if spec.name == "poisson":
        use_sigma = feature_spec.name != "dg_ab"
        model = PoissonModel.fit(train.X, train.home_goals, train.away_goals, target=target, use_sigma=use_sigma,
                                 method=spec.poisson_method, g_max=spec.g_max, lambda_floor=spec.lambda_floor)
        return model.predict_proba(test.X)
    X_train, X_test = train.X, test.X
    if feature_spec.standardize:
        X_train, X_test = _standardize(X_train, X_test)
    if spec.name == "nn":
        model = NeuralNetModel.fit(X_train, train.labels(target), target, train.ids, replace(spec.nn, seed=seed))
    else:
        model = RandomForestModel.fit(X_train, train.labels(target), target, train.ids, replace(spec.rf, seed=seed))
    return model.predict_proba(X_test, test.ids)


def _poisson_per_match(spec, feature_spec, target, datasets, fold: FoldPlan, strict, table: FeatureTable):
    """Refit for every test match with that match removed from all season averages."""
    by_key = {ds.key: ds for ds in datasets}
    out = []
    for league, season, idx in fold.test:
        ds = by_key[(league, season)]
        own = _season_table_without(ds, idx, fold.fold_id if strict else None)
        rest = table.subset(np.array([k != ds.key for k in table.season_keys], dtype=bool))
        train = _concat(rest, own)
        train = train.subset(train.rounds != fold.fold_id)
        test = own.subset(own.match_index == idx)
        out.append(_fit_and_predict(spec, feature_spec, target, train, test, 0, None)[0])
    return np.vstack(out)


def _season_table_without(ds, idx, strict_round):
    """Adjusted Poisson features of one season with match ``idx`` excluded everywhere."""
    arr = _SeasonArrays(ds)
    extra = np.zeros(len(ds), dtype=bool)
    extra[idx] = True
    if strict_round is not None:
        extra |= arr.rounds == strict_round
    feats = arr.features(True, extra_exclude=extra)
    n = len(ds)
    return FeatureTable(
        POISSON_COLUMNS,
        np.column_stack([feats[c] for c in POISSON_COLUMNS]),
        None,
        np.clip(arr.hg - arr.ag, -10, 10).astype(int),
        np.clip(arr.hg + arr.ag, 0, 16).astype(int),
        arr.rounds,
        [ds.key] * n,
        np.arange(n),
        arr.hg.astype(int),
        arr.ag.astype(int),
    )


def _concat(a: FeatureTable, b: FeatureTable) -> FeatureTable:
    return FeatureTable(
        a.columns,
        np.vstack([a.X, b.X]),
        None if a.ids is None else np.vstack([a.ids, b.ids]),
        np.concatenate([a.y_diff, b.y_diff]),
        np.concatenate([a.y_total, b.y_total]),
        np.concatenate([a.rounds, b.rounds]),
        a.season_keys + b.season_keys,
        np.concatenate([a.match_index, b.match_index]),
        np.concatenate([a.home_goals, b.home_goals]),
        np.concatenate([a.away_goals, b.away_goals]),
    )


def _table_spec(model_spec: ModelSpec, feature_spec: FeatureSetSpec):
    if model_spec.name == "poisson":
        if feature_spec.name not in ("dg_ab", "dg_sg_ab"):
            raise ValueError("the Poisson model takes feature set 'dg_ab' or 'dg_sg_ab'")
        # Poisson features are always home-advantage adjusted
        return replace(feature_spec, home_adjust=True), POISSON_COLUMNS
    return feature_spec, feature_spec.columns


def _run_fold(args):
    (fold, model_spec, feature_spec, target, datasets, table, seed, strict, base, id_codes) = args
    try:
        tspec, columns = _table_spec(model_spec, feature_spec)
        if strict:
            table = build_feature_table(datasets, tspec, columns=columns, exclude_rounds=[fold.fold_id],
                                        id_codes=id_codes)
        test_mask = table.rounds == fold.fold_id
        if model_spec.name == "poisson" and model_spec.poisson_refit == "match":
            P = _poisson_per_match(model_spec, tspec, target, datasets, fold, strict, table)
            order = [(k, int(i)) for k, i in zip(table.subset(test_mask).season_keys, table.match_index[test_mask])]
            assert order == [((l, s), i) for l, s, i in fold.test]
        else:
            P = _fit_and_predict(model_spec, tspec, target, table.subset(~test_mask), table.subset(test_mask),
                                 fold_seed(seed, fold.fold_id), base)
        y = table.labels(target)[test_mask]
        return fold.fold_id, P, y
    except Exception as exc:  # noqa: BLE001
        raise FoldFailed(fold.fold_id, exc) from exc


def dataset_digest(datasets: Sequence[SeasonDataset]) -> str:
    h = hashlib.sha256()
    for ds in sorted(datasets, key=lambda d: d.key):
        for m in ds.matches:
            h.update(f"{m.league}|{m.season}|{m.round}|{m.date}|{m.home_team}|{m.away_team}|{m.home_goals}|{m.away_goals}\n".encode())
    return h.hexdigest()


def config_fingerprint(model_spec, feature_spec, target, seed, strict, holdout, datasets):
    cfg = {
        "model": asdict(model_spec),
        "features": asdict(feature_spec),
        "target": target,
        "seed": seed,
        "strict_leakage": strict,
        "holdout": [list(k) for k in holdout],
        "data_sha256": dataset_digest(datasets),
    }
    cfg["sha256"] = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    return cfg


def base_model(datasets: Sequence[SeasonDataset], target="diff", floor=PROB_FLOOR) -> BaseModel:
    """Class frequencies over every match of ``datasets``."""
    labels = []
    for ds in datasets:
        for m in ds.matches:
            labels.append(max(-10, min(10, m.goal_diff)) if target == "diff" else min(16, m.total_goals))
    return BaseModel.fit(np.asarray(labels), target, floor)


def run_cv(datasets: Sequence[SeasonDataset], folds: Sequence[FoldPlan], model_spec: ModelSpec,
           feature_spec: FeatureSetSpec, target: str = "diff", seed: int = 0, strict_leakage: bool = False,
           holdout=(), jobs: int = 1, league: str | None = None) -> CvReport:
    classes = classes_for(target)
    fold_keys = {(l, s) for f in folds for l, s, _ in f.test}
    datasets = sorted((ds for ds in datasets if ds.key in fold_keys), key=lambda d: d.key)
    tspec, columns = _table_spec(model_spec, feature_spec)
    id_codes = IdCodes.from_seasons(datasets) if tspec.use_ids else None
    table = build_feature_table(datasets, tspec, columns=columns, id_codes=id_codes)
    base = None
    if model_spec.name == "base" and not model_spec.base_per_fold:
        base = base_model(datasets, target)

    work = [(f, model_spec, feature_spec, target, datasets, table, seed, strict_leakage, base, id_codes)
            for f in folds]
    if jobs > 1 and len(folds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, work))
    else:
        results = [_run_fold(w) for w in work]
    results.sort(key=lambda r: r[0])

    fold_results, all_P, all_y = [], [], []
    for fold_id, P, y in results:
        y_idx = y - classes[0]
        ce = cross_entropy_batch(P, y_idx)
        rp = rps_batch(P, y_idx)
        fold_results.append(FoldResult(fold_id, len(y), float(ce.mean()), float(rp.mean())))
        all_P.append(P)
        all_y.append(y)
    P = np.vstack(all_P)
    y = np.concatenate(all_y)
    n = len(y)
    ce_mv = mean_with_stderr("cross_entropy", [f.cross_entropy for f in fold_results], n)
    rps_mv = mean_with_stderr("rps", [f.rps for f in fold_results], n)
    predicted = argmax_classes(P, classes)
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(confusion, (predicted - classes[0], y - classes[0]), 1)
    return CvReport(
        model=model_spec.name,
        features=feature_spec.name,
        target=target,
        folds=fold_results,
        cross_entropy=ce_mv,
        rps=rps_mv,
        confusion=confusion,
        averaged_distribution=P.mean(axis=0),
        empirical_distribution=np.bincount(y - classes[0], minlength=len(classes)) / n,
        fingerprint=config_fingerprint(model_spec, feature_spec, target, seed, strict_leakage, holdout, datasets),
        league=league,
        predictions=P,
        labels=y,
    )


def averaged_predicted_distribution(report: CvReport) -> OutcomeDistribution:
    p = report.averaged_distribution
    return OutcomeDistribution(report.classes, p / p.sum())


def per_league_cv(datasets: Sequence[SeasonDataset], model_spec: ModelSpec, feature_spec: FeatureSetSpec,
                  target="diff", seed=0, holdout_seed=None, strict_leakage=False, jobs=1) -> list[CvReport]:
    """Independent cross-validation per league; reports carry the league tag."""
    reports = []
    for league in sorted({ds.league for ds in datasets}):
        subset = [ds for ds in datasets if ds.league == league]
        folds, holdout = make_folds(subset, holdout_seed)
        reports.append(run_cv(subset, folds, model_spec, feature_spec, target, seed, strict_leakage, holdout,
                              jobs, league=league))
    return reports
