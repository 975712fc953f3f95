"""Leave-one-match-out team features.

For a match *i* between home team A and away team B, each team's scoring and
conceding rate is the average over all of that team's *other* games in the
season, regardless of when they were played. The rates are combined into
goal-difference and total-goal features; optionally the goals are first
corrected for the season's home advantage (itself computed without match i).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import SeasonDataset
from .errors import EmptySeason, InsufficientGames, UnknownTeam

DIFF_CLASSES = tuple(range(-10, 11))
TOTAL_CLASSES = tuple(range(0, 17))

FEATURE_SETS = {
    "dg_ab": ("x_dG_AB",),
    "dg_sg_ab": ("x_dG_AB", "x_sG_AB"),
    "dg_a_dg_b": ("x_dG_A", "x_dG_B"),
    "dg_sg": ("x_dG_A", "x_dG_B", "x_sG_A", "x_sG_B"),
    "dg_sg_ids": ("x_dG_A", "x_dG_B", "x_sG_A", "x_sG_B"),
    "raw4": ("x_plus_A", "x_minus_A", "x_plus_B", "x_minus_B"),
}
ID_COLUMNS = ("id_A", "id_B", "id_season")


@dataclass(frozen=True)
class FeatureSetSpec:
    name: str
    home_adjust: bool = False
    standardize: bool = False

    def __post_init__(self):
        if self.name not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {self.name!r}; choose from {', '.join(FEATURE_SETS)}")

    @property
    def columns(self) -> tuple[str, ...]:
        return FEATURE_SETS[self.name]

    @property
    def use_ids(self) -> bool:
        return self.name.endswith("_ids")


@dataclass(frozen=True)
class RateVector:
    x_plus_A: float
    x_minus_A: float
    x_plus_B: float
    x_minus_B: float


@dataclass(frozen=True)
class CombinedFeatures:
    x_dG_A: float
    x_dG_B: float
    x_sG_A: float
    x_sG_B: float
    x_dG_AB: float
    x_sG_AB: float
    mean_goals: float


@dataclass(frozen=True)
class HomeAdvantage:
    value: float
    scope: tuple[str, str]
    excluded_match: int | None = None


@dataclass(frozen=True)
class FeatureRow:
    league: str
    season: str
    match_index: int
    round: int
    values: tuple[float, ...]
    label_diff: int
    label_total: int
    home_goals: int
    away_goals: int
    ids: tuple[int, int, int] | None = None


def clip_diff(d):
    return int(min(10, max(-10, d)))


def clip_total(t):
    return int(min(16, max(0, t)))


# --------------------------------------------------------------------------
# single-match operations


def _team_games(ds, team, skip):
    out = []
    for j, m in enumerate(ds.matches):
        if j in skip:
            continue
        if m.home_team == team:
            out.append((m.home_goals, m.away_goals, True))
        elif m.away_team == team:
            out.append((m.away_goals, m.home_goals, False))
    return out


def home_advantage(ds: SeasonDataset, excluded: int | None = None) -> HomeAdvantage:
    diffs = [m.goal_diff for j, m in enumerate(ds.matches) if j != excluded]
    if not diffs:
        raise EmptySeason(f"{ds.league} {ds.season}: no matches left for home advantage")
    return HomeAdvantage(sum(diffs) / len(diffs), ds.key, excluded)


def compute_rates(ds: SeasonDataset, i: int) -> RateVector:
    """Unadjusted leave-one-out scoring/conceding rates for match ``i``."""
    m = ds.matches[i]
    rates = []
    for team in (m.home_team, m.away_team):
        games = _team_games(ds, team, {i})
        if not games:
            raise InsufficientGames(f"{team} has fewer than 2 games in {ds.league} {ds.season}")
        n = len(games)
        rates.append((sum(g[0] for g in games) / n, sum(g[1] for g in games) / n))
    return RateVector(rates[0][0], rates[0][1], rates[1][0], rates[1][1])


def adjust_for_home_advantage(ds: SeasonDataset, i: int, rates: RateVector) -> RateVector:
    """Shift rates from :func:`compute_rates` to remove home advantage.

    In every included game a team's goals scored are lowered by HA/2 when it
    played at home and raised by HA/2 away; goals conceded move the opposite
    way. HA is the season mean home-minus-away margin without match ``i``.
    """
    ha = home_advantage(ds, excluded=i).value
    m = ds.matches[i]
    shifts = []
    for team in (m.home_team, m.away_team):
        games = _team_games(ds, team, {i})
        home_minus_away = sum(1 if g[2] else -1 for g in games)
        shifts.append(ha / 2 * home_minus_away / len(games))
    return RateVector(
        rates.x_plus_A - shifts[0],
        rates.x_minus_A + shifts[0],
        rates.x_plus_B - shifts[1],
        rates.x_minus_B + shifts[1],
    )


def season_mean_goals(ds: SeasonDataset, excluded: int | None = None) -> float:
    totals = [m.total_goals for j, m in enumerate(ds.matches) if j != excluded]
    if not totals:
        raise EmptySeason(f"{ds.league} {ds.season}: no matches left for mean goals")
    return sum(totals) / len(totals)


def combine(rates: RateVector, mean_goals: float) -> CombinedFeatures:
    dg_a = rates.x_plus_A - rates.x_minus_A
    dg_b = rates.x_plus_B - rates.x_minus_B
    sg_a = rates.x_plus_A + rates.x_minus_A
    sg_b = rates.x_plus_B + rates.x_minus_B
    return CombinedFeatures(dg_a, dg_b, sg_a, sg_b, dg_a - dg_b, sg_a + sg_b - mean_goals, mean_goals)


# --------------------------------------------------------------------------
# vectorised season tables


def _combine_arrays(xp_a, xm_a, xp_b, xm_b, mean_goals):
    dg_a, dg_b = xp_a - xm_a, xp_b - xm_b
    sg_a, sg_b = xp_a + xm_a, xp_b + xm_b
    return {
        "x_plus_A": xp_a, "x_minus_A": xm_a, "x_plus_B": xp_b, "x_minus_B": xm_b,
        "x_dG_A": dg_a, "x_dG_B": dg_b, "x_sG_A": sg_a, "x_sG_B": sg_b,
        "x_dG_AB": dg_a - dg_b, "x_sG_AB": sg_a + sg_b - mean_goals,
        "mean_goals": mean_goals,
    }


class _SeasonArrays:
    def __init__(self, ds: SeasonDataset):
        self.ds = ds
        self.teams = sorted(ds.teams)
        self.code = {t: k for k, t in enumerate(self.teams)}
        self.home = np.array([self.code[m.home_team] for m in ds.matches], dtype=np.intp)
        self.away = np.array([self.code[m.away_team] for m in ds.matches], dtype=np.intp)
        self.hg = np.array([m.home_goals for m in ds.matches], dtype=float)
        self.ag = np.array([m.away_goals for m in ds.matches], dtype=float)
        self.rounds = np.array([m.round for m in ds.matches], dtype=np.intp)

    def team_sums(self, mask):
        """Per-team (games, scored, conceded, home-minus-away) over masked matches."""
        k = len(self.teams)
        w = mask.astype(float)
        cnt = np.bincount(self.home, w, k) + np.bincount(self.away, w, k)
        scored = np.bincount(self.home, w * self.hg, k) + np.bincount(self.away, w * self.ag, k)
        conceded = np.bincount(self.home, w * self.ag, k) + np.bincount(self.away, w * self.hg, k)
        hma = np.bincount(self.home, w, k) - np.bincount(self.away, w, k)
        return cnt, scored, conceded, hma

    def features(self, home_adjust: bool, extra_exclude=None, targets=None):
        """Feature arrays for matches ``targets`` (default: all).

        Each target match excludes itself plus every match flagged in
        ``extra_exclude``. A target index of -1 denotes a hypothetical
        fixture that excludes nothing of its own; pass its teams via
        ``target_teams``.
        """
        n = len(self.ds.matches)
        keep = np.ones(n, dtype=bool)
        if extra_exclude is not None:
            keep &= ~np.asarray(extra_exclude, dtype=bool)
        idx = np.arange(n) if targets is None else np.asarray(targets, dtype=np.intp)
        return self._features_for(idx, self.home[idx], self.away[idx], keep, home_adjust)

    def fixture_features(self, home_team, away_team, home_adjust):
        for t in (home_team, away_team):
            if t not in self.code:
                raise UnknownTeam(f"{t!r} not in {self.ds.league} {self.ds.season}")
        keep = np.ones(len(self.ds.matches), dtype=bool)
        return self._features_for(
            np.array([-1]), np.array([self.code[home_team]]), np.array([self.code[away_team]]), keep, home_adjust
        )

    def _features_for(self, idx, a, b, keep, home_adjust):
        cnt, scored, conceded, hma = self.team_sums(keep)
        m_total = keep.sum()
        sum_dg = ((self.hg - self.ag) * keep).sum()
        sum_g = ((self.hg + self.ag) * keep).sum()

        real = idx >= 0
        safe = np.where(real, idx, 0)
        own = real & keep[safe]  # the match itself still counted in the sums
        own_f = own.astype(float)
        hg = np.where(real, self.hg[safe], 0.0)
        ag = np.where(real, self.ag[safe], 0.0)

        n_a = cnt[a] - own_f
        n_b = cnt[b] - own_f
        if np.any(n_a < 1) or np.any(n_b < 1):
            bad = np.where((n_a < 1) | (n_b < 1))[0][0]
            team = self.teams[a[bad]] if n_a[bad] < 1 else self.teams[b[bad]]
            raise InsufficientGames(f"{team} has no other games in {self.ds.league} {self.ds.season}")
        m_i = m_total - own_f
        if np.any(m_i < 1):
            raise EmptySeason(f"{self.ds.league} {self.ds.season}: no matches left")
        mean_goals = (sum_g - own_f * (hg + ag)) / m_i

        s_a = scored[a] - own_f * hg
        c_a = conceded[a] - own_f * ag
        s_b = scored[b] - own_f * ag
        c_b = conceded[b] - own_f * hg
        if home_adjust:
            ha = (sum_dg - own_f * (hg - ag)) / m_i
            hma_a = hma[a] - own_f
            hma_b = hma[b] + own_f
            s_a = s_a - ha / 2 * hma_a
            c_a = c_a + ha / 2 * hma_a
            s_b = s_b - ha / 2 * hma_b
            c_b = c_b + ha / 2 * hma_b
        return _combine_arrays(s_a / n_a, c_a / n_a, s_b / n_b, c_b / n_b, mean_goals)


def team_ratings(ds: SeasonDataset, home_adjust: bool = True) -> dict[str, float]:
    """Full-season goal difference per game for every team, optionally HA-corrected."""
    arr = _SeasonArrays(ds)
    cnt, scored, conceded, hma = arr.team_sums(np.ones(len(ds), dtype=bool))
    dg = scored - conceded
    if home_adjust:
        dg = dg - np.mean(arr.hg - arr.ag) * hma
    return {t: float(dg[k] / cnt[k]) for k, t in enumerate(arr.teams)}


@dataclass
class FeatureTable:
    """Column-oriented feature rows used by the evaluation harness."""

    columns: tuple[str, ...]
    X: np.ndarray
    ids: np.ndarray | None  # (n, 3) integer category codes
    y_diff: np.ndarray
    y_total: np.ndarray
    rounds: np.ndarray
    season_keys: list[tuple[str, str]]
    match_index: np.ndarray
    home_goals: np.ndarray
    away_goals: np.ndarray

    def __len__(self):
        return len(self.y_diff)

    def subset(self, mask):
        mask = np.asarray(mask)
        return FeatureTable(
            self.columns,
            self.X[mask],
            None if self.ids is None else self.ids[mask],
            self.y_diff[mask],
            self.y_total[mask],
            self.rounds[mask],
            [k for k, keep in zip(self.season_keys, _as_bool(mask, len(self))) if keep],
            self.match_index[mask],
            self.home_goals[mask],
            self.away_goals[mask],
        )

    def labels(self, target):
        return self.y_diff if target == "diff" else self.y_total

    def to_rows(self) -> list[FeatureRow]:
        rows = []
        for r in range(len(self)):
            rows.append(
                FeatureRow(
                    league=self.season_keys[r][0],
                    season=self.season_keys[r][1],
                    match_index=int(self.match_index[r]),
                    round=int(self.rounds[r]),
                    values=tuple(float(v) for v in self.X[r]),
                    label_diff=int(self.y_diff[r]),
                    label_total=int(self.y_total[r]),
                    home_goals=int(self.home_goals[r]),
                    away_goals=int(self.away_goals[r]),
                    ids=None if self.ids is None else tuple(int(v) for v in self.ids[r]),
                )
            )
        return rows


def _as_bool(mask, n):
    if mask.dtype == bool:
        return mask
    out = np.zeros(n, dtype=bool)
    out[mask] = True
    return out


@dataclass(frozen=True)
class IdCodes:
    teams: dict[str, int]
    seasons: dict[str, int]

    @classmethod
    def from_seasons(cls, datasets: Iterable[SeasonDataset]):
        datasets = list(datasets)
        teams = sorted({t for ds in datasets for t in ds.teams})
        seasons = sorted({ds.season for ds in datasets})
        return cls({t: k for k, t in enumerate(teams)}, {s: k for k, s in enumerate(seasons)})


def build_feature_table(
    datasets: Sequence[SeasonDataset],
    spec: FeatureSetSpec,
    columns: Sequence[str] | None = None,
    exclude_rounds: Iterable[int] = (),
    id_codes: IdCodes | None = None,
) -> FeatureTable:
    """Feature table over every match of ``datasets``.

    ``columns`` overrides the feature set's column list (the Poisson model asks for
    pairwise columns). ``exclude_rounds`` removes those rounds from every
    average in addition to the match itself.
    """
    columns = tuple(columns) if columns is not None else spec.columns
    exclude_rounds = set(exclude_rounds)
    if spec.use_ids and id_codes is None:
        id_codes = IdCodes.from_seasons(datasets)
    blocks, ids, y_d, y_t, rounds, keys, midx, hgs, ags = [], [], [], [], [], [], [], [], []
    for ds in datasets:
        if not len(ds):
            continue
        arr = _SeasonArrays(ds)
        extra = np.isin(arr.rounds, list(exclude_rounds)) if exclude_rounds else None
        feats = arr.features(spec.home_adjust, extra_exclude=extra)
        blocks.append(np.column_stack([np.broadcast_to(feats[c], (len(ds),)) for c in columns]))
        dg = arr.hg - arr.ag
        tg = arr.hg + arr.ag
        y_d.append(np.clip(dg, -10, 10).astype(int))
        y_t.append(np.clip(tg, 0, 16).astype(int))
        rounds.append(arr.rounds)
        keys.extend([ds.key] * len(ds))
        midx.append(np.arange(len(ds)))
        hgs.append(arr.hg.astype(int))
        ags.append(arr.ag.astype(int))
        if spec.use_ids:
            ids.append(
                np.column_stack(
                    [
                        [id_codes.teams[m.home_team] for m in ds.matches],
                        [id_codes.teams[m.away_team] for m in ds.matches],
                        [id_codes.seasons.get(ds.season, -1)] * len(ds),
                    ]
                ).astype(int)
            )
    if not blocks:
        empty = np.zeros(0, dtype=int)
        return FeatureTable(columns, np.zeros((0, len(columns))), np.zeros((0, 3), int) if spec.use_ids else None,
                            empty, empty, empty, [], empty, empty, empty)
    return FeatureTable(
        columns=columns,
        X=np.vstack(blocks),
        ids=np.vstack(ids) if spec.use_ids else None,
        y_diff=np.concatenate(y_d),
        y_total=np.concatenate(y_t),
        rounds=np.concatenate(rounds),
        season_keys=keys,
        match_index=np.concatenate(midx),
        home_goals=np.concatenate(hgs),
        away_goals=np.concatenate(ags),
    )


def build_feature_rows(datasets: Sequence[SeasonDataset], spec: FeatureSetSpec) -> list[FeatureRow]:
    return build_feature_table(datasets, spec).to_rows()


def fixture_features(ds: SeasonDataset, home_team: str, away_team: str, spec: FeatureSetSpec,
                     columns: Sequence[str] | None = None, id_codes: IdCodes | None = None):
    """Features for a (possibly unplayed) fixture using every match in ``ds``.

    Returns ``(values, ids)``; ``ids`` is None unless the feature set uses them.
    """
    columns = tuple(columns) if columns is not None else spec.columns
    feats = _SeasonArrays(ds).fixture_features(home_team, away_team, spec.home_adjust)
    values = np.array([float(np.asarray(feats[c]).reshape(-1)[0]) for c in columns])
    ids = None
    if spec.use_ids:
        if id_codes is None:
            id_codes = IdCodes.from_seasons([ds])
        ids = np.array([id_codes.teams.get(home_team, -1), id_codes.teams.get(away_team, -1),
                        id_codes.seasons.get(ds.season, -1)])
    return values, ids


def write_feature_csv(table: FeatureTable, stream):
    writer = csv.writer(stream, lineterminator="\n")
    id_cols = list(ID_COLUMNS) if table.ids is not None else []
    writer.writerow(["league", "season", "match_index", "round", *table.columns, *id_cols, "label_diff", "label_total"])
    for r in range(len(table)):
        league, season = table.season_keys[r]
        ids = [int(v) for v in table.ids[r]] if table.ids is not None else []
        writer.writerow(
            [league, season, int(table.match_index[r]), int(table.rounds[r]),
             *[repr(float(v)) for v in table.X[r]], *ids, int(table.y_diff[r]), int(table.y_total[r])]
        )
