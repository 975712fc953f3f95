"""Autocorrelation of team goal differences within a season.

For every team the goal differences are taken in the order the team actually
played its games. Products ``dG(n) * dG(n + lag)`` are pooled over all teams,
seasons and leagues; pairs against the same opponent are skipped, and each
goal difference can be corrected for the season's home advantage.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .data import SeasonDataset, team_game_index
from .errors import InsufficientGames


@dataclass(frozen=True)
class AutocorrEntry:
    dn: int
    corr: float
    n_terms: int
    std_err: float


@dataclass(frozen=True)
class AutocorrSeries:
    entries: tuple[AutocorrEntry, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def dn(self):
        return np.array([e.dn for e in self.entries])

    @property
    def corr(self):
        return np.array([e.corr for e in self.entries])

    @property
    def std_err(self):
        return np.array([e.std_err for e in self.entries])

    def write_csv(self, stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["dn", "corr", "n_terms", "std_err"])
        for e in self.entries:
            writer.writerow([e.dn, repr(e.corr), e.n_terms, repr(e.std_err)])


def team_sequences(ds: SeasonDataset, use_home_adjustment: bool = True):
    """Per team: (corrected goal differences, opponents) in playing order."""
    ha = sum(m.goal_diff for m in ds.matches) / len(ds.matches) if use_home_adjustment and len(ds) else 0.0
    out = {}
    for team in sorted(ds.teams):
        games = team_game_index(ds, team).games
        diffs = np.array([g.goal_diff - ha if g.is_home else g.goal_diff + ha for g in games], dtype=float)
        out[team] = (diffs, [g.opponent for g in games])
    return out


def autocorrelation(datasets, dn_max: int, use_home_adjustment: bool = True, normalize: bool = False,
                    skip_same_opponent: bool = True) -> AutocorrSeries:
    datasets = list(datasets)
    if dn_max < 1:
        raise ValueError("dn_max must be at least 1")
    for ds in datasets:
        short = [t for t, c in ds.games_per_team.items() if c < dn_max + 1]
        if short:
            raise InsufficientGames(f"{ds.league} {ds.season}: {', '.join(sorted(short))} play fewer than {dn_max + 1} games")
    seqs = [team_sequences(ds, use_home_adjustment) for ds in datasets]
    per_lag = []
    for dn in range(1, dn_max + 1):
        products = []
        for teams in seqs:
            for diffs, opponents in teams.values():
                keep = np.array([opponents[n] != opponents[n + dn] or not skip_same_opponent
                                 for n in range(len(diffs) - dn)], dtype=bool)
                if keep.size:
                    products.append((diffs[:-dn] * diffs[dn:])[keep])
        prods = np.concatenate(products) if products else np.zeros(0)
        # lags where every pair meets the same opponent have no terms and are not reported
        if prods.size:
            per_lag.append((dn, prods))
    if not per_lag:
        raise InsufficientGames("no product terms at any lag")
    scale = 1.0
    if normalize:
        scale = float(np.mean(np.concatenate([p for _, p in per_lag])))
    entries = []
    for dn, prods in per_lag:
        se = prods.std(ddof=1) / math.sqrt(prods.size) if prods.size > 1 else 0.0
        entries.append(AutocorrEntry(dn, float(prods.mean() / scale), int(prods.size), float(se / abs(scale))))
    return AutocorrSeries(tuple(entries))


@dataclass(frozen=True)
class TrendFit:
    slope: float
    slope_se: float
    intercept: float

    @property
    def flat(self) -> bool:
        """Slope consistent with zero within two standard errors."""
        return abs(self.slope) <= 2 * self.slope_se


def trend_test(series: AutocorrSeries) -> TrendFit:
    """Weighted least-squares line through corr(dn), weights 1/std_err^2."""
    x, y, se = series.dn.astype(float), series.corr, series.std_err
    w = 1.0 / se ** 2
    A = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    beta = cov @ (A.T @ (w * y))
    return TrendFit(float(beta[1]), float(math.sqrt(cov[1, 1])), float(beta[0]))
