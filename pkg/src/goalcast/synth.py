"""Synthetic league generator with known ground truth.

Each season is a double round robin. Per team, an attack offset ``s`` and a
defence offset ``d`` are drawn once per season (optionally redrawn at the
half-way point), and goals are independent Poisson draws::

    lambda_home = max(eps, base + s_A - d_B + HA/2)
    lambda_away = max(eps, base + s_B - d_A - HA/2)

A team's expected goal difference against an average opponent is therefore
``s + d`` (up to a constant), which is what :class:`SeasonTruth` reports as
``strength``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .data import MatchRecord
from .errors import InvalidConfig

DEFAULT_LAMBDA_FLOOR = 0.05


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    n_teams: int = 18
    n_seasons: int = 1
    base_rate: float = 1.35
    spread: float = 0.25
    attack_defence_corr: float = 0.0
    home_advantage: float = 0.3
    redraw_midseason: bool = False
    league: str = "SYN"
    first_season: int = 2000
    lambda_floor: float = DEFAULT_LAMBDA_FLOOR

    def validate(self):
        if self.seed is None:
            raise InvalidConfig("seed is mandatory")
        if self.n_teams < 2 or self.n_teams % 2:
            raise InvalidConfig("n_teams must be an even number >= 2")
        if self.n_seasons < 1:
            raise InvalidConfig("n_seasons must be >= 1")
        if self.base_rate <= 0 or self.lambda_floor <= 0:
            raise InvalidConfig("rates must be positive")
        if self.spread < 0:
            raise InvalidConfig("spread must be non-negative")
        if not -1.0 <= self.attack_defence_corr <= 1.0:
            raise InvalidConfig("attack_defence_corr must lie in [-1, 1]")


@dataclass(frozen=True)
class SeasonTruth:
    league: str
    season: str
    attack: dict[str, float]
    defence: dict[str, float]
    # second-half offsets when redraw_midseason is set
    attack_late: dict[str, float] = field(default_factory=dict)
    defence_late: dict[str, float] = field(default_factory=dict)
    home_advantage: float = 0.0

    @property
    def strength(self) -> dict[str, float]:
        return {t: self.attack[t] + self.defence[t] for t in self.attack}


def round_robin(teams):
    """Double round robin by the circle method.

    Returns a list of rounds, each a list of (home, away) pairs. Venues are
    assigned so teams alternate home and away where possible; the second half
    mirrors the first with venues swapped.
    """
    teams = list(teams)
    n = len(teams)
    rotation = teams[1:]
    first_half = []
    last_home = {t: None for t in teams}
    home_count = {t: 0 for t in teams}
    for r in range(n - 1):
        lineup = [teams[0]] + rotation
        pairs = []
        for k in range(n // 2):
            a, b = lineup[k], lineup[n - 1 - k]
            # hosting goes to whoever was away last round; ties to the team with fewer home games
            if last_home[a] != last_home[b]:
                home_first = last_home[b] is True
            elif home_count[a] != home_count[b]:
                home_first = home_count[a] < home_count[b]
            else:
                home_first = (r + k) % 2 == 0
            home, away = (a, b) if home_first else (b, a)
            pairs.append((home, away))
            last_home[home], last_home[away] = True, False
            home_count[home] += 1
        first_half.append(pairs)
        rotation = rotation[-1:] + rotation[:-1]
    second_half = [[(b, a) for a, b in pairs] for pairs in first_half]
    return first_half + second_half


def _draw_offsets(rng, cfg, n):
    """Correlated normal (attack, defence) offsets; a perfect correlation is allowed."""
    if cfg.spread == 0:
        return np.zeros(n), np.zeros(n)
    rho = cfg.attack_defence_corr
    z = rng.standard_normal((n, 2))
    attack = cfg.spread * z[:, 0]
    defence = cfg.spread * (rho * z[:, 0] + np.sqrt(1.0 - rho * rho) * z[:, 1])
    return attack, defence


def generate_with_truth(config: GeneratorConfig):
    """Generate matches plus the per-season ground truth used to make them."""
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_seasons)
    teams = [f"T{k + 1:02d}" for k in range(config.n_teams)]
    records: list[MatchRecord] = []
    truths: list[SeasonTruth] = []
    for s_idx, seq in enumerate(seeds):
        rng = np.random.default_rng(seq)
        year = config.first_season + s_idx
        season = f"{year}-{year + 1}"
        att, dfn = _draw_offsets(rng, config, config.n_teams)
        attack = dict(zip(teams, att.tolist()))
        defence = dict(zip(teams, dfn.tolist()))
        attack_late, defence_late = {}, {}
        if config.redraw_midseason:
            att2, dfn2 = _draw_offsets(rng, config, config.n_teams)
            attack_late = dict(zip(teams, att2.tolist()))
            defence_late = dict(zip(teams, dfn2.tolist()))
        order = list(rng.permutation(teams))
        schedule = round_robin(order)
        half = len(schedule) // 2
        start = date(year, 8, 1)
        for r, pairs in enumerate(schedule, start=1):
            late = config.redraw_midseason and r > half
            a_map = attack_late if late else attack
            d_map = defence_late if late else defence
            for home, away in pairs:
                lam_h = max(config.lambda_floor, config.base_rate + a_map[home] - d_map[away] + config.home_advantage / 2)
                lam_a = max(config.lambda_floor, config.base_rate + a_map[away] - d_map[home] - config.home_advantage / 2)
                hg, ag = rng.poisson([lam_h, lam_a])
                records.append(
                    MatchRecord(
                        league=config.league,
                        season=season,
                        round=r,
                        home_team=home,
                        away_team=away,
                        home_goals=int(hg),
                        away_goals=int(ag),
                        date=start + timedelta(days=7 * (r - 1)),
                    )
                )
        truths.append(
            SeasonTruth(config.league, season, attack, defence, attack_late, defence_late, config.home_advantage)
        )
    return records, truths


def generate(config: GeneratorConfig) -> list[MatchRecord]:
    return generate_with_truth(config)[0]
