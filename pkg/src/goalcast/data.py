"""Match result ingestion and per-season indexing.

CSV layout (UTF-8, header mandatory, RFC 4180 quoting)::

    league,season,round,date,home_team,away_team,home_goals,away_goals
    D1,2014-2015,1,2014-08-22,FCB,VFB,2,0

``date`` is optional and may be omitted as a column or left blank per row.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable

from .errors import DuplicateFixture, MalformedRow, UnknownTeam

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("league", "season", "round", "home_team", "away_team", "home_goals", "away_goals")
CSV_COLUMNS = ("league", "season", "round", "date", "home_team", "away_team", "home_goals", "away_goals")


@dataclass(frozen=True)
class MatchRecord:
    league: str
    season: str
    round: int
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int
    date: date | None = None

    def __post_init__(self):
        if self.home_team == self.away_team:
            raise ValueError(f"team {self.home_team!r} cannot play itself")
        for name in ("home_goals", "away_goals", "round"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an int, got {value!r}")
        if self.home_goals < 0 or self.away_goals < 0:
            raise ValueError("goals must be non-negative")
        if self.round < 1:
            raise ValueError("round must be positive")

    @property
    def goal_diff(self) -> int:
        return self.home_goals - self.away_goals

    @property
    def total_goals(self) -> int:
        return self.home_goals + self.away_goals

    @property
    def key(self) -> tuple[str, str]:
        return (self.league, self.season)


@dataclass(frozen=True)
class TeamGame:
    number: int  # 1-based position in the team's own played sequence
    match_index: int  # position of the match in SeasonDataset.matches
    is_home: bool
    goal_diff: int  # own goals minus opponent goals
    opponent: str
    scored: int
    conceded: int


@dataclass(frozen=True)
class TeamGameIndex:
    team: str
    games: tuple[TeamGame, ...]

    def __len__(self):
        return len(self.games)

    def __iter__(self):
        return iter(self.games)


@dataclass(frozen=True)
class SeasonDataset:
    league: str
    season: str
    matches: tuple[MatchRecord, ...]
    teams: frozenset[str] = field(init=False)
    games_per_team: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        counts: dict[str, int] = defaultdict(int)
        for m in self.matches:
            counts[m.home_team] += 1
            counts[m.away_team] += 1
        object.__setattr__(self, "teams", frozenset(counts))
        object.__setattr__(self, "games_per_team", dict(counts))

    @property
    def key(self) -> tuple[str, str]:
        return (self.league, self.season)

    @property
    def n_teams(self) -> int:
        return len(self.teams)

    @property
    def n_rounds(self) -> int:
        """Scheduled rounds of a complete double round robin."""
        return 2 * (self.n_teams - 1)

    @property
    def max_round(self) -> int:
        return max((m.round for m in self.matches), default=0)

    @property
    def complete(self) -> bool:
        return all(c == self.n_rounds for c in self.games_per_team.values())

    def __len__(self):
        return len(self.matches)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # assume a binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _parse_int(raw, line_no, column):
    text = (raw or "").strip()
    try:
        value = int(text)
    except ValueError:
        raise MalformedRow(line_no, f"{column} is not an integer: {raw!r}") from None
    return value


def parse_csv(source, columns: dict[str, str] | None = None, delimiter: str = ","):
    """Parse match results from a CSV path or stream.

    ``columns`` optionally maps canonical column names to the names used in
    the file header. Returns ``(records, skipped_blank_lines)``; row order is
    preserved.
    """
    rename = {v: k for k, v in (columns or {}).items()}
    handle, owned = _open_text(source)
    try:
        reader = csv.reader(handle, delimiter=delimiter)
        header = None
        for row in reader:
            if any(cell.strip() for cell in row):
                header = [rename.get(c.strip(), c.strip()) for c in row]
                break
        if header is None:
            return [], 0
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise MalformedRow(reader.line_num, f"missing column(s) {', '.join(missing)}")
        pos = {name: header.index(name) for name in CSV_COLUMNS if name in header}

        records: list[MatchRecord] = []
        seen: set[tuple[str, str, str, str]] = set()
        skipped = 0
        for row in reader:
            line_no = reader.line_num
            if not any(cell.strip() for cell in row):
                skipped += 1
                continue
            if len(row) < len(header):
                raise MalformedRow(line_no, f"expected {len(header)} fields, got {len(row)}")
            get = lambda name: row[pos[name]].strip()  # noqa: E731
            home_goals = _parse_int(get("home_goals"), line_no, "home_goals")
            away_goals = _parse_int(get("away_goals"), line_no, "away_goals")
            rnd = _parse_int(get("round"), line_no, "round")
            if home_goals < 0 or away_goals < 0:
                raise MalformedRow(line_no, "goals must be non-negative")
            if rnd < 1:
                raise MalformedRow(line_no, "round must be positive")
            when = None
            if "date" in pos and get("date"):
                try:
                    when = date.fromisoformat(get("date"))
                except ValueError:
                    raise MalformedRow(line_no, f"bad ISO date {get('date')!r}") from None
            for name in ("league", "season", "home_team", "away_team"):
                if not get(name):
                    raise MalformedRow(line_no, f"empty {name}")
            if get("home_team") == get("away_team"):
                raise MalformedRow(line_no, "home_team equals away_team")
            fixture = (get("league"), get("season"), get("home_team"), get("away_team"))
            if fixture in seen:
                raise DuplicateFixture(f"line {line_no}: {fixture[2]} v {fixture[3]} repeated in {fixture[0]} {fixture[1]}")
            seen.add(fixture)
            records.append(
                MatchRecord(
                    league=fixture[0],
                    season=fixture[1],
                    round=rnd,
                    home_team=fixture[2],
                    away_team=fixture[3],
                    home_goals=home_goals,
                    away_goals=away_goals,
                    date=when,
                )
            )
        return records, skipped
    finally:
        if owned:
            handle.close()


def write_csv(records: Iterable[MatchRecord], stream):
    """Write records in the format :func:`parse_csv` reads."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for m in records:
        writer.writerow(
            [m.league, m.season, m.round, m.date.isoformat() if m.date else "",
             m.home_team, m.away_team, m.home_goals, m.away_goals]
        )


def build_season(records: Iterable[MatchRecord]):
    """Group records by (league, season).

    Returns ``(seasons, warnings)`` where ``seasons`` maps the key to a
    :class:`SeasonDataset` (insertion order follows first appearance) and
    ``warnings`` lists human-readable notes about incomplete seasons.
    """
    grouped: dict[tuple[str, str], list[MatchRecord]] = {}
    for m in records:
        grouped.setdefault(m.key, []).append(m)
    seasons = {k: SeasonDataset(k[0], k[1], tuple(ms)) for k, ms in grouped.items()}
    warnings = []
    for ds in seasons.values():
        if not ds.complete:
            expected = ds.n_teams * (ds.n_teams - 1)
            msg = f"{ds.league} {ds.season}: incomplete season ({len(ds)} of {expected} matches)"
            logger.warning(msg)
            warnings.append(msg)
    return seasons, warnings


def team_game_index(ds: SeasonDataset, team: str) -> TeamGameIndex:
    if team not in ds.teams:
        raise UnknownTeam(f"{team!r} not in {ds.league} {ds.season}")
    own = [(i, m) for i, m in enumerate(ds.matches) if team in (m.home_team, m.away_team)]
    if all(m.date is not None for _, m in own):
        own.sort(key=lambda im: (im[1].date, im[1].round, im[0]))
    else:
        own.sort(key=lambda im: (im[1].round, im[0]))
    games = []
    for n, (i, m) in enumerate(own, start=1):
        home = m.home_team == team
        scored, conceded = (m.home_goals, m.away_goals) if home else (m.away_goals, m.home_goals)
        games.append(
            TeamGame(
                number=n,
                match_index=i,
                is_home=home,
                goal_diff=scored - conceded,
                opponent=m.away_team if home else m.home_team,
                scored=scored,
                conceded=conceded,
            )
        )
    return TeamGameIndex(team, tuple(games))


def load_seasons(paths):
    """Parse one or more CSV files and group them into seasons."""
    records: list[MatchRecord] = []
    seen = set()
    for path in paths:
        recs, _ = parse_csv(path)
        for r in recs:
            fixture = (r.league, r.season, r.home_team, r.away_team)
            if fixture in seen:
                raise DuplicateFixture(f"{path}: {r.home_team} v {r.away_team} repeated in {r.league} {r.season}")
            seen.add(fixture)
        records.extend(recs)
    return build_season(records)
