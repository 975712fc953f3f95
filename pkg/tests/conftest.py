import pytest

from goalcast.data import MatchRecord, build_season
from goalcast.synth import GeneratorConfig, generate


def season_from(rows, league="L", season="S"):
    """Rows are (round, home, away, home_goals, away_goals)."""
    recs = [MatchRecord(league, season, r, h, a, hg, ag) for r, h, a, hg, ag in rows]
    seasons, _ = build_season(recs)
    return seasons[(league, season)]


@pytest.fixture
def four_team_season():
    recs = generate(GeneratorConfig(seed=7, n_teams=4, home_advantage=0.4, spread=0.3))
    seasons, _ = build_season(recs)
    return next(iter(seasons.values()))


@pytest.fixture
def unbalanced_season():
    # team A: 3 home games, 1 away game
    return season_from(
        [
            (1, "A", "B", 2, 0),
            (2, "A", "C", 1, 1),
            (3, "A", "D", 0, 1),
            (4, "D", "A", 2, 3),
            (5, "B", "C", 1, 0),
            (6, "C", "D", 4, 1),
            (7, "D", "B", 0, 0),
        ]
    )


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number, passed, detail):
    """``passed`` is True, False, or None for a skipped criterion."""
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"criterion {number}: {status}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
