import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goalcast.data import build_season
from goalcast.errors import EmptySeason, InsufficientGames, UnknownTeam
from goalcast.features import (
    FeatureSetSpec,
    RateVector,
    adjust_for_home_advantage,
    build_feature_rows,
    build_feature_table,
    combine,
    compute_rates,
    fixture_features,
    home_advantage,
    season_mean_goals,
    write_feature_csv,
)
from goalcast.synth import GeneratorConfig, generate

from conftest import season_from


def brute_force_features(ds, i, adjust, extra_excluded=()):
    """Independent oracle: drop match i (and extras), then average plainly."""
    dropped = {i, *extra_excluded}
    remaining = [m for j, m in enumerate(ds.matches) if j not in dropped]
    ha = sum(m.home_goals - m.away_goals for m in remaining) / len(remaining) if adjust else 0.0
    mean_goals = sum(m.home_goals + m.away_goals for m in remaining) / len(remaining)
    target = ds.matches[i]
    out = []
    for team in (target.home_team, target.away_team):
        scored, conceded, n = 0.0, 0.0, 0
        for m in remaining:
            if m.home_team == team:
                scored += m.home_goals - ha / 2
                conceded += m.away_goals + ha / 2
                n += 1
            elif m.away_team == team:
                scored += m.away_goals + ha / 2
                conceded += m.home_goals - ha / 2
                n += 1
        out += [scored / n, conceded / n]
    xp_a, xm_a, xp_b, xm_b = out
    return {
        "x_plus_A": xp_a, "x_minus_A": xm_a, "x_plus_B": xp_b, "x_minus_B": xm_b,
        "x_dG_AB": (xp_a - xm_a) - (xp_b - xm_b),
        "x_sG_AB": (xp_a + xm_a) + (xp_b + xm_b) - mean_goals,
    }


def test_rates_hand_example(unbalanced_season):
    # A's games (for, against): (2,0) (1,1) (0,1) (3,2); leave out the 2:0
    r = compute_rates(unbalanced_season, 0)
    assert r.x_plus_A == pytest.approx(4 / 3, abs=1e-15)
    assert r.x_minus_A == pytest.approx(4 / 3, abs=1e-15)


def test_rates_goalless_team():
    ds = season_from([(1, "A", "B", 0, 0), (2, "B", "A", 0, 0), (3, "A", "C", 0, 0)])
    r = compute_rates(ds, 0)
    assert r.x_plus_A == 0 and r.x_minus_A == 0


def test_rates_need_two_games():
    ds = season_from([(1, "A", "B", 1, 0), (2, "B", "C", 0, 0)])
    with pytest.raises(InsufficientGames):
        compute_rates(ds, 0)
    with pytest.raises(InsufficientGames):
        build_feature_table([ds], FeatureSetSpec("raw4"))


def test_home_advantage_constant():
    ds = season_from([(1, "A", "B", 2, 1), (2, "B", "A", 2, 1), (3, "A", "C", 2, 1)])
    assert home_advantage(ds).value == 1.0


def test_home_advantage_symmetric():
    ds = season_from([(1, "A", "B", 3, 0), (2, "B", "A", 0, 3)])
    assert home_advantage(ds).value == 0.0


def test_home_advantage_excluding_one_of_twelve():
    rows = [
        (1, "A", "B", 2, 0), (1, "C", "D", 1, 1),
        (2, "A", "C", 3, 1), (2, "B", "D", 0, 2),
        (3, "A", "D", 1, 0), (3, "B", "C", 2, 2),
        (4, "B", "A", 1, 1), (4, "D", "C", 0, 1),
        (5, "C", "A", 4, 0), (5, "D", "B", 2, 1),
        (6, "D", "A", 0, 0), (6, "C", "B", 1, 3),
    ]
    ds = season_from(rows)
    # margins: 2,0,2,-2,1,0,0,-1,4,1,0,-2 -> total 5; drop the 4:0 -> 1/11
    ha = home_advantage(ds, excluded=8)
    assert ha.value == pytest.approx(1 / 11, abs=1e-15)
    assert ha.excluded_match == 8 and ha.scope == ("L", "S")
    assert home_advantage(ds).value == pytest.approx(5 / 12, abs=1e-15)


def test_home_advantage_empty():
    ds = season_from([(1, "A", "B", 1, 0)])
    with pytest.raises(EmptySeason):
        home_advantage(ds, excluded=0)


def test_adjust_identity_when_no_home_advantage():
    ds = season_from([(1, "A", "B", 1, 1), (2, "B", "A", 2, 2), (3, "A", "C", 0, 0), (4, "C", "B", 3, 3)])
    r = compute_rates(ds, 0)
    assert adjust_for_home_advantage(ds, 0, r) == r


def test_adjust_balanced_schedule_keeps_goal_difference(four_team_season):
    ds = four_team_season
    # each team has 3 home + 3 away games; excluding one match leaves it unbalanced,
    # so compare on a fixture that excludes nothing from the team
    spec_raw = FeatureSetSpec("dg_a_dg_b")
    spec_adj = FeatureSetSpec("dg_a_dg_b", home_adjust=True)
    home, away = ds.matches[0].home_team, ds.matches[0].away_team
    raw, _ = fixture_features(ds, home, away, spec_raw)
    adj, _ = fixture_features(ds, home, away, spec_adj)
    assert np.allclose(raw, adj, atol=1e-14)
    assert home_advantage(ds).value != 0


def test_adjust_unbalanced_schedule(unbalanced_season):
    ds = unbalanced_season
    # match 0 left out: A keeps 2 home and 1 away game; HA over the other six = 2/6
    ha = 1 / 3
    raw = compute_rates(ds, 0)
    adj = adjust_for_home_advantage(ds, 0, raw)
    assert adj.x_plus_A - raw.x_plus_A == pytest.approx(-ha / (2 * 3), abs=1e-15)
    dg_shift = (adj.x_plus_A - adj.x_minus_A) - (raw.x_plus_A - raw.x_minus_A)
    assert dg_shift == pytest.approx(-ha / 3, abs=1e-15)
    assert adj.x_plus_A + adj.x_minus_A == pytest.approx(raw.x_plus_A + raw.x_minus_A, abs=1e-15)


def test_combine_arithmetic():
    c = combine(RateVector(1.5, 0.5, 1.0, 1.0), 2.7)
    assert (c.x_dG_A, c.x_sG_A) == (1.0, 2.0)
    c = combine(RateVector(1.2, 1.4, 1.3, 1.5), 2.7)
    assert c.x_sG_AB == pytest.approx(2.7, abs=1e-12)
    same = combine(RateVector(1.1, 0.7, 1.1, 0.7), 2.5)
    assert same.x_dG_AB == 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 6, allow_nan=False), min_size=4, max_size=4))
def test_combine_is_invertible(vals):
    r = RateVector(*vals)
    c = combine(r, 2.6)
    xp = (c.x_sG_A + c.x_dG_A) / 2
    xm = (c.x_sG_A - c.x_dG_A) / 2
    # rounding is relative to the operands, i.e. to x_sG
    assert abs(xp - r.x_plus_A) <= math.ulp(c.x_sG_A)
    assert abs(xm - r.x_minus_A) <= math.ulp(c.x_sG_A)


def test_single_match_ops_match_table(unbalanced_season):
    ds = unbalanced_season
    table = build_feature_table([ds], FeatureSetSpec("raw4", home_adjust=True), columns=("x_plus_A", "x_minus_A", "x_plus_B", "x_minus_B", "x_dG_AB", "x_sG_AB"))
    for i in range(len(ds)):
        adj = adjust_for_home_advantage(ds, i, compute_rates(ds, i))
        c = combine(adj, season_mean_goals(ds, excluded=i))
        expected = [adj.x_plus_A, adj.x_minus_A, adj.x_plus_B, adj.x_minus_B, c.x_dG_AB, c.x_sG_AB]
        assert np.allclose(table.X[i], expected, rtol=0, atol=1e-13)


@pytest.mark.parametrize("adjust", [False, True])
def test_table_matches_brute_force_four_teams(four_team_season, adjust):
    cols = ("x_plus_A", "x_minus_A", "x_plus_B", "x_minus_B", "x_dG_AB", "x_sG_AB")
    table = build_feature_table([four_team_season], FeatureSetSpec("raw4", home_adjust=adjust), columns=cols)
    for i in range(len(four_team_season)):
        oracle = brute_force_features(four_team_season, i, adjust)
        got = dict(zip(cols, table.X[i]))
        for c in cols:
            if adjust:
                assert got[c] == pytest.approx(oracle[c], abs=1e-12)
            else:
                assert got[c] == oracle[c]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), n_teams=st.sampled_from([4, 6, 8]), adjust=st.booleans(),
       strict_round=st.integers(1, 6))
def test_leave_one_out_oracle_equivalence(seed, n_teams, adjust, strict_round):
    recs = generate(GeneratorConfig(seed=seed, n_teams=n_teams, spread=0.5, home_advantage=0.4))
    seasons, _ = build_season(recs)
    (ds,) = seasons.values()
    cols = ("x_plus_A", "x_minus_A", "x_plus_B", "x_minus_B", "x_dG_AB", "x_sG_AB")
    spec = FeatureSetSpec("raw4", home_adjust=adjust)
    for excl in ((), (strict_round,)):
        table = build_feature_table([ds], spec, columns=cols, exclude_rounds=excl)
        extra = [j for j, m in enumerate(ds.matches) if m.round in excl]
        for i in range(len(ds)):
            oracle = brute_force_features(ds, i, adjust, extra)
            for c, v in zip(cols, table.X[i]):
                if adjust:
                    assert v == pytest.approx(oracle[c], abs=1e-12)
                else:
                    assert v == oracle[c]


def test_zero_sum_of_team_goal_differences(four_team_season):
    ds = four_team_season
    totals = {}
    for m in ds.matches:
        totals[m.home_team] = totals.get(m.home_team, 0) + m.goal_diff
        totals[m.away_team] = totals.get(m.away_team, 0) - m.goal_diff
    assert sum(totals.values()) == 0


def test_labels_clip():
    ds = season_from([(1, "A", "B", 5, 0), (2, "B", "A", 12, 0), (3, "A", "C", 9, 9), (4, "C", "B", 0, 1)])
    rows = build_feature_rows([ds], FeatureSetSpec("dg_ab"))
    assert rows[0].label_diff == 5
    assert rows[1].label_diff == 10
    assert rows[2].label_total == 16
    assert rows[2].label_diff == 0


@pytest.mark.parametrize(
    "name, width",
    [("dg_ab", 1), ("dg_sg_ab", 2), ("dg_a_dg_b", 2), ("dg_sg", 4), ("dg_sg_ids", 4), ("raw4", 4)],
)
def test_feature_set_shapes(four_team_season, name, width):
    rows = build_feature_rows([four_team_season], FeatureSetSpec(name))
    assert len(rows) == len(four_team_season)
    assert all(len(r.values) == width for r in rows)
    assert all((r.ids is not None) == name.endswith("_ids") for r in rows)


def test_dg_sg_declared_order(four_team_season):
    ds = four_team_season
    row = build_feature_rows([ds], FeatureSetSpec("dg_sg"))[3]
    r = compute_rates(ds, 3)
    c = combine(r, season_mean_goals(ds, 3))
    assert np.allclose(row.values, [c.x_dG_A, c.x_dG_B, c.x_sG_A, c.x_sG_B], atol=1e-14)


def test_rows_are_deterministic(four_team_season):
    spec = FeatureSetSpec("dg_sg_ids", home_adjust=True)
    assert build_feature_rows([four_team_season], spec) == build_feature_rows([four_team_season], spec)


def test_unknown_feature_set():
    with pytest.raises(ValueError, match="unknown feature set"):
        FeatureSetSpec("elo")


def test_fixture_features_unknown_team(four_team_season):
    with pytest.raises(UnknownTeam):
        fixture_features(four_team_season, "T01", "nobody", FeatureSetSpec("dg_ab"))


def test_feature_csv_header(four_team_season):
    buf = io.StringIO()
    write_feature_csv(build_feature_table([four_team_season], FeatureSetSpec("dg_sg_ids")), buf)
    header = buf.getvalue().splitlines()[0].split(",")
    assert header == ["league", "season", "match_index", "round", "x_dG_A", "x_dG_B", "x_sG_A", "x_sG_B",
                      "id_A", "id_B", "id_season", "label_diff", "label_total"]
    assert len(buf.getvalue().splitlines()) == 1 + len(four_team_season)


def test_team_ratings_match_hand_count(unbalanced_season):
    from goalcast.features import team_ratings

    raw = team_ratings(unbalanced_season, home_adjust=False)
    # A: 2:0, 1:1, 0:1 at home, 3:2 away
    assert raw["A"] == pytest.approx((2 + 0 - 1 + 1) / 4)
    ha = sum(m.home_goals - m.away_goals for m in unbalanced_season.matches) / 7
    adjusted = team_ratings(unbalanced_season)
    # two more home than away games: each home game is worth HA, each away game costs HA
    assert adjusted["A"] == pytest.approx((2 - 2 * ha) / 4)
