"""Linear-superposition Poisson score model.

Expected goals of the home side are modelled as

    lambda_home = a_delta_home * x_dG + a_sigma_home * x_sG + a_0_home

and of the away side with the goal-difference feature seen from the away
team (sign flipped). Goals are treated as independent Poisson variables; the
joint score grid is marginalised into goal-difference and total-goal classes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .distribution import OutcomeDistribution
from .errors import NonPositiveLambda, SingularDesign
from .features import DIFF_CLASSES, TOTAL_CLASSES
from .learners.base import TrainedModel

LAMBDA_FLOOR = 0.05
G_MAX = 20


@dataclass(frozen=True)
class SideCoefficients:
    a_delta: float
    a_sigma: float
    a_0: float

    def rate(self, x_dg, x_sg):
        return self.a_delta * x_dg + self.a_sigma * x_sg + self.a_0


@dataclass(frozen=True)
class PoissonCoefficients:
    home: SideCoefficients
    away: SideCoefficients
    # OLS standard errors (a_delta, a_sigma, a_0) per side, when available
    home_se: tuple[float, float, float] | None = None
    away_se: tuple[float, float, float] | None = None

    def __post_init__(self):
        for side in (self.home, self.away):
            if not all(math.isfinite(v) for v in (side.a_delta, side.a_sigma, side.a_0)):
                raise ValueError("coefficients must be finite")

    def to_dict(self):
        out = {
            "home": {"a_delta": self.home.a_delta, "a_sigma": self.home.a_sigma, "a_0": self.home.a_0},
            "away": {"a_delta": self.away.a_delta, "a_sigma": self.away.a_sigma, "a_0": self.away.a_0},
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(SideCoefficients(**d["home"]), SideCoefficients(**d["away"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ScoreDistribution:
    lambda_home: float
    lambda_away: float
    grid: np.ndarray  # grid[g_home, g_away]

    @property
    def g_max(self):
        return self.grid.shape[0] - 1


def poisson_pmf(lam, goals):
    """P(G = goals) for a Poisson variable with mean ``lam``, via log space."""
    lam = np.asarray(lam, dtype=float)
    goals = np.asarray(goals)
    if np.any(lam <= 0):
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")
    out = np.exp(goals * np.log(lam) - lam - gammaln(goals + 1.0))
    return float(out) if out.ndim == 0 else out


def _pmf_table(lams, g_max):
    g = np.arange(g_max + 1)
    return np.exp(g[None, :] * np.log(lams)[:, None] - lams[:, None] - gammaln(g + 1.0)[None, :])


def fit_coefficients(x_dg, x_sg, home_goals, away_goals, use_sigma=True, method="ols"):
    """Fit home and away coefficient triples.

    With ``use_sigma=False`` the total-goals feature is dropped and
    ``a_sigma`` is fixed at zero. ``method`` is ``"ols"`` (least squares on
    raw goal counts) or ``"glm"`` (Poisson likelihood, identity link).
    """
    x_dg = np.asarray(x_dg, dtype=float)
    n = len(x_dg)
    x_sg = np.zeros(n) if x_sg is None else np.asarray(x_sg, dtype=float)
    ones = np.ones(n)
    fits = []
    for sign, goals in ((1.0, home_goals), (-1.0, away_goals)):
        cols = [sign * x_dg, x_sg, ones] if use_sigma else [sign * x_dg, ones]
        design = np.column_stack(cols)
        y = np.asarray(goals, dtype=float)
        if n < design.shape[1] or np.linalg.matrix_rank(design) < design.shape[1]:
            raise SingularDesign("feature design matrix is rank-deficient")
        if method == "ols":
            beta, se = _ols(design, y)
        elif method == "glm":
            beta, se = _identity_poisson_glm(design, y)
        else:
            raise ValueError(f"unknown fitting method {method!r}")
        if not use_sigma:
            beta = np.array([beta[0], 0.0, beta[1]])
            se = np.array([se[0], 0.0, se[1]])
        fits.append((SideCoefficients(*map(float, beta)), tuple(map(float, se))))
    (home, home_se), (away, away_se) = fits
    return PoissonCoefficients(home, away, home_se, away_se)


def _ols(design, y):
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    dof = max(len(y) - design.shape[1], 1)
    sigma2 = resid @ resid / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return beta, np.sqrt(np.diag(cov))


def _identity_poisson_glm(design, y, max_iter=100, tol=1e-10):
    # IRLS with weights 1/mu; means kept strictly positive
    beta, _ = _ols(design, y)
    for _ in range(max_iter):
        mu = np.maximum(design @ beta, LAMBDA_FLOOR)
        w = 1.0 / mu
        xtw = design.T * w
        new = np.linalg.solve(xtw @ design, xtw @ y)
        if np.max(np.abs(new - beta)) < tol:
            beta = new
            break
        beta = new
    mu = np.maximum(design @ beta, LAMBDA_FLOOR)
    cov = np.linalg.inv((design.T / mu) @ design)
    return beta, np.sqrt(np.diag(cov))


def expected_goals(coeffs: PoissonCoefficients, x_dg, x_sg, lambda_floor=LAMBDA_FLOOR):
    """Clamped (lambda_home, lambda_away) arrays for the given features."""
    x_dg = np.asarray(x_dg, dtype=float)
    x_sg = np.zeros_like(x_dg) if x_sg is None else np.asarray(x_sg, dtype=float)
    lam_h = np.maximum(lambda_floor, coeffs.home.rate(x_dg, x_sg))
    lam_a = np.maximum(lambda_floor, coeffs.away.rate(-x_dg, x_sg))
    return lam_h, lam_a


def joint_grids(lam_home, lam_away, g_max=G_MAX):
    """Renormalised joint score grids, shape (n, g_max+1, g_max+1)."""
    if g_max < 10:
        raise ValueError("g_max must be at least 10")
    lam_home = np.atleast_1d(np.asarray(lam_home, dtype=float))
    lam_away = np.atleast_1d(np.asarray(lam_away, dtype=float))
    if np.any(lam_home <= 0) or np.any(lam_away <= 0):
        raise NonPositiveLambda("expected goals must be positive")
    grid = _pmf_table(lam_home, g_max)[:, :, None] * _pmf_table(lam_away, g_max)[:, None, :]
    return grid / grid.sum(axis=(1, 2), keepdims=True)


def predict_score_distribution(coeffs, x_dg, x_sg, g_max=G_MAX, lambda_floor=LAMBDA_FLOOR) -> ScoreDistribution:
    lam_h, lam_a = expected_goals(coeffs, [x_dg], None if x_sg is None else [x_sg], lambda_floor)
    return ScoreDistribution(float(lam_h[0]), float(lam_a[0]), joint_grids(lam_h, lam_a, g_max)[0])


def diff_matrix(grids) -> np.ndarray:
    """Goal-difference class probabilities (-10..+10) for a stack of grids."""
    grids = np.asarray(grids)
    g = grids.shape[-1] - 1
    out = np.zeros((grids.shape[0], len(DIFF_CLASSES)))
    for d in range(-g, g + 1):
        # entries with g_home - g_away = d lie on diagonal offset -d
        mass = np.diagonal(grids, offset=-d, axis1=1, axis2=2).sum(axis=-1)
        out[:, min(10, max(-10, d)) + 10] += mass
    return out


def total_matrix(grids) -> np.ndarray:
    """Total-goal class probabilities (0..16) for a stack of grids."""
    grids = np.asarray(grids)
    g = grids.shape[-1] - 1
    flipped = grids[:, :, ::-1]
    out = np.zeros((grids.shape[0], len(TOTAL_CLASSES)))
    for t in range(0, 2 * g + 1):
        # g_home + g_away = t  <=>  g_home - (g - g_away) = t - g
        mass = np.diagonal(flipped, offset=g - t, axis1=1, axis2=2).sum(axis=-1)
        out[:, min(16, t)] += mass
    return out


def marginalize_diff(sd: ScoreDistribution) -> OutcomeDistribution:
    p = diff_matrix(sd.grid[None])[0]
    return OutcomeDistribution(DIFF_CLASSES, p / p.sum())


def marginalize_total(sd: ScoreDistribution) -> OutcomeDistribution:
    p = total_matrix(sd.grid[None])[0]
    return OutcomeDistribution(TOTAL_CLASSES, p / p.sum())


def implied_home_advantage(coeffs: PoissonCoefficients, mean_goals: float) -> float:
    """Expected home-minus-away goals between two average teams."""
    return coeffs.home.rate(0.0, mean_goals) - coeffs.away.rate(0.0, mean_goals)


class PoissonModel(TrainedModel):
    """Fitted Poisson engine exposing the common ``predict_proba`` contract.

    Input rows carry ``(x_dG_AB, x_sG_AB)``; with ``use_sigma=False`` only
    the first column is used.
    """

    variant = "poisson"

    def __init__(self, coeffs: PoissonCoefficients, target="diff", use_sigma=True,
                 g_max=G_MAX, lambda_floor=LAMBDA_FLOOR):
        self.coeffs = coeffs
        self.target = target
        self.use_sigma = use_sigma
        self.g_max = g_max
        self.lambda_floor = lambda_floor

    @classmethod
    def fit(cls, X, home_goals, away_goals, target="diff", use_sigma=True, method="ols", **kw):
        X = np.asarray(X, dtype=float)
        x_sg = X[:, 1] if use_sigma else None
        coeffs = fit_coefficients(X[:, 0], x_sg, home_goals, away_goals, use_sigma=use_sigma, method=method)
        return cls(coeffs, target=target, use_sigma=use_sigma, **kw)

    def predict_proba(self, X, ids=None):
        X = np.asarray(X, dtype=float)
        x_sg = X[:, 1] if self.use_sigma else None
        lam_h, lam_a = expected_goals(self.coeffs, X[:, 0], x_sg, self.lambda_floor)
        out = []
        for start in range(0, len(lam_h), 2048):
            grids = joint_grids(lam_h[start:start + 2048], lam_a[start:start + 2048], self.g_max)
            out.append(diff_matrix(grids) if self.target == "diff" else total_matrix(grids))
        P = np.vstack(out) if out else np.zeros((0, 21 if self.target == "diff" else 17))
        return P / P.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {
            "variant": self.variant,
            "format_version": 1,
            "target": self.target,
            "use_sigma": self.use_sigma,
            "g_max": self.g_max,
            "lambda_floor": self.lambda_floor,
            "coefficients": self.coeffs.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(PoissonCoefficients.from_dict(d["coefficients"]), target=d["target"], use_sigma=d["use_sigma"],
                   g_max=d["g_max"], lambda_floor=d["lambda_floor"])
