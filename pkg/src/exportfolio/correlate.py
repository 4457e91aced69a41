"""Cross-country correlation between export shares and GDP.

Three statistics are computed over the countries of a panel:

* the Pearson correlation between a category's local-share profile and the
  normalized GDP profile of one year (raw values, not logs);
* the GDP elasticity of a category share, the OLS slope of
  ``ln share`` on ``ln g`` across countries of one year;
* the correlation between multiplicative changes of shares and of GDP
  between two years.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats

from .ingest import TradePanel
from .shares import gdp_profile, local_shares

PARAMETRIC = "parametric"
PERMUTATION = "permutation"


class CorrelationError(ValueError):
    pass


class ElasticityError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int
    method: str = PARAMETRIC


def _check_profiles(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise CorrelationError(f"profiles must be 1-d and equally long, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise CorrelationError(f"need at least 3 paired values, got {x.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise CorrelationError("profiles contain non-finite values")
    return x, y


def _centered(v):
    d = v - v.mean()
    ss = float(d @ d)
    if ss == 0.0:
        raise CorrelationError("profile has zero variance")
    return d, ss


def pearson(
    x,
    y,
    method: str = PARAMETRIC,
    n_permutations: int = 10_000,
    seed: int | None = 0,
) -> CorrelationResult:
    """Pearson correlation of two paired profiles with a two-sided p-value.

    Parameters
    ----------
    x, y : array_like
        Paired samples, at least 3 each, neither constant.
    method : {"parametric", "permutation"}
        ``parametric`` refers ``rho * sqrt((n-2)/(1-rho^2))`` to a Student t
        distribution with ``n-2`` degrees of freedom. ``permutation``
        shuffles `y` `n_permutations` times and reports
        ``(1 + #{|rho*| >= |rho|}) / (1 + n_permutations)``.
    seed : int, optional
        Seed of the permutation stream; ignored for the parametric test.
    """
    x, y = _check_profiles(x, y)
    dx, sx = _centered(x)
    dy, sy = _centered(y)
    norm = np.sqrt(sx * sy)
    rho = float(np.clip((dx @ dy) / norm, -1.0, 1.0))
    n = x.size
    if method == PARAMETRIC:
        p = _t_test_p(rho, n)
    elif method == PERMUTATION:
        p = _permutation_p(dx, dy, norm, rho, n_permutations, seed)
    else:
        raise ValueError(f"unknown p-value method {method!r}")
    return CorrelationResult(rho, p, n, method)


def _t_test_p(rho: float, n: int) -> float:
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2)))


def _permutation_p(dx, dy, norm, rho, n_permutations, seed, chunk=2000) -> float:
    if n_permutations < 1:
        raise ValueError("n_permutations must be positive")
    rng = np.random.default_rng(seed)
    # relative slack so permutations reproducing rho count as "as extreme"
    bound = abs(rho) * (1 - 1e-12)
    hits = 0
    done = 0
    while done < n_permutations:
        k = min(chunk, n_permutations - done)
        shuffled = rng.permuted(np.broadcast_to(dy, (k, dy.size)), axis=1)
        hits += int((np.abs(shuffled @ dx / norm) >= bound).sum())
        done += k
    return (1 + hits) / (1 + n_permutations)


def share_gdp_correlation(
    panel: TradePanel, category: str, year: int, method: str = PARAMETRIC, **kw
) -> CorrelationResult:
    """Correlation across countries between one category's local share and
    normalized GDP in `year`."""
    col = panel.category_index(category)
    shares = local_shares(panel, year)[:, col]
    g = gdp_profile(panel, year).values
    return pearson(shares, g, method=method, **kw)


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    stderr: float
    n: int


def loglog_ols(x, y) -> LogLogFit:
    """OLS of ``ln y`` on ``ln x``; all inputs must be positive."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    n = lx.size
    if n < 3:
        raise ElasticityError(f"need at least 3 points, got {n}")
    mx, my = lx.mean(), ly.mean()
    dx = lx - mx
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ElasticityError("degenerate regressor: all x values are equal")
    slope = float(dx @ (ly - my)) / sxx
    intercept = float(my - slope * mx)
    resid = ly - intercept - slope * lx
    stderr = float(np.sqrt((resid @ resid) / (n - 2) / sxx))
    return LogLogFit(slope, intercept, stderr, n)


@dataclass(frozen=True)
class ElasticityEstimate:
    category: str
    year: int
    alpha: float
    stderr: float
    n: int
    n_excluded: int = 0
    intercept: float = 0.0


def fit_elasticity(panel: TradePanel, category: str, year: int) -> ElasticityEstimate:
    """GDP elasticity of one category's local share in `year`.

    Countries that do not export the category are left out (the log of a
    zero share is undefined) and counted in ``n_excluded``.
    """
    shares = local_shares(panel, year)[:, panel.category_index(category)]
    g = gdp_profile(panel, year).values
    keep = shares > 0
    n = int(keep.sum())
    if n < 3:
        raise ElasticityError(f"category {category} in {year}: only {n} countries with positive share")
    fit = loglog_ols(g[keep], shares[keep])
    return ElasticityEstimate(category, year, fit.slope, fit.stderr, n, int((~keep).sum()), fit.intercept)


@dataclass(frozen=True)
class ElasticitySummary:
    category: str
    mean: float
    std: float
    estimates: tuple[ElasticityEstimate, ...] = field(default=(), repr=False)

    @property
    def n_years(self) -> int:
        return len(self.estimates)


def elasticity_summary(panel: TradePanel, category: str) -> ElasticitySummary:
    """Mean and spread over years of the per-year elasticities.

    The spread is the population standard deviation of the yearly alphas,
    i.e. it measures fluctuation over time rather than fit uncertainty.
    Years where no fit is possible are skipped.
    """
    estimates = []
    for year in panel.years:
        try:
            estimates.append(fit_elasticity(panel, category, year))
        except (ElasticityError, ValueError):
            continue
    if len(estimates) < 2:
        raise ElasticityError(f"category {category}: elasticity estimable in {len(estimates)} year(s), need 2")
    alphas = np.array([e.alpha for e in estimates])
    return ElasticitySummary(category, float(alphas.mean()), float(alphas.std()), tuple(estimates))


@dataclass(frozen=True)
class VariationProfile:
    """Multiplicative changes between `period[0]` and `period[1]`.

    ``gamma[c]`` is the ratio of normalized GDP and ``lam[p][c]`` the ratio
    of local shares; countries whose share of ``p`` is zero at either end
    are absent from ``lam[p]``.
    """

    period: tuple[int, int]
    gamma: Mapping[str, float]
    lam: Mapping[str, Mapping[str, float]]

    def lambda_(self, country: str, category: str) -> float:
        return self.lam[category][country]


def variation_profile(panel: TradePanel, t0: int, t1: int) -> VariationProfile:
    if t0 == t1:
        raise ValueError("variation needs two distinct years")
    g0 = gdp_profile(panel, t0).as_dict()
    g1 = gdp_profile(panel, t1).as_dict()
    s0, s1 = local_shares(panel, t0), local_shares(panel, t1)
    common = sorted(set(g0) & set(g1))
    gamma = {c: g1[c] / g0[c] for c in common}
    lam = {}
    for j, p in enumerate(panel.categories):
        ratios = {}
        for c in common:
            a = s0[panel.row(c, t0), j]
            b = s1[panel.row(c, t1), j]
            if a > 0 and b > 0:
                ratios[c] = float(b / a)
        lam[p] = ratios
    return VariationProfile((t0, t1), gamma, lam)


def variation_correlation(
    profile: VariationProfile, category: str, method: str = PARAMETRIC, **kw
) -> CorrelationResult:
    lam = profile.lam[category]
    countries = sorted(lam)
    return pearson(
        [lam[c] for c in countries],
        [profile.gamma[c] for c in countries],
        method=method,
        **kw,
    )


def fraction_increased(profile: VariationProfile, category: str) -> tuple[float, float]:
    """Fractions of countries whose share of `category` went up and down."""
    values = np.array(list(profile.lam[category].values()))
    if values.size == 0:
        return 0.0, 0.0
    return float((values > 1).mean()), float((values < 1).mean())
