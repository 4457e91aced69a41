"""Export shares and normalized GDP.

A portfolio is the vector of category shares of some owner's export in one
year: the world (:func:`global_share`), a single country
(:func:`local_share`) or a group of countries pooled by export value
(:func:`group_share`). Normalized GDP divides each country's GDP by the
panel total for that year.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import TradePanel
from .sitc import SECTORS, SectorPartition

SUM_TOL = 1e-9
WORLD = "WORLD"


class ShareError(ValueError):
    pass


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Portfolio:
    owner: str
    year: int
    level: int
    categories: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (len(self.categories),):
            raise ShareError("one share per category required")
        if ((self.values < 0) | (self.values > 1)).any():
            raise ShareError(f"share outside [0, 1] in portfolio of {self.owner} {self.year}")
        if abs(self.values.sum() - 1.0) > SUM_TOL:
            raise ShareError(f"shares of {self.owner} {self.year} sum to {self.values.sum()!r}")

    def share(self, category: str) -> float:
        try:
            return float(self.values[self.categories.index(category)])
        except ValueError:
            if len(category) != self.level:
                raise ShareError(f"{category!r} is not a level-{self.level} category") from None
            return 0.0

    def as_dict(self) -> dict[str, float]:
        return {p: float(v) for p, v in zip(self.categories, self.values)}

    def rows(self) -> list[tuple[str, int, str, float]]:
        return [(self.owner, self.year, p, float(v)) for p, v in zip(self.categories, self.values)]


@dataclass(frozen=True, eq=False)
class GdpProfile:
    year: int
    countries: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "countries", tuple(self.countries))
        object.__setattr__(self, "values", _frozen(self.values))
        if ((self.values <= 0) | (self.values > 1)).any():
            raise ShareError(f"normalized GDP outside (0, 1] in {self.year}")
        if abs(self.values.sum() - 1.0) > SUM_TOL:
            raise ShareError(f"normalized GDP of {self.year} sums to {self.values.sum()!r}")

    def g(self, country: str) -> float:
        try:
            return float(self.values[self.countries.index(country)])
        except ValueError:
            raise KeyError(f"{country!r} has no GDP in {self.year}") from None

    def as_dict(self) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.countries, self.values)}


def global_share(panel: TradePanel, year: int) -> Portfolio:
    """World export share of each category in `year`."""
    exports = panel.exports(year)
    totals = exports.sum(axis=0)
    world = totals.sum()
    if not world > 0:
        raise ShareError(f"no export recorded in {year}")
    return Portfolio(WORLD, year, panel.level, panel.categories, totals / world)


def local_shares(panel: TradePanel, year: int) -> np.ndarray:
    """Share matrix, one row per country of ``panel.countries(year)``."""
    exports = panel.exports(year)
    return exports / exports.sum(axis=1, keepdims=True)


def local_share(panel: TradePanel, country: str, year: int) -> Portfolio:
    row = panel.exports(year)[panel.row(country, year)]
    total = row.sum()
    if not total > 0:
        raise ShareError(f"{country} has zero total export in {year}")
    return Portfolio(country, year, panel.level, panel.categories, row / total)


def group_share(panel: TradePanel, countries: Iterable[str], year: int, owner: str | None = None) -> Portfolio:
    """Pooled portfolio of several countries, weighted by export value.

    This is not the mean of the members' share vectors: a large exporter
    moves the result more than a small one.
    """
    countries = sorted(set(countries))
    if not countries:
        raise ShareError("empty country group")
    rows = [panel.row(c, year) for c in countries]
    totals = panel.exports(year)[rows].sum(axis=0)
    return Portfolio(owner or "+".join(countries), year, panel.level, panel.categories, totals / totals.sum())


def gdp_profile(panel: TradePanel, year: int) -> GdpProfile:
    gdp = panel.gdp_values(year)
    if gdp.size == 0:
        raise ShareError(f"no country with GDP in {year}")
    return GdpProfile(year, panel.countries(year), gdp / gdp.sum())


def sector_share(
    portfolio: Portfolio,
    sector: str | Sequence[str] = "primary",
    partition: SectorPartition = SECTORS,
) -> float:
    """Summed share of a sector of level-1 categories.

    `sector` is ``"primary"``, ``"manufacturing"`` or an explicit collection
    of level-1 digits.
    """
    if portfolio.level != 1:
        raise ShareError(f"sector shares need a level-1 portfolio, got level {portfolio.level}")
    members = partition.members(sector) if isinstance(sector, str) else frozenset(sector)
    return math.fsum(float(v) for p, v in zip(portfolio.categories, portfolio.values) if p in members)


def portfolio_rows(portfolios: Iterable[Portfolio]) -> list[tuple[str, int, str, float]]:
    out = []
    for pf in portfolios:
        out.extend(pf.rows())
    return out
