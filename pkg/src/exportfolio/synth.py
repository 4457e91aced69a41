"""Synthetic trade panels with a known share-GDP power law.

Before per-country renormalization, the share of category ``p`` in the
export of country ``c`` is ``base_p * g(c)**alpha_p * exp(noise_scale * z)``
with ``z`` standard normal. Because shares are renormalized to sum to one,
the log-log slope of the generated shares is not exactly ``alpha_p``;
estimator checks should compare against a regression on the generated data.

Random numbers come from numpy's PCG64 bit generator, seeded with
``config.seed``. Draws happen in a fixed order (archetypes, initial GDP,
growth rates, then one noise draw per country and category per year) and the
noise draws are made even when ``noise_scale`` is zero, so a noiseless and a
noisy config with the same seed share their GDP paths.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ingest import TradePanel

RNG_ALGORITHM = "numpy.random.PCG64"

DEFAULT_ALPHA = {
    "0": -0.12, "1": 0.36, "2": -0.09, "3": -0.01, "4": 0.11,
    "5": 0.41, "6": 0.31, "7": 0.67, "8": 0.38, "9": 0.25,
}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_countries: int = 60
    years: tuple[int, ...] = (1962,)
    categories: tuple[str, ...] = tuple("0123456789")
    true_alpha: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_ALPHA))
    # per-country yearly growth rate of GDP; drawn from N(0.03, 0.02) if None
    gdp_growth: Sequence[float] | None = None
    gdp_spread: float = 1.5
    noise_scale: float = 0.0
    base_share: Mapping[str, float] | None = None
    n_archetypes: int = 1
    switch_prob: float = 0.0
    export_ratio: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_countries < 3:
            raise SynthError("need at least 3 countries")
        if self.noise_scale < 0:
            raise SynthError("noise_scale must be nonnegative")
        if not self.years or list(self.years) != sorted(set(self.years)):
            raise SynthError("years must be a nonempty increasing sequence")
        if not self.categories or len({len(p) for p in self.categories}) != 1:
            raise SynthError("categories must be nonempty and of one SITC level")
        if self.gdp_growth is not None and len(self.gdp_growth) != self.n_countries:
            raise SynthError("one growth rate per country required")
        if self.n_archetypes < 1 or not 0 <= self.switch_prob <= 1:
            raise SynthError("invalid archetype settings")

    @property
    def level(self) -> int:
        return len(self.categories[0])

    def alpha(self, category: str) -> float:
        return float(self.true_alpha.get(category, self.true_alpha.get(category[0], 0.0)))

    def metadata(self) -> dict:
        meta = asdict(self)
        meta["true_alpha"] = dict(self.true_alpha)
        meta["base_share"] = None if self.base_share is None else dict(self.base_share)
        meta["rng_algorithm"] = RNG_ALGORITHM
        meta["numpy_version"] = np.__version__
        return meta


def country_names(n: int) -> tuple[str, ...]:
    return tuple(f"C{i:03d}" for i in range(n))


def generate(config: SynthConfig) -> TradePanel:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n = config.n_countries
    cats = tuple(sorted(config.categories))
    n_years, n_cats = len(config.years), len(cats)

    if config.n_archetypes > 1:
        profiles = rng.dirichlet(np.full(n_cats, 0.3), size=config.n_archetypes)
        arche = np.empty((n_years, n), dtype=int)
        arche[0] = rng.integers(config.n_archetypes, size=n)
        for k in range(1, n_years):
            switch = rng.random(n) < config.switch_prob
            fresh = rng.integers(config.n_archetypes, size=n)
            arche[k] = np.where(switch, fresh, arche[k - 1])
    else:
        base = np.ones(n_cats) if config.base_share is None else np.array(
            [float(config.base_share.get(p, 0.0)) for p in cats]
        )
        profiles = base[None, :]
        arche = np.zeros((n_years, n), dtype=int)

    log_w0 = 25.0 + config.gdp_spread * rng.standard_normal(n)
    if config.gdp_growth is None:
        growth = rng.normal(0.03, 0.02, size=n)
    else:
        growth = np.asarray(config.gdp_growth, dtype=float)
    alpha = np.array([config.alpha(p) for p in cats])

    names = country_names(n)
    data = {}
    for k, year in enumerate(config.years):
        w = np.exp(log_w0 + growth * (year - config.years[0]))
        g = w / w.sum()
        z = rng.standard_normal((n, n_cats))
        raw = profiles[arche[k]] * g[:, None] ** alpha[None, :] * np.exp(config.noise_scale * z)
        norm = raw.sum(axis=1, keepdims=True)
        if not (np.isfinite(norm).all() and (norm > 0).all()):
            raise SynthError(f"zero or non-finite share normalization in {year}")
        shares = raw / norm
        exports = shares * (config.export_ratio * w)[:, None]
        data[year] = (names, exports, w)
    return TradePanel(config.level, cats, data)
