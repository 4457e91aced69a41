import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exportfolio.cluster import ClusterSet
from exportfolio.ingest import TradePanel
from exportfolio.shares import gdp_profile
from exportfolio.transition import (
    TransitionError,
    format_sig2,
    growth_ranking,
    transition_series,
    transition_table,
)


def gdp_panel(gdp_by_year):
    """Panel with one category where only GDP matters."""
    data = {}
    for year, gdp in gdp_by_year.items():
        countries = sorted(gdp)
        data[year] = (countries, np.ones((len(countries), 1)), [gdp[c] for c in countries])
    return TradePanel(1, ["0"], data)


PANEL = gdp_panel(
    {
        1962: {"A": 1.0, "B": 2.0, "C": 3.0, "D": 4.0},
        1980: {"A": 2.0, "B": 2.0, "C": 3.0, "D": 3.0, "E": 10.0},
        2000: {"A": 4.0, "B": 1.0, "C": 3.0, "E": 2.0},
    }
)
SET_1962 = ClusterSet(1962, (("A", "B"), ("C", "D")), ("0", "76"), 0.45)
SET_2000 = ClusterSet(2000, (("A", "C"), ("B",), ("E",)), ("76", "3", "8"), 0.45)


def test_transition_cells_and_gamma():
    report = transition_table(PANEL, SET_1962, SET_2000)
    # g(1962) = c/10, g(2000) = c/10 as well
    cell = report.cell("0", "76")
    assert cell.countries == ("A",)
    assert cell.gamma == pytest.approx(0.4 / 0.1, rel=1e-12)
    assert report.cell("76", "76").gamma == pytest.approx(0.3 / 0.3, rel=1e-12)
    assert report.cell("0", "3").count == 1
    assert report.common_countries() == ("A", "B", "C")
    # D left the clustered set, E joined it; both are reported
    assert report.unmatched == (("D", 1962, "76"), ("E", 2000, "8"))
    with pytest.raises(KeyError):
        report.cell("76", "3")


def test_identical_sets_sit_on_the_diagonal():
    set_b = ClusterSet(1980, SET_1962.clusters, SET_1962.names, 0.45)
    report = transition_table(PANEL, SET_1962, set_b)
    assert all(c.source == c.dest for c in report.cells)
    g0, g1 = gdp_profile(PANEL, 1962), gdp_profile(PANEL, 1980)
    for c in report.cells:
        expected = sum(g1.g(x) for x in c.countries) / sum(g0.g(x) for x in c.countries)
        assert c.gamma == pytest.approx(expected, rel=1e-12)


def test_transition_errors():
    with pytest.raises(TransitionError, match="precede"):
        transition_table(PANEL, SET_2000, SET_1962)
    with pytest.raises(TransitionError, match="precede"):
        transition_table(PANEL, SET_1962, SET_1962)
    other = ClusterSet(2000, (("E",),), ("8",), 0.45)
    with pytest.raises(TransitionError, match="no country"):
        transition_table(PANEL, SET_1962, other)


def test_table_formatting():
    report = transition_table(PANEL, SET_1962, SET_2000)
    table = report.table()
    assert table[0] == ["1962\\2000", "76", "3", "8"]
    assert table[1] == ["0", "4.0 (1)", "0.50 (1)", ""]
    assert report.table(min_count=2)[1] == ["0", "", "", ""]
    assert format_sig2(0.8812) == "0.88"
    assert format_sig2(12.3) == "12"
    assert format_sig2(0.053) == "0.053"


def test_series_normalization_and_singletons():
    report = transition_table(PANEL, SET_1962, SET_2000)
    series = transition_series(PANEL, report, ("0", "76"))
    g = {y: gdp_profile(PANEL, y).g("A") for y in PANEL.years}
    assert series == [(y, pytest.approx(g[y], rel=1e-15)) for y in PANEL.years]
    norm = transition_series(PANEL, report, ("76", "76"), normalize_to_start=True)
    assert norm[0] == (1962, 1.0)
    assert len(norm) == 3


def test_series_skips_years_without_members():
    panel = gdp_panel({1962: {"A": 1.0, "B": 1.0}, 1970: {"B": 1.0}, 2000: {"A": 1.0, "B": 3.0}})
    set_a = ClusterSet(1962, (("A",), ("B",)), ("0", "3"), 0.45)
    set_b = ClusterSet(2000, (("A",), ("B",)), ("0", "3"), 0.45)
    report = transition_table(panel, set_a, set_b)
    assert [y for y, _ in transition_series(panel, report, ("0", "0"))] == [1962, 2000]
    late = panel.restrict((1970, 2000))
    with pytest.raises(TransitionError, match="no member"):
        transition_series(late, report, ("0", "0"), normalize_to_start=True)


def test_growth_ranking_thresholds():
    ranking = growth_ranking(PANEL, SET_2000, 1.5)
    assert [(c, d) for c, _, d in ranking] == [("A", "76")]
    assert ranking[0][1] == pytest.approx(4.0)
    assert len(growth_ranking(PANEL, SET_2000, 0.0)) == 3
    assert growth_ranking(PANEL, SET_2000, 100.0) == []


@st.composite
def random_transition(draw):
    seed = draw(st.integers(0, 10**6))
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 30))
    countries = [f"C{i:02d}" for i in range(n)]
    gdp = {y: dict(zip(countries, rng.lognormal(0, 2, n))) for y in (1962, 2000)}
    # a few countries are only clustered in one of the years
    drop_a = set(rng.choice(countries, size=int(rng.integers(0, n // 3 + 1)), replace=False))
    drop_b = set(rng.choice(countries, size=int(rng.integers(0, n // 3 + 1)), replace=False))
    if not set(countries) - drop_a - drop_b:
        drop_b = set()
        drop_a = set()

    def random_set(year, dropped):
        kept = [c for c in countries if c not in dropped]
        k = int(rng.integers(1, 6))
        labels = rng.integers(0, k, len(kept))
        clusters = tuple(
            tuple(c for c, lab in zip(kept, labels) if lab == j) for j in range(k) if (labels == j).any()
        )
        return ClusterSet(year, clusters, tuple(f"k{j}" for j in range(len(clusters))), 0.45)

    return gdp_panel(gdp), random_set(1962, drop_a), random_set(2000, drop_b)


@given(random_transition())
@settings(max_examples=200, deadline=None)
def test_conservation(case):
    panel, set_a, set_b = case
    report = transition_table(panel, set_a, set_b)
    common = set(set_a.countries) & set(set_b.countries)
    assert sum(c.count for c in report.cells) == len(common)
    assert sorted(x for c in report.cells for x in c.countries) == sorted(common)
    g0, g1 = gdp_profile(panel, 1962), gdp_profile(panel, 2000)
    rebuilt = math.fsum(c.g_start * c.gamma for c in report.cells)
    assert rebuilt == pytest.approx(math.fsum(g1.g(x) for x in common), abs=1e-9)
    assert math.fsum(c.g_start for c in report.cells) == pytest.approx(math.fsum(g0.g(x) for x in common), abs=1e-9)
    assert all(c.count >= 1 and c.gamma > 0 for c in report.cells)
    unmatched = {c for c, _, _ in report.unmatched}
    assert unmatched == set(set_a.countries) ^ set(set_b.countries)
