import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from exportfolio.ingest import TradePanel
from exportfolio.shares import (
    Portfolio,
    ShareError,
    gdp_profile,
    global_share,
    group_share,
    local_share,
    sector_share,
)
from helpers import make_panel


def test_global_share_two_countries():
    # hand sums: category 0 -> 30 + 10 = 40, category 7 -> 30 + 30 = 60, world 100
    panel = make_panel({1962: {"A": {"0": 30, "7": 30}, "B": {"0": 10, "7": 30}}}, {1962: {"A": 1, "B": 1}})
    pf = global_share(panel, 1962)
    assert pf.share("0") == pytest.approx(0.4, abs=1e-15)
    assert pf.share("7") == pytest.approx(0.6, abs=1e-15)


def test_global_share_single_category():
    panel = make_panel({1962: {"A": {"3": 5}, "B": {"3": 9}}}, {1962: {"A": 1, "B": 2}})
    assert global_share(panel, 1962).share("3") == 1.0


def test_global_share_missing_year():
    panel = make_panel({1962: {"A": {"3": 5}}}, {1962: {"A": 1}})
    with pytest.raises(KeyError, match="1970"):
        global_share(panel, 1970)


def test_local_share_examples():
    panel = make_panel(
        {1962: {"A": {"3": 4.0}, "B": {"0": 25, "2": 25, "7": 50}}}, {1962: {"A": 1, "B": 1}}
    )
    assert local_share(panel, "A", 1962).share("3") == 1.0
    pf = local_share(panel, "B", 1962)
    assert (pf.share("0"), pf.share("2"), pf.share("7")) == (0.25, 0.25, 0.5)
    assert pf.share("3") == 0.0
    with pytest.raises(KeyError):
        local_share(panel, "Z", 1962)


def test_gdp_profile_examples():
    panel = make_panel({2000: {"A": {"0": 1}, "B": {"0": 1}, "C": {"0": 1}}}, {2000: {"A": 2, "B": 3, "C": 5}})
    assert gdp_profile(panel, 2000).values.tolist() == pytest.approx([0.2, 0.3, 0.5], abs=1e-15)
    single = make_panel({2000: {"A": {"0": 1}}}, {2000: {"A": 7.0}})
    assert gdp_profile(single, 2000).g("A") == 1.0


def test_sector_share_uniform_and_partition():
    pf = Portfolio("X", 1962, 1, tuple("0123456789"), [0.1] * 10)
    assert sector_share(pf, "primary") == pytest.approx(0.5, abs=1e-15)
    assert sector_share(pf, "primary") + sector_share(pf, "manufacturing") == pytest.approx(1.0, abs=1e-12)
    assert sector_share(pf, ["0", "2"]) == pytest.approx(0.2, abs=1e-15)


def test_sector_share_needs_level_one():
    pf = Portfolio("X", 1962, 2, ("01", "78"), [0.5, 0.5])
    with pytest.raises(ShareError, match="level-1"):
        sector_share(pf)


def test_portfolio_validation():
    with pytest.raises(ShareError):
        Portfolio("X", 1962, 1, ("0", "1"), [0.7, 0.7])
    with pytest.raises(ShareError):
        Portfolio("X", 1962, 1, ("0", "1"), [1.5, -0.5])


def test_group_share_is_value_weighted():
    panel = make_panel({1962: {"A": {"0": 90, "7": 10}, "B": {"0": 1, "7": 9}}}, {1962: {"A": 1, "B": 1}})
    pf = group_share(panel, ["A", "B"], 1962)
    assert pf.share("0") == pytest.approx(91 / 110, abs=1e-15)


# ---- properties on random panels

matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 8), st.integers(1, 10)),
    elements=st.one_of(st.just(0.0), st.floats(1e-6, 1e9)),
)


def random_panel(mat, gdp_seed=0):
    mat = mat.copy()
    mat[mat.sum(axis=1) == 0, 0] = 1.0
    n, k = mat.shape
    cats = [str(d) for d in range(k)]
    gdp = np.random.default_rng(gdp_seed).uniform(0.1, 10, n)
    return TradePanel(1, cats, {1962: ([f"C{i:02d}" for i in range(n)], mat, gdp)})


@given(matrices, st.floats(1e-3, 1e6))
@settings(max_examples=200, deadline=None)
def test_share_invariants(mat, scale):
    panel = random_panel(mat)
    world = global_share(panel, 1962)
    assert abs(world.values.sum() - 1) <= 1e-9
    assert abs(gdp_profile(panel, 1962).values.sum() - 1) <= 1e-9
    total = panel.exports(1962).sum()
    weighted = np.zeros(len(panel.categories))
    for c in panel.countries(1962):
        pf = local_share(panel, c, 1962)
        assert abs(pf.values.sum() - 1) <= 1e-9
        weighted += panel.exports(1962)[panel.row(c, 1962)].sum() / total * pf.values
    # world shares are the export-weighted mix of local shares
    np.testing.assert_allclose(weighted, world.values, rtol=0, atol=1e-9)

    scaled = TradePanel(1, panel.categories, {1962: (panel.countries(1962), panel.exports(1962) * scale, panel.gdp_values(1962))})
    np.testing.assert_allclose(global_share(scaled, 1962).values, world.values, rtol=1e-12, atol=1e-300)
    for c in panel.countries(1962):
        np.testing.assert_allclose(
            local_share(scaled, c, 1962).values, local_share(panel, c, 1962).values, rtol=1e-12, atol=1e-300
        )
