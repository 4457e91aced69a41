import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exportfolio.correlate import fit_elasticity
from exportfolio.ingest import build_panel, load_gdp, load_trade, panel_records, write_gdp, write_trade
from exportfolio.shares import gdp_profile, local_shares
from exportfolio.synth import DEFAULT_ALPHA, SynthConfig, SynthError, country_names, generate
from oracles import normal_equations_slope


def test_zero_exponents_give_identical_shares():
    panel = generate(SynthConfig(n_countries=20, categories=("0", "7"), true_alpha={"0": 0.0, "7": 0.0}))
    shares = local_shares(panel, 1962)
    np.testing.assert_array_equal(shares, np.full_like(shares, 0.5))


def test_same_seed_same_panel():
    cfg = SynthConfig(n_countries=15, years=(1962, 1970, 2000), noise_scale=0.3, n_archetypes=4, switch_prob=0.2, seed=9)
    a, b = generate(cfg), generate(cfg)
    for y in cfg.years:
        assert a.exports(y).tobytes() == b.exports(y).tobytes()
        assert a.gdp_values(y).tobytes() == b.gdp_values(y).tobytes()
    other = generate(SynthConfig(n_countries=15, years=(1962, 1970, 2000), noise_scale=0.3, seed=10))
    assert other.exports(1962).tobytes() != a.exports(1962).tobytes()


def test_noiseless_and_noisy_twins_share_gdp():
    quiet = generate(SynthConfig(n_countries=10, years=(1962, 2000), seed=4))
    loud = generate(SynthConfig(n_countries=10, years=(1962, 2000), noise_scale=0.5, seed=4))
    np.testing.assert_array_equal(quiet.gdp_values(2000), loud.gdp_values(2000))


def test_noiseless_fit_matches_normal_equations():
    panel = generate(SynthConfig(n_countries=40, seed=1))
    g = gdp_profile(panel, 1962).values
    share7 = local_shares(panel, 1962)[:, panel.category_index("7")]
    slope, _, _ = normal_equations_slope(g, share7)
    est = fit_elasticity(panel, "7", 1962)
    assert est.alpha == pytest.approx(slope, abs=1e-9)
    # renormalization pulls the recovered slope away from the configured one
    assert abs(est.alpha - DEFAULT_ALPHA["7"]) < 0.3


@given(st.floats(-1, 1).filter(lambda a: abs(a) > 1e-3), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_rank_order_follows_exponent_sign(alpha, seed):
    panel = generate(SynthConfig(n_countries=12, categories=("0", "7"), true_alpha={"0": 0.0, "7": alpha}, seed=seed))
    g = gdp_profile(panel, 1962).values
    share = local_shares(panel, 1962)[:, 1]
    order_g = np.argsort(g * np.sign(alpha), kind="stable")
    assert np.all(np.diff(share[order_g]) >= 0)


@given(st.integers(0, 10**6), st.floats(0, 2), st.integers(1, 4))
@settings(max_examples=50, deadline=None)
def test_generated_panels_satisfy_share_invariants(seed, noise, archetypes):
    cfg = SynthConfig(n_countries=8, years=(1962, 1980), noise_scale=noise, n_archetypes=archetypes, switch_prob=0.3, seed=seed)
    panel = generate(cfg)
    for y in cfg.years:
        assert (panel.gdp_values(y) > 0).all()
        np.testing.assert_allclose(local_shares(panel, y).sum(axis=1), 1.0, rtol=0, atol=1e-9)
        assert abs(gdp_profile(panel, y).values.sum() - 1) <= 1e-9
        assert panel.countries(y) == country_names(8)


def test_two_digit_categories_fall_back_to_first_digit_exponent():
    cfg = SynthConfig(n_countries=5, categories=("71", "78", "01"))
    assert cfg.level == 2
    assert cfg.alpha("78") == DEFAULT_ALPHA["7"]
    assert generate(cfg).categories == ("01", "71", "78")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_countries": 2},
        {"noise_scale": -0.1},
        {"years": ()},
        {"years": (2000, 1962)},
        {"categories": ("0", "71")},
        {"n_countries": 3, "gdp_growth": [0.1]},
        {"switch_prob": 2.0},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(SynthError):
        SynthConfig(**kwargs)


def test_zero_normalization_is_an_error():
    with pytest.raises(SynthError, match="normalization"):
        generate(SynthConfig(n_countries=4, base_share={"3": 0.0}, categories=("3",)))


def test_metadata_records_generator():
    meta = SynthConfig(seed=3).metadata()
    assert meta["rng_algorithm"] == "numpy.random.PCG64"
    assert meta["seed"] == 3


def test_file_round_trip(tmp_path):
    panel = generate(SynthConfig(n_countries=12, years=(1962, 1963), noise_scale=0.4, seed=2))
    trade, gdp = panel_records(panel)
    write_trade(trade, tmp_path / "trade.csv")
    write_gdp(gdp, tmp_path / "gdp.csv")
    again = build_panel(load_trade(tmp_path / "trade.csv"), load_gdp(tmp_path / "gdp.csv"), level=1)
    for y in panel.years:
        assert again.countries(y) == panel.countries(y)
        assert again.exports(y).tobytes() == panel.exports(y).tobytes()
        assert again.gdp_values(y).tobytes() == panel.gdp_values(y).tobytes()
