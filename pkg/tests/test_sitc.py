import pytest
from hypothesis import given
from hypothesis import strategies as st

from exportfolio.sitc import (
    LEVEL1_NAMES,
    SECTORS,
    CodeTooLongError,
    EmptyCodeError,
    NonDigitCodeError,
    SectorPartition,
    TruncationError,
    parse_sitc,
    truncate,
)

codes = st.text(alphabet="0123456789", min_size=1, max_size=5)


def test_parse_level1_machinery():
    code = parse_sitc("7")
    assert code.level == 1 and code.p == 7
    assert LEVEL1_NAMES[code.digits] == "Machinery and transport equipment"


def test_parse_level2_road_vehicles():
    code = parse_sitc("78")
    assert (code.level, code.p) == (2, 78)


@pytest.mark.parametrize(
    "text, error",
    [("", EmptyCodeError), ("7x", NonDigitCodeError), ("7 ", NonDigitCodeError), ("123456", CodeTooLongError)],
)
def test_parse_errors(text, error):
    with pytest.raises(error, match="SITC code"):
        parse_sitc(text)


def test_leading_zeros_are_significant():
    assert parse_sitc("0") != parse_sitc("00")
    assert parse_sitc("07") != parse_sitc("7")
    assert str(parse_sitc("026")) == "026"


@pytest.mark.parametrize("code, level, expected", [("784", 1, "7"), ("58", 2, "58"), ("026", 2, "02")])
def test_truncate_examples(code, level, expected):
    assert truncate(parse_sitc(code), level).digits == expected


@pytest.mark.parametrize("level", [0, 3, -1])
def test_truncate_out_of_range(level):
    with pytest.raises(TruncationError):
        truncate(parse_sitc("58"), level)


@given(codes, st.data())
def test_truncation_composes(text, data):
    code = parse_sitc(text)
    m = data.draw(st.integers(1, code.level))
    k = data.draw(st.integers(1, m))
    assert truncate(truncate(code, m), k) == truncate(code, k)
    assert truncate(code, code.level) == code
    assert truncate(code, k).digits == text[:k]


@given(codes)
def test_render_round_trip(text):
    assert str(parse_sitc(text)) == text


def test_sector_partition():
    assert SECTORS.primary_set == frozenset("01234")
    assert "9" in SECTORS.manufacturing_set
    assert not SECTORS.primary_set & SECTORS.manufacturing_set
    with pytest.raises(ValueError):
        SectorPartition(frozenset("0123"), frozenset("56789"))
