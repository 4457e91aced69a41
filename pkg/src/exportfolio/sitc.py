"""SITC Rev. 2 commodity codes.

Codes are kept as digit strings because SITC prefixes are positional:
``"07"`` and ``"7"`` are different categories.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

MAX_LEVEL = 5

LEVEL1_NAMES = {
    "0": "Food and live animals",
    "1": "Beverages and tobacco",
    "2": "Crude materials",
    "3": "Mineral fuels",
    "4": "Animal and vegetable oils, fats and waxes",
    "5": "Chemicals",
    "6": "Manufactured goods classified by materials",
    "7": "Machinery and transport equipment",
    "8": "Miscellaneous manufactured articles",
    "9": "etc",
}


class SitcError(ValueError):
    """Base class for SITC code errors."""


class EmptyCodeError(SitcError):
    pass


class NonDigitCodeError(SitcError):
    pass


class CodeTooLongError(SitcError):
    pass


class TruncationError(SitcError):
    pass


@dataclass(frozen=True, order=True)
class SitcCode:
    digits: str

    def __post_init__(self):
        _validate(self.digits)

    @property
    def level(self) -> int:
        return len(self.digits)

    @property
    def p(self) -> int:
        return int(self.digits)

    def __str__(self) -> str:
        return self.digits


def _validate(text: str) -> None:
    if not isinstance(text, str) or text == "":
        raise EmptyCodeError(f"empty SITC code: {text!r}")
    if not all("0" <= ch <= "9" for ch in text):
        raise NonDigitCodeError(f"SITC code contains a non-digit character: {text!r}")
    if len(text) > MAX_LEVEL:
        raise CodeTooLongError(f"SITC code longer than {MAX_LEVEL} digits: {text!r}")


@lru_cache(maxsize=65536)
def parse_sitc(text: str) -> SitcCode:
    """Parse a 1-5 digit SITC code string.

    Leading zeros are kept; surrounding whitespace is not tolerated.
    """
    return SitcCode(text)


def truncate(code: SitcCode | str, level: int) -> SitcCode:
    """Return the first `level` digits of `code`."""
    if isinstance(code, str):
        code = parse_sitc(code)
    if not 1 <= level <= code.level:
        raise TruncationError(
            f"cannot truncate {code.digits!r} (level {code.level}) to level {level}"
        )
    if level == code.level:
        return code
    return parse_sitc(code.digits[:level])


@dataclass(frozen=True)
class SectorPartition:
    primary_set: frozenset = frozenset("01234")
    manufacturing_set: frozenset = frozenset("56789")

    def __post_init__(self):
        if self.primary_set & self.manufacturing_set:
            raise ValueError("sector sets overlap")
        if self.primary_set | self.manufacturing_set != frozenset("0123456789"):
            raise ValueError("sector sets must cover the ten level-1 categories")

    def members(self, sector: str) -> frozenset:
        if sector == "primary":
            return self.primary_set
        if sector == "manufacturing":
            return self.manufacturing_set
        raise ValueError(f"unknown sector {sector!r}; expected 'primary' or 'manufacturing'")


SECTORS = SectorPartition()
