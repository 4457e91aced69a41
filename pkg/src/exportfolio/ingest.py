"""Loading trade and GDP tables, applying country merge rules, building the panel.

The trade file holds one export value per (country, year, SITC code) row and
the GDP file one GDP value per (country, year) row. Column names and the
delimiter are declared by a :class:`TableFormat`. A rules file of
``source_name, target_name, year_from, year_to`` rows renames entities
(blank years = every year) and sums the values of entities that collapse to
the same name, e.g. USSR into Russia for 1989-1991.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .sitc import SitcCode, SitcError, parse_sitc, truncate

STUDY_WINDOW = (1962, 2000)


class IngestError(ValueError):
    """Raised for unreadable or invalid input tables."""


class MalformedRowError(IngestError):
    pass


class BadCodeError(IngestError):
    pass


class NegativeValueError(IngestError):
    pass


class MissingColumnError(IngestError):
    pass


class RuleConfigError(IngestError):
    pass


class EmptyJoinWarning(UserWarning):
    pass


@dataclass(frozen=True, slots=True)
class TradeRecord:
    country: str
    year: int
    code: SitcCode
    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise NegativeValueError(f"negative or undefined export value {self.value!r}")


@dataclass(frozen=True, slots=True)
class GdpRecord:
    country: str
    year: int
    gdp: float

    def __post_init__(self):
        if not (self.gdp > 0 and math.isfinite(self.gdp)):
            raise IngestError(f"GDP must be positive and finite, got {self.gdp!r}")


@dataclass(frozen=True)
class TableFormat:
    """Delimiter and column-name mapping for one input table.

    `columns` maps a role (``country``, ``year``, ``sitc``, ``value``,
    ``gdp``) to the header used in the file.
    """

    columns: Mapping[str, str]
    delimiter: str = ","

    def column(self, role: str) -> str:
        return self.columns.get(role, role)


TRADE_FORMAT = TableFormat({"country": "country", "year": "year", "sitc": "sitc", "value": "value"})
GDP_FORMAT = TableFormat({"country": "country", "year": "year", "gdp": "gdp"})
RULES_FORMAT = TableFormat(
    {"source": "source_name", "target": "target_name", "year_from": "year_from", "year_to": "year_to"}
)


def load_formats(path: str | Path) -> dict[str, TableFormat]:
    """Read a JSON format file.

    Expected shape::

        {"trade": {"delimiter": "\\t", "columns": {"country": "exporter", ...}},
         "gdp": {...}, "rules": {...}}

    Missing sections fall back to the default formats.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    defaults = {"trade": TRADE_FORMAT, "gdp": GDP_FORMAT, "rules": RULES_FORMAT}
    out = {}
    for kind, default in defaults.items():
        section = raw.get(kind, {})
        cols = dict(default.columns)
        cols.update(section.get("columns", {}))
        out[kind] = TableFormat(cols, section.get("delimiter", raw.get("delimiter", default.delimiter)))
    return out


def _open(source):
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    return _Borrowed(source)


class _Borrowed:
    # context manager that leaves a caller-owned stream open
    def __init__(self, stream):
        self.stream = stream

    def __enter__(self):
        return self.stream

    def __exit__(self, *exc):
        return False


def _rows(source, fmt: TableFormat, roles: Sequence[str]):
    with _open(source) as fh:
        reader = csv.reader(fh, delimiter=fmt.delimiter)
        header = next(reader, None)
        if header is None:
            raise MalformedRowError("input has no header row")
        header = [h.strip() for h in header]
        idx = {}
        for role in roles:
            name = fmt.column(role)
            if name not in header:
                raise MissingColumnError(f"column {name!r} (role {role}) not in header {header}")
            idx[role] = header.index(name)
        width = len(header)
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise MalformedRowError(
                    f"row {reader.line_num}: expected {width} fields, got {len(row)}"
                )
            yield reader.line_num, {role: row[i].strip() for role, i in idx.items()}


def _year(text: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedRowError(f"row {line}: bad year {text!r}") from None


def _number(text: str, line: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRowError(f"row {line}: bad {what} {text!r}") from None
    if not math.isfinite(value):
        raise MalformedRowError(f"row {line}: non-finite {what} {text!r}")
    return value


def load_trade(source, fmt: TableFormat = TRADE_FORMAT) -> list[TradeRecord]:
    """Read trade rows into validated records, preserving input order."""
    out = []
    for line, row in _rows(source, fmt, ("country", "year", "sitc", "value")):
        if not row["country"]:
            raise MalformedRowError(f"row {line}: empty country")
        year = _year(row["year"], line)
        try:
            code = parse_sitc(row["sitc"])
        except SitcError as exc:
            raise BadCodeError(f"row {line}: {exc}") from None
        value = _number(row["value"], line, "value")
        if value < 0:
            raise NegativeValueError(f"row {line}: negative export value {row['value']!r}")
        out.append(TradeRecord(row["country"], year, code, value))
    return out


def load_gdp(source, fmt: TableFormat = GDP_FORMAT) -> list[GdpRecord]:
    out = []
    for line, row in _rows(source, fmt, ("country", "year", "gdp")):
        if not row["country"]:
            raise MalformedRowError(f"row {line}: empty country")
        year = _year(row["year"], line)
        gdp = _number(row["gdp"], line, "gdp")
        if gdp <= 0:
            raise MalformedRowError(f"row {line}: GDP must be positive, got {row['gdp']!r}")
        out.append(GdpRecord(row["country"], year, gdp))
    return out


@dataclass(frozen=True)
class MergeRule:
    source: str
    target: str
    year_from: int | None = None
    year_to: int | None = None

    @property
    def is_alias(self) -> bool:
        return self.year_from is None and self.year_to is None

    def applies(self, country: str, year: int) -> bool:
        if country != self.source:
            return False
        if self.year_from is not None and year < self.year_from:
            return False
        if self.year_to is not None and year > self.year_to:
            return False
        return True


# Entity overlaps in the NBER-UN world trade flows.
NBER_UN_MERGE_RULES = (
    MergeRule("USSR", "Russia", 1989, 1991),
    MergeRule("Germany", "GFR", 1989, 1990),
)


def load_rules(source, fmt: TableFormat = RULES_FORMAT) -> list[MergeRule]:
    rules = []
    for line, row in _rows(source, fmt, ("source", "target", "year_from", "year_to")):
        if not row["source"] or not row["target"]:
            raise MalformedRowError(f"row {line}: rule needs source and target names")
        lo = _year(row["year_from"], line) if row["year_from"] else None
        hi = _year(row["year_to"], line) if row["year_to"] else None
        if lo is not None and hi is not None and lo > hi:
            raise RuleConfigError(f"row {line}: year_from {lo} after year_to {hi}")
        rules.append(MergeRule(row["source"], row["target"], lo, hi))
    return rules


@dataclass(frozen=True)
class MergeAction:
    source: str
    target: str
    year: int
    n_records: int
    value: float


def _check_rules(rules: Sequence[MergeRule], window: tuple[int, int] | None) -> None:
    if window is None:
        return
    lo, hi = window
    for rule in rules:
        for y in (rule.year_from, rule.year_to):
            if y is not None and not lo <= y <= hi:
                raise RuleConfigError(
                    f"rule {rule.source}->{rule.target} references year {y} outside window {lo}-{hi}"
                )


def merge_entities(
    records: Iterable[TradeRecord],
    rules: Sequence[MergeRule],
    window: tuple[int, int] | None = STUDY_WINDOW,
    actions: list[MergeAction] | None = None,
) -> list[TradeRecord]:
    """Rename entities per `rules` and sum values that land on the same
    (target, year, code).

    Keys touched by a rename are collapsed into one record placed where the
    first record of that key occurred; every other record passes through
    unchanged. If `actions` is given, one :class:`MergeAction` per
    (source, target, year) is appended to it.
    """
    _check_rules(rules, window)
    records = list(records)
    renamed: list[tuple[str, bool]] = []
    touched = set()
    moved = defaultdict(lambda: [0, 0.0])
    for rec in records:
        name = rec.country
        for rule in rules:
            if rule.applies(name, rec.year):
                moved[(rule.source, rule.target, rec.year)][0] += 1
                moved[(rule.source, rule.target, rec.year)][1] += rec.value
                name = rule.target
                break
        hit = name != rec.country
        renamed.append((name, hit))
        if hit:
            touched.add((name, rec.year, rec.code))

    sums: dict = {}
    first_pos: dict = {}
    for pos, (rec, (name, _)) in enumerate(zip(records, renamed)):
        key = (name, rec.year, rec.code)
        if key in touched:
            sums[key] = sums.get(key, 0.0) + rec.value
            first_pos.setdefault(key, pos)

    out = []
    for pos, (rec, (name, _)) in enumerate(zip(records, renamed)):
        key = (name, rec.year, rec.code)
        if key not in touched:
            out.append(rec)
        elif first_pos[key] == pos:
            out.append(TradeRecord(name, rec.year, rec.code, sums[key]))

    if actions is not None:
        for (src, dst, year), (n, value) in sorted(moved.items(), key=lambda kv: (kv[0][2], kv[0][0])):
            actions.append(MergeAction(src, dst, year, n, value))
    return out


def apply_aliases(records: Iterable[GdpRecord], rules: Sequence[MergeRule]) -> list[GdpRecord]:
    """Rename GDP entities using only the year-unbounded (alias) rules.

    Two GDP rows ending on the same (country, year) is a configuration error;
    GDP of overlapping entities is never summed.
    """
    aliases = [r for r in rules if r.is_alias]
    out, seen = [], set()
    for rec in records:
        name = rec.country
        for rule in aliases:
            if rule.source == name:
                name = rule.target
                break
        if (name, rec.year) in seen:
            raise RuleConfigError(f"GDP for {name!r} in {rec.year} given more than once")
        seen.add((name, rec.year))
        out.append(rec if name == rec.country else GdpRecord(name, rec.year, rec.gdp))
    return out


def filter_window(records, start: int, end: int) -> list:
    return [r for r in records if start <= r.year <= end]


class TradePanel:
    """Joined export/GDP panel at one SITC level.

    Each year holds a sorted country tuple, a dense ``(countries, categories)``
    export matrix and a GDP vector. The category axis is the same for every
    year (the union of codes seen in the trade data), so absent exports are
    zeros rather than missing entries. Arrays are read-only.
    """

    def __init__(
        self,
        level: int,
        categories: Sequence[str],
        data: Mapping[int, tuple[Sequence[str], np.ndarray, np.ndarray]],
        warnings: Sequence[str] = (),
    ):
        self.level = int(level)
        self.categories = tuple(categories)
        for p in self.categories:
            if len(p) != self.level:
                raise ValueError(f"category {p!r} is not a level-{self.level} code")
        self._cat_index = {p: i for i, p in enumerate(self.categories)}
        self._years = tuple(sorted(data))
        self._data = {}
        self._index = {}
        for year in self._years:
            countries, exports, gdp = data[year]
            countries = tuple(countries)
            exports = np.array(exports, dtype=float).reshape(len(countries), len(self.categories))
            gdp = np.array(gdp, dtype=float).reshape(len(countries))
            if list(countries) != sorted(set(countries)):
                raise ValueError(f"countries for {year} must be unique and sorted")
            if (exports < 0).any():
                raise ValueError(f"negative export value in {year}")
            if len(countries) and ((gdp <= 0).any() or (exports.sum(axis=1) <= 0).any()):
                raise ValueError(f"country without positive GDP and export in {year}")
            exports.setflags(write=False)
            gdp.setflags(write=False)
            self._data[year] = (countries, exports, gdp)
            self._index[year] = {c: i for i, c in enumerate(countries)}
        self.warnings = tuple(warnings)

    @property
    def years(self) -> tuple[int, ...]:
        return self._years

    def _year(self, year: int):
        try:
            return self._data[year]
        except KeyError:
            raise KeyError(f"year {year} not in panel") from None

    def countries(self, year: int) -> tuple[str, ...]:
        return self._year(year)[0]

    def exports(self, year: int) -> np.ndarray:
        return self._year(year)[1]

    def gdp_values(self, year: int) -> np.ndarray:
        return self._year(year)[2]

    def has(self, country: str, year: int) -> bool:
        return year in self._index and country in self._index[year]

    def row(self, country: str, year: int) -> int:
        self._year(year)
        try:
            return self._index[year][country]
        except KeyError:
            raise KeyError(f"country {country!r} not in panel at {year}") from None

    def category_index(self, category: str) -> int:
        try:
            return self._cat_index[category]
        except KeyError:
            raise KeyError(f"category {category!r} not in level-{self.level} panel") from None

    def export(self, country: str, category: str, year: int) -> float:
        return float(self.exports(year)[self.row(country, year), self.category_index(category)])

    def gdp(self, country: str, year: int) -> float:
        return float(self.gdp_values(year)[self.row(country, year)])

    def all_countries(self) -> tuple[str, ...]:
        return tuple(sorted(set().union(*(self.countries(y) for y in self._years))))

    def at_level(self, level: int) -> "TradePanel":
        """Aggregate the category axis to a coarser SITC level."""
        if level == self.level:
            return self
        if not 1 <= level <= self.level:
            raise ValueError(f"cannot aggregate a level-{self.level} panel to level {level}")
        coarse = sorted({truncate(p, level).digits for p in self.categories})
        col = {p: i for i, p in enumerate(coarse)}
        agg = np.zeros((len(self.categories), len(coarse)))
        for j, p in enumerate(self.categories):
            agg[j, col[p[:level]]] = 1.0
        data = {}
        for year in self._years:
            countries, exports, gdp = self._data[year]
            data[year] = (countries, exports @ agg, gdp)
        return TradePanel(level, coarse, data, self.warnings)

    def gaps(self) -> list[tuple[str, int]]:
        """(country, year) pairs missing between a country's first and last
        panel year."""
        out = []
        for c in self.all_countries():
            present = [y for y in self._years if c in self._index[y]]
            for y in self._years:
                if present[0] < y < present[-1] and c not in self._index[y]:
                    out.append((c, y))
        return out

    def restrict(self, years: Iterable[int]) -> "TradePanel":
        years = set(years)
        return TradePanel(
            self.level,
            self.categories,
            {y: self._data[y] for y in self._years if y in years},
            self.warnings,
        )


def build_panel(
    trade: Iterable[TradeRecord],
    gdp: Iterable[GdpRecord],
    level: int,
    years: Iterable[int] | None = None,
) -> TradePanel:
    """Aggregate trade records to `level` and join them with GDP.

    A country enters year ``t`` only if it has positive total export and a
    GDP value in ``t``. Years in which nothing joins are kept with empty
    country sets and reported through :class:`EmptyJoinWarning` and
    ``panel.warnings``.
    """
    if level not in (1, 2, 3, 4, 5):
        raise ValueError(f"SITC level must be 1-5, got {level}")
    flows: dict[int, dict[str, dict[str, float]]] = defaultdict(lambda: defaultdict(dict))
    categories = set()
    for rec in trade:
        if rec.code.level < level:
            raise ValueError(
                f"code {rec.code.digits!r} for {rec.country} {rec.year} is coarser than level {level}"
            )
        p = rec.code.digits[:level]
        categories.add(p)
        cell = flows[rec.year][rec.country]
        cell[p] = cell.get(p, 0.0) + rec.value
    gdp_by_year: dict[int, dict[str, float]] = defaultdict(dict)
    for rec in gdp:
        if rec.country in gdp_by_year[rec.year]:
            raise IngestError(f"duplicate GDP for {rec.country!r} in {rec.year}")
        gdp_by_year[rec.year][rec.country] = rec.gdp

    if years is None:
        years = sorted(set(flows) | set(k for k, v in gdp_by_year.items() if v))
    categories = tuple(sorted(categories))
    col = {p: i for i, p in enumerate(categories)}

    data, notes = {}, []
    for year in sorted(set(years)):
        by_country = flows.get(year, {})
        g = gdp_by_year.get(year, {})
        keep = []
        for c in sorted(set(by_country) & set(g)):
            if sum(by_country[c][p] for p in sorted(by_country[c])) > 0:
                keep.append(c)
        exports = np.zeros((len(keep), len(categories)))
        for i, c in enumerate(keep):
            for p, v in by_country[c].items():
                exports[i, col[p]] = v
        gvec = np.array([g[c] for c in keep], dtype=float)
        if not keep:
            msg = f"{year}: no country has both positive export and GDP"
            notes.append(msg)
            warnings.warn(msg, EmptyJoinWarning, stacklevel=2)
        data[year] = (tuple(keep), exports, gvec)
    return TradePanel(level, categories, data, notes)


@dataclass
class ReconciliationReport:
    matched: list[str] = field(default_factory=list)
    trade_only: list[str] = field(default_factory=list)
    gdp_only: list[str] = field(default_factory=list)
    merges: list[MergeAction] = field(default_factory=list)
    gaps: list[tuple[str, int]] = field(default_factory=list)
    empty_years: list[str] = field(default_factory=list)

    def rows(self) -> list[tuple[str, str, str, str]]:
        out = [("matched", c, "", "") for c in self.matched]
        out += [("trade_only", c, "", "") for c in self.trade_only]
        out += [("gdp_only", c, "", "") for c in self.gdp_only]
        out += [
            ("merge", a.target, str(a.year), f"{a.source}->{a.target} records={a.n_records} value={a.value!r}")
            for a in self.merges
        ]
        out += [("gap", c, str(y), "absent between first and last panel year") for c, y in self.gaps]
        out += [("empty_join", "", s.split(":")[0], s) for s in self.empty_years]
        return out


def reconcile(
    trade: Sequence[TradeRecord],
    gdp: Sequence[GdpRecord],
    panel: TradePanel,
    merges: Sequence[MergeAction] = (),
) -> ReconciliationReport:
    """Compare country names across the two sources after renaming."""
    t_names = {r.country for r in trade}
    g_names = {r.country for r in gdp}
    return ReconciliationReport(
        matched=sorted(t_names & g_names),
        trade_only=sorted(t_names - g_names),
        gdp_only=sorted(g_names - t_names),
        merges=list(merges),
        gaps=panel.gaps(),
        empty_years=list(panel.warnings),
    )


def write_trade(records: Iterable[TradeRecord], dest, fmt: TableFormat = TRADE_FORMAT) -> None:
    """Write trade records in the layout :func:`load_trade` reads.

    Values use ``repr`` so floats survive a round trip exactly.
    """
    _write(
        dest,
        fmt,
        [fmt.column(r) for r in ("country", "year", "sitc", "value")],
        ((r.country, r.year, r.code.digits, repr(float(r.value))) for r in records),
    )


def write_gdp(records: Iterable[GdpRecord], dest, fmt: TableFormat = GDP_FORMAT) -> None:
    _write(
        dest,
        fmt,
        [fmt.column(r) for r in ("country", "year", "gdp")],
        ((r.country, r.year, repr(float(r.gdp))) for r in records),
    )


def _write(dest, fmt, header, rows):
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            _write(fh, fmt, header, rows)
        return
    w = csv.writer(dest, delimiter=fmt.delimiter, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def panel_records(panel: TradePanel) -> tuple[list[TradeRecord], list[GdpRecord]]:
    """Flatten a panel back into records (nonzero export cells only)."""
    trade, gdp = [], []
    for year in panel.years:
        countries, exports, g = panel._data[year]
        for i, c in enumerate(countries):
            gdp.append(GdpRecord(c, year, float(g[i])))
            for j, p in enumerate(panel.categories):
                if exports[i, j] > 0:
                    trade.append(TradeRecord(c, year, parse_sitc(p), float(exports[i, j])))
    return trade, gdp
