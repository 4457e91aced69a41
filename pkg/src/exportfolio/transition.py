"""Movement of countries between the clusters of two years and the GDP
change of each movement group."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .cluster import ClusterSet
from .ingest import TradePanel
from .shares import gdp_profile


class TransitionError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionCell:
    source: str
    dest: str
    countries: tuple[str, ...]
    g_start: float
    g_end: float

    @property
    def count(self) -> int:
        return len(self.countries)

    @property
    def gamma(self) -> float:
        return self.g_end / self.g_start


@dataclass(frozen=True)
class TransitionReport:
    source_year: int
    dest_year: int
    source_names: tuple[str, ...]
    dest_names: tuple[str, ...]
    cells: tuple[TransitionCell, ...]
    residence: Mapping[str, tuple[str, str]]
    # (country, year the country was clustered in, cluster name) for
    # countries clustered in only one of the two years
    unmatched: tuple[tuple[str, int, str], ...] = field(default=())

    def cell(self, source: str, dest: str) -> TransitionCell:
        for c in self.cells:
            if c.source == source and c.dest == dest:
                return c
        raise KeyError(f"no countries moved from {source!r} to {dest!r}")

    def common_countries(self) -> tuple[str, ...]:
        return tuple(sorted(self.residence))

    def member_rows(self) -> list[tuple[str, str, str]]:
        return [(c.source, c.dest, country) for c in self.cells for country in c.countries]

    def table(self, min_count: int = 1) -> list[list[str]]:
        """Source-by-destination matrix with ``"gamma (n)"`` cells.

        Gamma is shown to two significant figures; movements of fewer than
        `min_count` countries are left blank like empty ones.
        """
        header = [f"{self.source_year}\\{self.dest_year}", *self.dest_names]
        out = [header]
        for s in self.source_names:
            row = [s]
            for d in self.dest_names:
                try:
                    c = self.cell(s, d)
                except KeyError:
                    row.append("")
                    continue
                row.append(f"{format_sig2(c.gamma)} ({c.count})" if c.count >= min_count else "")
            out.append(row)
        return out


def format_sig2(x: float) -> str:
    text = f"{x:#.2g}"
    return text.rstrip(".") if "e" not in text else text


def transition_table(panel: TradePanel, set_a: ClusterSet, set_b: ClusterSet) -> TransitionReport:
    """Group countries clustered in both years by their (source, destination)
    cluster pair and compute each group's GDP ratio between the years."""
    if set_a.year is None or set_b.year is None:
        raise TransitionError("cluster sets must carry their year")
    if set_a.year >= set_b.year:
        raise TransitionError(f"source year {set_a.year} must precede destination year {set_b.year}")
    mem_a, mem_b = set_a.membership(), set_b.membership()
    common = sorted(set(mem_a) & set(mem_b))
    if not common:
        raise TransitionError(f"no country is clustered in both {set_a.year} and {set_b.year}")
    g_a = gdp_profile(panel, set_a.year)
    g_b = gdp_profile(panel, set_b.year)

    src_names = tuple(set_a.label(k) for k in range(len(set_a.clusters)))
    dst_names = tuple(set_b.label(k) for k in range(len(set_b.clusters)))
    groups: dict[tuple[str, str], list[str]] = {}
    for c in common:
        groups.setdefault((mem_a[c], mem_b[c]), []).append(c)
    cells = []
    for s in src_names:
        for d in dst_names:
            members = groups.get((s, d))
            if not members:
                continue
            start = end = 0.0
            for c in members:
                start += g_a.g(c)
                end += g_b.g(c)
            cells.append(TransitionCell(s, d, tuple(members), start, end))

    unmatched = [(c, set_a.year, mem_a[c]) for c in sorted(set(mem_a) - set(mem_b))]
    unmatched += [(c, set_b.year, mem_b[c]) for c in sorted(set(mem_b) - set(mem_a))]
    residence = {c: (mem_a[c], mem_b[c]) for c in common}
    return TransitionReport(
        set_a.year, set_b.year, src_names, dst_names, tuple(cells), residence, tuple(unmatched)
    )


def transition_series(
    panel: TradePanel,
    report: TransitionReport,
    cell: TransitionCell | tuple[str, str],
    normalize_to_start: bool = False,
) -> list[tuple[int, float]]:
    """Summed normalized GDP of a cell's countries for every panel year.

    Years in which none of the members has data are omitted. With
    `normalize_to_start` every value is divided by the one of the report's
    source year.
    """
    if not isinstance(cell, TransitionCell):
        cell = report.cell(*cell)
    series = []
    for year in panel.years:
        if not panel.countries(year):
            continue
        g = gdp_profile(panel, year).as_dict()
        present = [c for c in cell.countries if c in g]
        if not present:
            continue
        total = 0.0
        for c in present:
            total += g[c]
        series.append((year, total))
    if normalize_to_start:
        base = dict(series).get(report.source_year)
        if base is None:
            raise TransitionError(
                f"no member of {cell.source}->{cell.dest} has data in {report.source_year}"
            )
        series = [(y, v / base) for y, v in series]
    return series


def growth_ranking(
    panel: TradePanel,
    set_b: ClusterSet,
    threshold: float,
    start_year: int | None = None,
) -> list[tuple[str, float, str]]:
    """Countries whose normalized GDP grew at least `threshold`-fold between
    `start_year` (default: first panel year) and the year of `set_b`.

    Returns (country, ratio, destination cluster) by decreasing ratio.
    """
    start_year = panel.years[0] if start_year is None else start_year
    g0 = gdp_profile(panel, start_year).as_dict()
    g1 = gdp_profile(panel, set_b.year).as_dict()
    out = []
    for country, name in sorted(set_b.membership().items()):
        if country in g0 and country in g1:
            ratio = g1[country] / g0[country]
            if ratio >= threshold:
                out.append((country, ratio, name))
    out.sort(key=lambda row: (-row[1], row[0]))
    return out
