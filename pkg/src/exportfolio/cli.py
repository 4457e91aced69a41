"""Command-line entry point.

Every command reads the trade/GDP inputs (except ``synth``, which writes
them), runs one stage of the analysis, writes delimiter-separated result
files into ``--out`` and finishes with ``manifest.json``. Values come from
command-line flags first, then the ``--config`` JSON file, then defaults.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .cluster import LINKAGES, ClusterError, cluster_stats, cluster_year, portfolio_distance, stats_rows
from .correlate import (
    PARAMETRIC,
    PERMUTATION,
    CorrelationError,
    ElasticityError,
    elasticity_summary,
    fit_elasticity,
    fraction_increased,
    share_gdp_correlation,
    variation_correlation,
    variation_profile,
)
from .ingest import (
    EmptyJoinWarning,
    IngestError,
    apply_aliases,
    build_panel,
    filter_window,
    load_formats,
    load_gdp,
    load_rules,
    load_trade,
    merge_entities,
    panel_records,
    reconcile,
    write_gdp,
    write_trade,
    TRADE_FORMAT,
    GDP_FORMAT,
    RULES_FORMAT,
)
from .output import RunLog, atomic_write_text
from .shares import ShareError, gdp_profile, global_share, local_shares, sector_share
from .sitc import LEVEL1_NAMES
from .synth import SynthConfig, generate
from .transition import TransitionError, growth_ranking, transition_series, transition_table

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_BAD_INPUT = 4
EXIT_EMPTY_JOIN = 5
EXIT_ANALYSIS = 6

COMMANDS = ("ingest", "shares", "correlate", "elasticity", "cluster", "transition", "synth", "report")
CLUSTER_COMMANDS = ("cluster", "transition", "report")

DEFAULTS = {
    "trade": None,
    "gdp": None,
    "aliases": None,
    "formats": None,
    "level": None,
    "from_year": 1962,
    "to_year": 2000,
    "dc": 0.45,
    "linkage": "single",
    "pvalue": PARAMETRIC,
    "permutations": 10_000,
    "seed": 0,
    "out": "out",
    "scope": None,
    "min_count": 1,
    "growth_threshold": 1.5,
    "n_countries": 60,
    "noise": 0.2,
    "alpha": None,
    "archetypes": 1,
    "switch_prob": 0.0,
    "synth_level": 1,
}

SCOPES = ("global", "local", "gdp", "sector")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exportfolio", description="Export commodity portfolio analysis of trade and GDP panels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with defaults for any option")
    common.add_argument("--trade", help="trade table (country, year, sitc, value)")
    common.add_argument("--gdp", help="GDP table (country, year, gdp)")
    common.add_argument("--aliases", help="rename/merge rules (source_name, target_name, year_from, year_to)")
    common.add_argument("--formats", help="JSON file declaring delimiters and column names")
    common.add_argument("--level", type=int, choices=(1, 2), default=None)
    common.add_argument("--from-year", type=int, default=None)
    common.add_argument("--to-year", type=int, default=None)
    common.add_argument("--dc", type=float, default=None, help="dendrogram cut distance")
    common.add_argument("--linkage", choices=LINKAGES, default=None)
    common.add_argument("--pvalue", choices=(PARAMETRIC, PERMUTATION), default=None)
    common.add_argument("--permutations", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")

    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "shares":
            p.add_argument("--scope", action="append", choices=SCOPES, default=None)
        if name in ("transition", "report"):
            p.add_argument("--min-count", type=int, default=None,
                           help="hide transitions of fewer countries in the matrix export")
            p.add_argument("--growth-threshold", type=float, default=None)
        if name == "synth":
            p.add_argument("--n-countries", type=int, default=None)
            p.add_argument("--noise", type=float, default=None)
            p.add_argument("--alpha", action="append", default=None, metavar="P=VALUE",
                           help="exponent of a category, repeatable")
            p.add_argument("--archetypes", type=int, default=None)
            p.add_argument("--switch-prob", type=float, default=None)
            p.add_argument("--synth-level", type=int, choices=(1, 2), default=None)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults and validate."""
    config = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise CliError(EXIT_MISSING_INPUT, f"config file not found: {path}")
        try:
            config = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_USAGE, f"config file {path} is not valid JSON: {exc}") from None
        unknown = set(config) - set(DEFAULTS)
        if unknown:
            raise CliError(EXIT_USAGE, f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        cfg[key] = flag if flag is not None else config.get(key, default)
    if cfg["level"] is None:
        cfg["level"] = 2 if args.command in CLUSTER_COMMANDS else 1

    if cfg["level"] not in (1, 2):
        raise CliError(EXIT_USAGE, f"--level must be 1 or 2, got {cfg['level']}")
    if cfg["dc"] < 0:
        raise CliError(EXIT_USAGE, f"--dc must be nonnegative, got {cfg['dc']}")
    if cfg["linkage"] not in LINKAGES:
        raise CliError(EXIT_USAGE, f"--linkage must be one of {LINKAGES}")
    if cfg["pvalue"] not in (PARAMETRIC, PERMUTATION):
        raise CliError(EXIT_USAGE, f"--pvalue must be parametric or permutation")
    if cfg["from_year"] > cfg["to_year"]:
        raise CliError(EXIT_USAGE, "--from-year is after --to-year")
    if cfg["permutations"] < 1:
        raise CliError(EXIT_USAGE, "--permutations must be positive")
    if args.command in CLUSTER_COMMANDS and cfg["level"] != 2:
        # clustering distances need two-digit portfolios
        raise CliError(EXIT_USAGE, f"{args.command} needs --level 2")
    if args.command != "synth":
        for role in ("trade", "gdp"):
            if not cfg[role]:
                raise CliError(EXIT_MISSING_INPUT, f"--{role} is required")
        for role in ("trade", "gdp", "aliases", "formats"):
            if cfg[role] and not Path(cfg[role]).is_file():
                raise CliError(EXIT_MISSING_INPUT, f"{role} file not found: {cfg[role]}")
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot create output directory {out}: {exc}") from None
    return cfg


def rerun_args(command: str, cfg: dict) -> list[str]:
    argv = ["exportfolio", command]
    for key in ("trade", "gdp", "aliases", "formats", "level", "from_year", "to_year", "dc",
                "linkage", "pvalue", "permutations", "seed", "out"):
        if cfg[key] is not None:
            value = cfg[key]
            if key in ("trade", "gdp", "aliases", "formats", "out"):
                value = str(Path(value).resolve())
            argv += [f"--{key.replace('_', '-')}", str(value)]
    if command == "shares":
        for s in cfg["scope"] or ():
            argv += ["--scope", s]
    if command in ("transition", "report"):
        argv += ["--min-count", str(cfg["min_count"]), "--growth-threshold", str(cfg["growth_threshold"])]
    if command == "synth":
        argv += ["--n-countries", str(cfg["n_countries"]), "--noise", str(cfg["noise"]),
                 "--archetypes", str(cfg["archetypes"]), "--switch-prob", str(cfg["switch_prob"]),
                 "--synth-level", str(cfg["synth_level"])]
        for a in cfg["alpha"] or ():
            argv += ["--alpha", a]
    return argv


# ---------------------------------------------------------------- loading


class Loaded:
    def __init__(self, panel, report, n_trade, n_gdp):
        self.panel = panel
        self.report = report
        self.n_trade = n_trade
        self.n_gdp = n_gdp


def load_inputs(cfg: dict, log: RunLog) -> Loaded:
    fmts = {"trade": TRADE_FORMAT, "gdp": GDP_FORMAT, "rules": RULES_FORMAT}
    if cfg["formats"]:
        try:
            fmts = load_formats(cfg["formats"])
        except (json.JSONDecodeError, AttributeError) as exc:
            raise CliError(EXIT_BAD_INPUT, f"bad formats file {cfg['formats']}: {exc}") from None
    window = (cfg["from_year"], cfg["to_year"])
    try:
        trade = load_trade(cfg["trade"], fmts["trade"])
        gdp = load_gdp(cfg["gdp"], fmts["gdp"])
        rules = load_rules(cfg["aliases"], fmts["rules"]) if cfg["aliases"] else []
        log.add_input("trade", cfg["trade"], len(trade))
        log.add_input("gdp", cfg["gdp"], len(gdp))
        log.add_input("aliases", cfg["aliases"], len(rules) if cfg["aliases"] else None)
        log.add_input("formats", cfg["formats"])
        trade = filter_window(trade, *window)
        gdp = filter_window(gdp, *window)
        actions = []
        trade = merge_entities(trade, rules, window, actions)
        gdp = apply_aliases(gdp, rules)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", EmptyJoinWarning)
            panel = build_panel(trade, gdp, cfg["level"])
    except IngestError as exc:
        raise CliError(EXIT_BAD_INPUT, str(exc)) from None
    except ValueError as exc:
        raise CliError(EXIT_BAD_INPUT, str(exc)) from None
    for w in caught:
        print(f"exportfolio: warning: {w.message}", file=sys.stderr)
    report = reconcile(trade, gdp, panel, actions)
    nonempty = [y for y in panel.years if panel.countries(y)]
    if not nonempty:
        raise CliError(EXIT_EMPTY_JOIN, "no country has both export and GDP data in any year")
    return Loaded(panel.restrict(nonempty), report, len(trade), len(gdp))


def _need_year(panel, year: int) -> None:
    if year not in panel.years:
        raise CliError(EXIT_ANALYSIS, f"year {year} has no joined data")


# ---------------------------------------------------------------- stages


def write_ingest(log: RunLog, data: Loaded) -> None:
    panel = data.panel
    rows = []
    for y in panel.years:
        rows.append((y, len(panel.countries(y)), float(panel.exports(y).sum()), float(panel.gdp_values(y).sum())))
    log.table("panel_summary.csv", ("year", "n_countries", "total_export", "total_gdp"), rows)
    log.table("reconciliation.csv", ("section", "country", "year", "detail"), data.report.rows())


def write_shares(log: RunLog, panel, scopes) -> None:
    scopes = scopes or SCOPES
    if "global" in scopes:
        rows = [r for y in panel.years for r in global_share(panel, y).rows()]
        log.table("global_shares.csv", ("owner", "year", "category", "share"), rows)
    if "local" in scopes:
        rows = []
        for y in panel.years:
            mat = local_shares(panel, y)
            for i, c in enumerate(panel.countries(y)):
                rows.extend((c, y, p, float(v)) for p, v in zip(panel.categories, mat[i]))
        log.table("local_shares.csv", ("owner", "year", "category", "share"), rows)
    if "gdp" in scopes:
        rows = [(c, y, g) for y in panel.years for c, g in gdp_profile(panel, y).as_dict().items()]
        log.table("gdp_profile.csv", ("country", "year", "g"), rows)
    if "sector" in scopes:
        coarse = panel.at_level(1)
        rows = []
        for y in coarse.years:
            pf = global_share(coarse, y)
            rows.append((y, sector_share(pf, "primary"), sector_share(pf, "manufacturing")))
        log.table("sector_shares.csv", ("year", "primary", "manufacturing"), rows)


def correlation_rows(panel, cfg) -> list[tuple]:
    rows = []
    kw = {"method": cfg["pvalue"], "n_permutations": cfg["permutations"], "seed": cfg["seed"]}
    if cfg["pvalue"] == PARAMETRIC:
        kw = {"method": PARAMETRIC}
    for p in panel.categories:
        for y in panel.years:
            try:
                r = share_gdp_correlation(panel, p, y, **kw)
            except CorrelationError:
                continue
            rows.append((p, y, r.rho, r.p_value, r.n))
    return rows


def variation_rows(panel, cfg):
    t0, t1 = cfg["from_year"], cfg["to_year"]
    if t0 not in panel.years or t1 not in panel.years or t0 == t1:
        return None, [], []
    prof = variation_profile(panel, t0, t1)
    points = []
    for p in panel.categories:
        for c, lam in sorted(prof.lam[p].items()):
            points.append((c, p, lam, prof.gamma[c]))
    corr = []
    kw = {"method": cfg["pvalue"]}
    if cfg["pvalue"] == PERMUTATION:
        kw.update(n_permutations=cfg["permutations"], seed=cfg["seed"])
    for p in panel.categories:
        up, down = fraction_increased(prof, p)
        try:
            r = variation_correlation(prof, p, **kw)
            corr.append((p, t0, t1, r.rho, r.p_value, r.n, up, down))
        except CorrelationError:
            corr.append((p, t0, t1, None, None, len(prof.lam[p]), up, down))
    return prof, points, corr


def write_correlate(log: RunLog, panel, cfg) -> None:
    log.table("correlation.csv", ("category", "year", "rho", "p_value", "n"), correlation_rows(panel, cfg))
    _, points, corr = variation_rows(panel, cfg)
    if corr:
        log.table("variation.csv", ("country", "category", "lambda", "gamma"), points)
        log.table(
            "variation_correlation.csv",
            ("category", "t0", "t1", "rho", "p_value", "n", "frac_increased", "frac_decreased"),
            corr,
        )


def elasticity_tables(panel):
    per_year, summary = [], []
    for p in panel.categories:
        for y in panel.years:
            try:
                e = fit_elasticity(panel, p, y)
            except (ElasticityError, ValueError):
                continue
            per_year.append((p, y, e.alpha, e.stderr, e.n, e.n_excluded))
        try:
            s = elasticity_summary(panel, p)
        except ElasticityError:
            continue
        summary.append((p, LEVEL1_NAMES.get(p, ""), s.mean, s.std, s.n_years))
    return per_year, summary


def write_elasticity(log: RunLog, panel) -> None:
    per_year, summary = elasticity_tables(panel)
    log.table("elasticity.csv", ("category", "year", "alpha", "stderr", "n", "n_excluded"), per_year)
    log.table("elasticity_summary.csv", ("category", "description", "mean_alpha", "std_alpha", "n_years"), summary)


def write_clusters(log: RunLog, panel, cfg, years):
    sets = {}
    for y in years:
        _need_year(panel, y)
        if len(panel.countries(y)) < 2:
            raise CliError(EXIT_ANALYSIS, f"year {y} has fewer than 2 countries to cluster")
        tree, clusters = cluster_year(panel, y, cfg["dc"], cfg["linkage"])
        log.table(f"dendrogram_{y}.csv", ("merge_index", "left_id", "right_id", "distance", "size"), tree.rows())
        log.table(f"clusters_{y}.csv", ("year", "cluster_name", "country"), clusters.rows())
        sets[y] = clusters
    rows = [r for y in years for r in stats_rows(panel, sets[y])]
    log.table(
        "cluster_portfolios.csv",
        ("year", "cluster_name", "n_countries", "gdp", *(f"phi_{d}" for d in range(10))),
        rows,
    )
    if len(years) == 2:
        a, b = (sets[y] for y in years)
        coarse = panel.at_level(1)
        stats_b = [cluster_stats(coarse, m, b.year) for m in b.clusters]
        rows = []
        for k, m in enumerate(a.clusters):
            sa = cluster_stats(coarse, m, a.year)
            rows.append((a.label(k), *(portfolio_distance(sa.portfolio, sb.portfolio) for sb in stats_b)))
        header = (f"{a.year}\\{b.year}", *(b.label(k) for k in range(len(b.clusters))))
        log.table("cluster_distances.csv", header, rows)
    return sets


def write_transition(log: RunLog, panel, cfg, sets, plot_series: bool = False) -> None:
    a, b = sets[cfg["from_year"]], sets[cfg["to_year"]]
    report = transition_table(panel, a, b)
    table = report.table(cfg["min_count"])
    log.table("transition_matrix.csv", table[0], table[1:])
    log.table("transition_cells.csv", ("source_cluster", "dest_cluster", "count", "gamma", "g_start", "g_end"),
              [(c.source, c.dest, c.count, c.gamma, c.g_start, c.g_end) for c in report.cells])
    log.table("transition_members.csv", ("source_cluster", "dest_cluster", "country"), report.member_rows())
    log.table("transition_unmatched.csv", ("country", "year", "cluster"), report.unmatched)
    rows, raw_series, norm_series = [], [], []
    for cell in report.cells:
        try:
            norm = dict(transition_series(panel, report, cell, normalize_to_start=True))
        except TransitionError:
            norm = {}
        for y, g in transition_series(panel, report, cell):
            rows.append((cell.source, cell.dest, y, g, norm.get(y)))
            group = f"{cell.source}->{cell.dest}"
            # transitions of three or fewer countries are left out of the summary series
            if cell.count > 3:
                raw_series.append((y, g, group))
            if y in norm:
                norm_series.append((y, norm[y], group))
    log.table("transition_series.csv", ("source_cluster", "dest_cluster", "year", "g", "g_normalized"), rows)
    ranking = growth_ranking(panel, b, cfg["growth_threshold"], start_year=a.year)
    log.table("growth_ranking.csv", ("country", "gamma", "dest_cluster"), ranking)
    if plot_series:
        log.table("series_transition_gdp.csv", ("x", "y", "group"), raw_series)
        log.table("series_transition_gdp_normalized.csv", ("x", "y", "group"), norm_series)
        arrows = [(c.source, c.dest, c.count) for c in report.cells if c.count >= 3]
        log.table("transition_arrows.csv", ("source_cluster", "dest_cluster", "count"), arrows)


def write_plot_series(log: RunLog, panel1, cfg) -> None:
    """Plot-ready (x, y, group) series from the one-digit panel."""
    log.table("series_global_shares.csv", ("x", "y", "group"),
              [(y, s, p) for y in panel1.years for (_, _, p, s) in global_share(panel1, y).rows()])
    corr = correlation_rows(panel1, cfg)
    log.table("series_share_gdp_correlation.csv", ("x", "y", "group", "p_value"), [(y, r, p, pv) for p, y, r, pv, _ in corr])
    scatter = []
    for p in ("0", "7"):
        if p not in panel1.categories:
            continue
        j = panel1.category_index(p)
        for y in panel1.years:
            s = local_shares(panel1, y)[:, j]
            g = gdp_profile(panel1, y).values
            scatter.extend((float(gx), float(sx), f"{p}/{y}") for gx, sx in zip(g, s) if sx > 0)
    log.table("series_share_vs_gdp.csv", ("x", "y", "group"), scatter)
    per_year, _ = elasticity_tables(panel1)
    log.table("series_elasticity.csv", ("x", "y", "group"), [(y, a, p) for p, y, a, *_ in per_year])
    _, points, vcorr = variation_rows(panel1, cfg)
    log.table("series_fraction_changed.csv", ("x", "y", "group"),
              [(row[0], row[6], "increased") for row in vcorr] + [(row[0], row[7], "decreased") for row in vcorr])
    log.table("series_variation.csv", ("x", "y", "group"),
              [(gam, lam, p) for _, p, lam, gam in points if p in ("0", "7")])
    log.table("series_variation_correlation.csv", ("x", "y", "group", "p_value"),
              [(row[0], row[3], "rho", row[4]) for row in vcorr])


# ---------------------------------------------------------------- commands


def run(command: str, cfg: dict) -> RunLog:
    log = RunLog(Path(cfg["out"]))
    if command == "synth":
        run_synth(log, cfg)
        return log
    analyze(command, load_inputs(cfg, log), cfg, log)
    return log


def analyze(command: str, data: Loaded, cfg: dict, log: RunLog) -> None:
    """Run the stages of `command` on an already joined panel."""
    panel = data.panel
    try:
        if command == "ingest":
            write_ingest(log, data)
        elif command == "shares":
            write_shares(log, panel, cfg["scope"])
        elif command == "correlate":
            write_correlate(log, panel, cfg)
        elif command == "elasticity":
            write_elasticity(log, panel)
        elif command == "cluster":
            write_clusters(log, panel, cfg, sorted({cfg["from_year"], cfg["to_year"]}))
        elif command == "transition":
            sets = write_clusters(log, panel, cfg, [cfg["from_year"], cfg["to_year"]])
            write_transition(log, panel, cfg, sets)
        elif command == "report":
            if cfg["from_year"] == cfg["to_year"]:
                raise CliError(EXIT_USAGE, "report needs --from-year before --to-year")
            write_ingest(log, data)
            panel1 = panel.at_level(1)
            write_shares(log, panel1, ("global", "gdp", "sector"))
            write_elasticity(log, panel1)
            write_correlate(log, panel1, cfg)
            rows = correlation_rows(panel, cfg)
            log.table("correlation_level2.csv", ("category", "year", "rho", "p_value", "n"), rows)
            write_plot_series(log, panel1, cfg)
            sets = write_clusters(log, panel, cfg, [cfg["from_year"], cfg["to_year"]])
            write_transition(log, panel, cfg, sets, plot_series=True)
    except (ShareError, ClusterError, TransitionError, ElasticityError, CorrelationError) as exc:
        raise CliError(EXIT_ANALYSIS, str(exc)) from None


def parse_alpha(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise CliError(EXIT_USAGE, f"bad --alpha {item!r}; expected P=VALUE") from None
        if not sep:
            raise CliError(EXIT_USAGE, f"bad --alpha {item!r}; expected P=VALUE")
    return out


def run_synth(log: RunLog, cfg: dict) -> None:
    level = cfg["synth_level"]
    cats = tuple(str(d) for d in range(10)) if level == 1 else tuple(f"{d}{e}" for d in range(10) for e in range(10))
    alpha = dict(SynthConfig().true_alpha)
    alpha.update(parse_alpha(cfg["alpha"]))
    years = tuple(range(cfg["from_year"], cfg["to_year"] + 1))
    try:
        config = SynthConfig(
            n_countries=cfg["n_countries"],
            years=years,
            categories=cats,
            true_alpha=alpha,
            noise_scale=cfg["noise"],
            n_archetypes=cfg["archetypes"],
            switch_prob=cfg["switch_prob"],
            seed=cfg["seed"],
        )
        panel = generate(config)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    trade, gdp = panel_records(panel)
    out = Path(cfg["out"])
    for name, writer, records in (("trade.csv", write_trade, trade), ("gdp.csv", write_gdp, gdp)):
        buf = io.StringIO()
        writer(records, buf)
        atomic_write_text(out / name, buf.getvalue())
    log.outputs["trade.csv"] = len(trade)
    log.outputs["gdp.csv"] = len(gdp)
    log.json("synth_metadata.json", config.metadata())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        log = run(args.command, cfg)
        log.manifest(args.command, dict(cfg), __version__, rerun_args(args.command, cfg))
    except CliError as exc:
        print(f"exportfolio: error: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
