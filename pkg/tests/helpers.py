"""Small builders shared by the test modules."""

import os
from pathlib import Path

import numpy as np

from exportfolio.ingest import TradePanel


def make_panel(exports: dict, gdp: dict, level: int = 1) -> TradePanel:
    """Panel from nested dicts: ``exports[year][country][category]`` and
    ``gdp[year][country]``."""
    cats = sorted({p for by_c in exports.values() for row in by_c.values() for p in row})
    data = {}
    for year, by_c in exports.items():
        countries = sorted(by_c)
        mat = np.array([[by_c[c].get(p, 0.0) for p in cats] for c in countries], dtype=float)
        data[year] = (countries, mat.reshape(len(countries), len(cats)), [gdp[year][c] for c in countries])
    return TradePanel(level, cats, data)


def real_data_dir() -> Path | None:
    path = os.environ.get("EXPORTFOLIO_DATA")
    if not path:
        return None
    path = Path(path)
    if not (path / "trade.csv").is_file() or not (path / "gdp.csv").is_file():
        return None
    return path
