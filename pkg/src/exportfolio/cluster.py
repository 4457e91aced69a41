"""Grouping countries by the similarity of their export portfolios.

Countries are compared by the Euclidean distance between their two-digit
portfolios, merged agglomeratively, and the tree is cut at a distance
threshold. Each resulting cluster is named after its dominant one-digit
categories: the fewest categories, taken by decreasing share, whose shares
add up to more than one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import TradePanel
from .shares import Portfolio, gdp_profile, group_share, local_shares

LINKAGES = ("single", "complete", "average")
DEFAULT_THRESHOLD = 0.45


class ClusterError(ValueError):
    pass


def portfolio_distance(a: Portfolio, b: Portfolio) -> float:
    """Euclidean distance between two portfolios over the union of their
    categories (a category one of them lacks counts as a zero share)."""
    if a.level != b.level:
        raise ClusterError(f"cannot compare level-{a.level} and level-{b.level} portfolios")
    da, db = a.as_dict(), b.as_dict()
    total = 0.0
    for p in sorted(set(da) | set(db)):
        diff = da.get(p, 0.0) - db.get(p, 0.0)
        total += diff * diff
    return math.sqrt(total)


def pairwise_distances(shares: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix between the rows of `shares`."""
    shares = np.asarray(shares, dtype=float)
    diff = shares[:, None, :] - shares[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    # exact symmetry and zero diagonal regardless of rounding
    d = np.triu(d, 1)
    return d + d.T


def distance_matrix(panel: TradePanel, year: int) -> tuple[tuple[str, ...], np.ndarray]:
    return panel.countries(year), pairwise_distances(local_shares(panel, year))


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree over `leaves`.

    Node ``i < len(leaves)`` is leaf ``leaves[i]``; the ``k``-th merge creates
    node ``len(leaves) + k``. This is the usual linkage-matrix numbering.
    """

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]
    linkage: str = "single"
    year: int | None = None

    def heights(self) -> list[float]:
        return [m.distance for m in self.merges]

    def rows(self) -> list[tuple[int, int, int, float, int]]:
        return [(k, m.left, m.right, m.distance, m.size) for k, m in enumerate(self.merges)]

    def members(self, node: int) -> list[str]:
        n = len(self.leaves)
        stack, out = [node], []
        while stack:
            x = stack.pop()
            if x < n:
                out.append(self.leaves[x])
            else:
                m = self.merges[x - n]
                stack.extend((m.left, m.right))
        return sorted(out)


def _validate_matrix(dist) -> np.ndarray:
    d = np.array(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ClusterError(f"distance matrix must be square, got shape {d.shape}")
    if d.shape[0] < 2:
        raise ClusterError("need at least 2 items to cluster")
    if not np.isfinite(d).all():
        raise ClusterError("distance matrix has non-finite entries")
    if (d < 0).any():
        raise ClusterError("distance matrix has negative entries")
    if (np.diag(d) != 0).any():
        raise ClusterError("distance matrix must have a zero diagonal")
    if not np.allclose(d, d.T, rtol=0, atol=1e-12):
        raise ClusterError("distance matrix is not symmetric")
    upper = np.triu(d, 1)
    return upper + upper.T


def agglomerate(dist, linkage: str = "single", labels: Sequence[str] | None = None) -> Dendrogram:
    """Agglomerative clustering of a distance matrix.

    At every step the two closest clusters are merged. Between clusters the
    distance is the minimum (``single``), maximum (``complete``) or mean
    (``average``) of the member-pair distances. Equal distances are
    resolved by the lexicographic order of the pair of cluster keys, a
    cluster's key being its smallest label.
    """
    if linkage not in LINKAGES:
        raise ClusterError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    d = _validate_matrix(dist)
    n = d.shape[0]
    labels = tuple(str(i) for i in range(n)) if labels is None else tuple(labels)
    if len(labels) != n or len(set(labels)) != n:
        raise ClusterError("labels must be unique, one per matrix row")

    order = sorted(range(n), key=lambda i: labels[i])
    key = np.empty(n, dtype=np.int64)
    key[order] = np.arange(n)

    work = d.copy()  # sum of member-pair distances for average linkage
    np.fill_diagonal(work, np.inf)
    size = np.ones(n, dtype=np.int64)
    node = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = []

    for step in range(n - 1):
        idx = np.flatnonzero(active)
        sub = work[np.ix_(idx, idx)]
        if linkage == "average":
            sub = sub / np.outer(size[idx], size[idx])
        best = sub.min()
        ii, jj = np.nonzero(sub == best)
        pairs = [
            (min(key[idx[a]], key[idx[b]]), max(key[idx[a]], key[idx[b]]), idx[a], idx[b])
            for a, b in zip(ii, jj)
            if a < b
        ]
        _, _, i, j = min(pairs)
        if key[j] < key[i]:
            i, j = j, i
        merges.append(Merge(int(node[i]), int(node[j]), float(best), int(size[i] + size[j])))

        if linkage == "single":
            row = np.minimum(work[i], work[j])
        elif linkage == "complete":
            row = np.maximum(work[i], work[j])
        else:
            row = work[i] + work[j]
        work[i, :] = row
        work[:, i] = row
        work[i, i] = np.inf
        work[j, :] = np.inf
        work[:, j] = np.inf
        active[j] = False
        size[i] += size[j]
        key[i] = min(key[i], key[j])
        node[i] = n + step

    return Dendrogram(labels, tuple(merges), linkage)


@dataclass(frozen=True)
class ClusterSet:
    year: int | None
    clusters: tuple[tuple[str, ...], ...]
    names: tuple[str, ...] | None
    threshold: float
    linkage: str = "single"

    def __post_init__(self):
        seen = set()
        for members in self.clusters:
            if not members:
                raise ClusterError("empty cluster")
            if seen & set(members):
                raise ClusterError("clusters overlap")
            seen |= set(members)
        if self.names is not None and len(self.names) != len(self.clusters):
            raise ClusterError("one name per cluster required")

    @property
    def countries(self) -> tuple[str, ...]:
        return tuple(sorted(c for members in self.clusters for c in members))

    def label(self, k: int) -> str:
        return self.names[k] if self.names is not None else str(k)

    def membership(self) -> dict[str, str]:
        return {c: self.label(k) for k, members in enumerate(self.clusters) for c in members}

    def members(self, name: str) -> tuple[str, ...]:
        for k in range(len(self.clusters)):
            if self.label(k) == name:
                return self.clusters[k]
        raise KeyError(f"no cluster named {name!r} in {self.year}")

    def rows(self) -> list[tuple[int | None, str, str]]:
        return [(self.year, self.label(k), c) for k, members in enumerate(self.clusters) for c in members]


def cut(tree: Dendrogram, d_c: float) -> ClusterSet:
    """Clusters left after removing every merge with distance above `d_c`."""
    if d_c < 0:
        raise ClusterError("threshold must be nonnegative")
    n = len(tree.leaves)
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, m in enumerate(tree.merges):
        if m.distance <= d_c:
            parent[find(m.left)] = n + k
            parent[find(m.right)] = n + k
    groups: dict[int, list[str]] = {}
    for i, leaf in enumerate(tree.leaves):
        groups.setdefault(find(i), []).append(leaf)
    clusters = sorted(tuple(sorted(g)) for g in groups.values())
    return ClusterSet(tree.year, tuple(clusters), None, float(d_c), tree.linkage)


@dataclass(frozen=True)
class ClusterStats:
    countries: tuple[str, ...]
    portfolio: Portfolio
    gdp: float

    @property
    def count(self) -> int:
        return len(self.countries)

    @property
    def year(self) -> int:
        return self.portfolio.year


def cluster_stats(panel: TradePanel, cluster: Iterable[str], year: int) -> ClusterStats:
    """Pooled portfolio and summed normalized GDP of a group of countries."""
    members = tuple(sorted(set(cluster)))
    if not members:
        raise ClusterError("empty cluster")
    g = gdp_profile(panel, year)
    gdp = 0.0
    for c in members:
        gdp += g.g(c)
    return ClusterStats(members, group_share(panel, members, year), gdp)


def name_cluster(stats: ClusterStats | Portfolio) -> str:
    """Digits of the fewest largest categories whose shares exceed 0.5.

    Categories are ranked by decreasing share, equal shares by increasing
    digit. Needs a level-1 portfolio.
    """
    pf = stats.portfolio if isinstance(stats, ClusterStats) else stats
    if pf.level != 1:
        raise ClusterError(f"cluster names need a level-1 portfolio, got level {pf.level}")
    ranked = sorted(zip(pf.categories, pf.values), key=lambda kv: (-kv[1], kv[0]))
    picked = []
    for p, v in ranked:
        picked.append((p, v))
        if math.fsum(s for _, s in picked) > 0.5:
            break
    return "".join(p for p, _ in picked)


def _unique(names: list[str]) -> list[str]:
    # a second cluster with the same dominant categories gets "#2", ...
    out, seen = [], {}
    for name in names:
        seen[name] = seen.get(name, 0) + 1
        out.append(name if seen[name] == 1 else f"{name}#{seen[name]}")
    return out


def name_clusters(panel: TradePanel, clusters: ClusterSet) -> ClusterSet:
    coarse = panel.at_level(1)
    names = [name_cluster(cluster_stats(coarse, members, clusters.year)) for members in clusters.clusters]
    return ClusterSet(clusters.year, clusters.clusters, tuple(_unique(names)), clusters.threshold, clusters.linkage)


def cluster_cross_distance(a: ClusterStats, b: ClusterStats) -> float:
    return portfolio_distance(a.portfolio, b.portfolio)


def cluster_year(
    panel: TradePanel,
    year: int,
    d_c: float = DEFAULT_THRESHOLD,
    linkage: str = "single",
    distance_level: int = 2,
) -> tuple[Dendrogram, ClusterSet]:
    """Build, cut and name the dendrogram of one year.

    Distances use the `distance_level` portfolios (two-digit by default);
    names use one-digit portfolios.
    """
    fine = panel.at_level(distance_level) if panel.level != distance_level else panel
    countries, dist = distance_matrix(fine, year)
    tree = agglomerate(dist, linkage, countries)
    tree = Dendrogram(tree.leaves, tree.merges, tree.linkage, year)
    return tree, name_clusters(panel, cut(tree, d_c))


def stats_rows(panel: TradePanel, clusters: ClusterSet) -> list[tuple]:
    """Rows of (year, name, n_countries, gdp, share_0 .. share_9) at level 1."""
    coarse = panel.at_level(1)
    digits = [str(p) for p in range(10)]
    out = []
    for k, members in enumerate(clusters.clusters):
        st = cluster_stats(coarse, members, clusters.year)
        out.append(
            (clusters.year, clusters.label(k), st.count, st.gdp, *(st.portfolio.share(p) for p in digits))
        )
    return out
