"""Grouping of positive graph nodes into object instances.

Single-linkage agglomerative clustering collects positive nodes of one
class that lie in the same vicinity; a cluster provably covering several
real objects (several member nodes generated by one and the same pair of
images) is split into that many subclusters.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.cluster import hierarchy

from .geometry import GeoPoint, LocalChart, haversine_distance
from .mrf import GraphNode


@dataclass
class Cluster:
    """A group of positive nodes representing one object instance."""

    members: list[GraphNode]
    center: GeoPoint
    pair_multiplicity: int


def cluster_center(members: list[GraphNode]) -> GeoPoint:
    """Arithmetic mean of member positions in a local planar chart."""
    anchor = min(members, key=lambda n: n.index).position
    chart = LocalChart(anchor)
    xs, ys = zip(*(chart.to_xy(m.position) for m in members))
    return chart.to_geo(sum(xs) / len(xs), sum(ys) / len(ys))


def pair_multiplicity(members: list[GraphNode]) -> int:
    """Highest number of members generated by one unordered image pair."""
    counts = Counter(m.frame_pair() for m in members)
    return max(counts.values())


def _condensed_distances(members: list[GraphNode]) -> np.ndarray:
    n = len(members)
    out = np.empty(n * (n - 1) // 2)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = haversine_distance(members[i].position, members[j].position)
            k += 1
    return out


def _make_cluster(members: list[GraphNode]) -> Cluster:
    return Cluster(members, cluster_center(members), pair_multiplicity(members))


def _grouped(members: list[GraphNode], flat: np.ndarray) -> list[Cluster]:
    groups: dict[int, list[GraphNode]] = {}
    for member, cid in zip(members, flat):
        groups.setdefault(int(cid), []).append(member)
    clusters = [_make_cluster(g) for g in groups.values()]
    clusters.sort(key=lambda c: min(m.index for m in c.members))
    return clusters


def agglomerate(nodes: list[GraphNode], linkage_cutoff: float) -> list[Cluster]:
    """Single-linkage clustering of positive nodes.

    Clusters merge while the smallest inter-cluster (nearest-member)
    distance stays within ``linkage_cutoff``. Input order does not matter:
    nodes are processed in index order, so the partition is deterministic.
    """
    if linkage_cutoff <= 0.0:
        raise ValueError(f"linkage_cutoff must be > 0, got {linkage_cutoff!r}")
    if not nodes:
        return []
    ordered = sorted(nodes, key=lambda n: n.index)
    if len(ordered) == 1:
        return [_make_cluster(ordered)]
    links = hierarchy.linkage(_condensed_distances(ordered), method="single")
    flat = hierarchy.fcluster(links, t=linkage_cutoff, criterion="distance")
    return _grouped(ordered, flat)


def split_by_pair_count(cluster: Cluster) -> list[Cluster]:
    """Split a cluster into as many parts as its pair multiplicity.

    k member nodes born from one and the same image pair are evidence of k
    distinct physical objects, so the members are re-clustered and the
    dendrogram cut at k. Clusters with multiplicity 1 pass through
    unchanged.
    """
    k = min(cluster.pair_multiplicity, len(cluster.members))
    if k <= 1:
        return [cluster]
    ordered = sorted(cluster.members, key=lambda n: n.index)
    links = hierarchy.linkage(_condensed_distances(ordered), method="single")
    flat = hierarchy.fcluster(links, t=k, criterion="maxclust")
    return _grouped(ordered, flat)
