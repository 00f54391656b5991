"""Per-class intersection graph and its binary labeling energy.

Rays of one object class are intersected pairwise; every forward
intersection within the ray cutoff becomes a graph node, a candidate object
position carrying the evidence needed by the energy terms:

* monocular-vs-triangulated distance mismatch (data term),
* reciprocal intersection counts of the two supporting view-rays
  (activation reward that keeps the empty labeling from being optimal),
* per-view height disagreement (vertical consistency),
* pairwise distance between co-active nodes that share a view-ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import GeoPoint, Ray, haversine_distance, intersect_rays

U0_VARIANTS = ("sum", "mean", "min", "max")

# Stand-in cost for nodes whose view geometry cannot produce a height
# (pitch at or beyond +/-90 degrees); keeps the solver free of infinities.
DEGENERATE_HEIGHT_PENALTY = 1e6


@dataclass(frozen=True)
class MrfWeights:
    """Weights of the three unary terms; the pairwise term gets the remainder."""

    alpha: float = 0.0
    beta: float = 0.0
    lam: float = 0.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "lam"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {v!r}")
        if self.alpha + self.beta + self.lam > 1.0:
            raise ValueError(
                f"alpha + beta + lam must not exceed 1, got {self.alpha + self.beta + self.lam!r}"
            )

    @property
    def pairwise(self) -> float:
        return 1.0 - self.alpha - self.beta - self.lam


@dataclass
class GraphNode:
    """One forward ray-ray intersection: a candidate object position.

    ``tri_dist`` holds the triangulated camera-to-node distances along the
    two supporting rays, ``mono_dist`` the monocular depth samples of their
    source detections (absent entries contribute nothing to the data term).
    ``heights`` is filled by the height module before energies are
    evaluated.
    """

    index: int
    position: GeoPoint
    ray_a: Ray
    ray_b: Ray
    ray_index_a: int
    ray_index_b: int
    tri_dist: tuple[float, float]
    mono_dist: tuple[float | None, float | None]
    heights: tuple[float, float] | None = None
    height_degenerate: bool = False

    def frame_pair(self) -> tuple[str, str]:
        """Unordered pair of image ids whose rays generated this node."""
        a = self.ray_a.frame.image_id
        b = self.ray_b.frame.image_id
        return (a, b) if a <= b else (b, a)


@dataclass
class MrfGraph:
    """Intersection graph of one object class."""

    class_label: str
    rays: list[Ray]
    nodes: list[GraphNode]
    ray_nodes: list[list[int]]  # node indices per ray, sorted by distance from origin
    _pair_cache: dict[tuple[int, int], float] | None = field(default=None, repr=False)

    def shared_ray_pairs(self) -> dict[tuple[int, int], float]:
        """Distance between every unordered node pair sharing a view-ray.

        Pairs lying on two shared rays (degenerate collinear layouts) are
        deduplicated by the unordered-pair key.
        """
        if self._pair_cache is None:
            pairs: dict[tuple[int, int], float] = {}
            for node_ids in self.ray_nodes:
                for i, m in enumerate(node_ids):
                    for n in node_ids[i + 1 :]:
                        key = (m, n) if m < n else (n, m)
                        if key not in pairs:
                            pairs[key] = haversine_distance(
                                self.nodes[key[0]].position, self.nodes[key[1]].position
                            )
            self._pair_cache = pairs
        return self._pair_cache


def build_graph(rays: list[Ray], max_ray_distance: float, class_label: str | None = None) -> MrfGraph:
    """Intersect all ray pairs of one class into an MrfGraph.

    Rays from the same camera frame are never intersected with each other
    (zero baseline). A node is kept only when both triangulated distances
    are positive and within ``max_ray_distance``.
    """
    if max_ray_distance <= 0.0:
        raise ValueError(f"max_ray_distance must be > 0, got {max_ray_distance!r}")
    labels = {r.detection.class_label for r in rays}
    if len(labels) > 1:
        raise ValueError(f"rays span multiple classes: {sorted(labels)}")
    if class_label is None:
        class_label = labels.pop() if labels else ""

    nodes: list[GraphNode] = []
    ray_nodes: list[list[int]] = [[] for _ in rays]
    for i in range(len(rays)):
        for j in range(i + 1, len(rays)):
            if rays[i].frame.image_id == rays[j].frame.image_id:
                continue
            p = intersect_rays(rays[i], rays[j])
            if p is None:
                continue
            d1 = haversine_distance(rays[i].origin, p)
            d2 = haversine_distance(rays[j].origin, p)
            if not (0.0 < d1 <= max_ray_distance and 0.0 < d2 <= max_ray_distance):
                continue
            node = GraphNode(
                index=len(nodes),
                position=p,
                ray_a=rays[i],
                ray_b=rays[j],
                ray_index_a=i,
                ray_index_b=j,
                tri_dist=(d1, d2),
                mono_dist=(rays[i].detection.mono_depth, rays[j].detection.mono_depth),
            )
            nodes.append(node)
            ray_nodes[i].append(node.index)
            ray_nodes[j].append(node.index)

    def dist_along(ray_index: int, node_index: int) -> float:
        node = nodes[node_index]
        return node.tri_dist[0] if node.ray_index_a == ray_index else node.tri_dist[1]

    for r, ids in enumerate(ray_nodes):
        ids.sort(key=lambda n: (dist_along(r, n), n))
    return MrfGraph(class_label, list(rays), nodes, ray_nodes)


def u0_value(graph: MrfGraph, node: GraphNode, variant: str = "sum") -> float:
    """Activation reward: negated aggregate of the two supporting rays'
    reciprocal intersection counts."""
    ra = 1.0 / len(graph.ray_nodes[node.ray_index_a])
    rb = 1.0 / len(graph.ray_nodes[node.ray_index_b])
    if variant == "sum":
        return -(ra + rb)
    if variant == "mean":
        return -(ra + rb) / 2.0
    if variant == "min":
        return -min(ra, rb)
    if variant == "max":
        return -max(ra, rb)
    raise ValueError(f"unknown u0 variant {variant!r}; expected one of {U0_VARIANTS}")


def u1_value(node: GraphNode) -> float:
    """Monocular-vs-triangulated distance mismatch; rays without a depth
    sample contribute nothing."""
    total = 0.0
    for mono, tri in zip(node.mono_dist, node.tri_dist):
        if mono is not None:
            total += abs(mono - tri)
    return total


def u2_value(node: GraphNode) -> float:
    """Disagreement between the node's two single-view height estimates."""
    if node.height_degenerate:
        return DEGENERATE_HEIGHT_PENALTY
    if node.heights is None:
        return 0.0
    return abs(node.heights[0] - node.heights[1])


def node_distances(graph: MrfGraph) -> list[tuple[tuple[float, float], tuple[float | None, float | None]]]:
    """Per-node table of (triangulated distances, monocular depths)."""
    return [(node.tri_dist, node.mono_dist) for node in graph.nodes]


def energy(graph: MrfGraph, labels: list[int], weights: MrfWeights, u0_variant: str = "sum") -> float:
    """Total labeling energy of the graph.

    Weighted sum of the three unary terms over active nodes plus the
    pairwise distance penalty for every co-active node pair sharing a ray.
    """
    if len(labels) != len(graph.nodes):
        raise ValueError(f"label vector length {len(labels)} != node count {len(graph.nodes)}")
    total = 0.0
    for node, z in zip(graph.nodes, labels):
        if not z:
            continue
        total += weights.alpha * u0_value(graph, node, u0_variant)
        total += weights.beta * u1_value(node)
        total += weights.lam * u2_value(node)
    w_pair = weights.pairwise
    if w_pair != 0.0:
        for (m, n), dist in graph.shared_ray_pairs().items():
            if labels[m] and labels[n]:
                total += w_pair * dist
    return total
