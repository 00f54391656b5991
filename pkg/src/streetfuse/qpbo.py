"""Exact minimization of binary quadratic pseudo-Boolean energies.

Roof duality reduces the (generally non-submodular) energy to a single
min-cut on a doubled network holding one node per literal x_i and one per
its negation. Variables whose two literal nodes fall on opposite sides of
the canonical minimum cut receive a persistent label: some global optimum
assigns them that value. The remaining variables are resolved by probing
(fixing each to both values and keeping implications common to both
branches), exhaustive enumeration of small residual components, and
deterministic greedy descent for anything larger, so a total labeling is
always returned.

Everything here is deterministic: identical problems produce identical
labelings on every run.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .mrf import MrfGraph, MrfWeights, u0_value, u1_value, u2_value

# Residual components up to this many variables are solved by enumeration.
ENUMERATION_LIMIT = 20
PROBING_ROUNDS = 3
# Assignments per numpy block when enumerating a component.
_ENUM_BLOCK = 1 << 16


@dataclass(frozen=True)
class PseudoBooleanProblem:
    """Quadratic pseudo-Boolean energy in explicit cost-table form.

    ``unary[i]`` is ``(cost at 0, cost at 1)`` for variable i; each pairwise
    entry is ``(i, j, cost00, cost01, cost10, cost11)``.
    """

    num_vars: int
    unary: tuple[tuple[float, float], ...]
    pairwise: tuple[tuple[int, int, float, float, float, float], ...]

    def __post_init__(self) -> None:
        if len(self.unary) != self.num_vars:
            raise ValueError("unary table size does not match num_vars")
        for c0, c1 in self.unary:
            if not (math.isfinite(c0) and math.isfinite(c1)):
                raise ValueError("unary costs must be finite")
        for i, j, *costs in self.pairwise:
            if i == j:
                raise ValueError(f"pairwise term joins variable {i} with itself")
            if not (0 <= i < self.num_vars and 0 <= j < self.num_vars):
                raise ValueError(f"pairwise term ({i}, {j}) out of range")
            if not all(math.isfinite(c) for c in costs):
                raise ValueError("pairwise costs must be finite")

    def evaluate(self, labels, default: int = 0) -> float:
        """Energy of a labeling; unlabeled (None) entries count as ``default``."""
        if len(labels) != self.num_vars:
            raise ValueError(f"label vector length {len(labels)} != num_vars {self.num_vars}")
        z = [default if l is None else l for l in labels]
        total = 0.0
        for i, (c0, c1) in enumerate(self.unary):
            total += c1 if z[i] else c0
        for i, j, c00, c01, c10, c11 in self.pairwise:
            if z[i]:
                total += c11 if z[j] else c10
            else:
                total += c01 if z[j] else c00
        return total


@dataclass(frozen=True)
class Labeling:
    """Solver output; ``labels`` entries are 0, 1 or None (unlabeled)."""

    labels: tuple[int | None, ...]
    energy: float

    @property
    def is_total(self) -> bool:
        return all(l is not None for l in self.labels)


def from_mrf(graph: MrfGraph, weights: MrfWeights, u0_variant: str = "sum") -> PseudoBooleanProblem:
    """Reformulate a graph labeling energy as a PseudoBooleanProblem.

    The problem's energy equals ``mrf.energy`` for every label vector: each
    node's weighted unary terms become its cost-at-1, and every shared-ray
    node pair becomes one pairwise term charging the weighted distance when
    both are active.
    """
    unary = []
    for node in graph.nodes:
        cost1 = (
            weights.alpha * u0_value(graph, node, u0_variant)
            + weights.beta * u1_value(node)
            + weights.lam * u2_value(node)
        )
        unary.append((0.0, cost1))
    w_pair = weights.pairwise
    pairwise = tuple(
        (m, n, 0.0, 0.0, 0.0, w_pair * dist)
        for (m, n), dist in sorted(graph.shared_ray_pairs().items())
    )
    return PseudoBooleanProblem(len(graph.nodes), tuple(unary), pairwise)


class _FlowNetwork:
    """Dinic max-flow with float capacities.

    Augmentation amounts are exact minima of residual capacities, so the
    bottleneck edge of every augmenting path saturates to exactly zero;
    termination does not rely on an epsilon.
    """

    def __init__(self, n: int) -> None:
        self.n = n
        # adj[u] holds [v, residual capacity, index of reverse edge in adj[v]]
        self.adj: list[list[list]] = [[] for _ in range(n)]

    def add_edge(self, u: int, v: int, cap: float) -> None:
        self.adj[u].append([v, cap, len(self.adj[v])])
        self.adj[v].append([u, 0.0, len(self.adj[u]) - 1])

    def _levels(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v, cap, _ in self.adj[u]:
                if cap > 0.0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _blocking_flow(self, s: int, t: int, level: list[int]) -> float:
        flow = 0.0
        it = [0] * self.n
        path: list[list] = []
        u = s
        while True:
            advanced = False
            while it[u] < len(self.adj[u]):
                edge = self.adj[u][it[u]]
                v, cap, _ = edge
                if cap > 0.0 and level[v] == level[u] + 1:
                    path.append(edge)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if advanced:
                if u != t:
                    continue
                bottleneck = min(edge[1] for edge in path)
                for edge in path:
                    v, _, rev = edge
                    edge[1] -= bottleneck
                    self.adj[v][rev][1] += bottleneck
                flow += bottleneck
                path.clear()
                u = s
            else:
                if u == s:
                    return flow
                # Dead end: retreat one edge and retire it.
                edge = path.pop()
                u = self.adj[edge[0]][edge[2]][0]
                it[u] += 1

    def max_flow(self, s: int, t: int) -> float:
        total = 0.0
        while True:
            level = self._levels(s, t)
            if level is None:
                return total
            total += self._blocking_flow(s, t, level)

    def source_side(self, s: int) -> list[bool]:
        """Canonical minimum cut: nodes reachable from s in the residual graph."""
        seen = [False] * self.n
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for v, cap, _ in self.adj[u]:
                if cap > 0.0 and not seen[v]:
                    seen[v] = True
                    q.append(v)
        return seen


def _build_doubled_network(p: PseudoBooleanProblem) -> tuple[_FlowNetwork, int, int, float]:
    """Roof-duality network: literal nodes 2i (x_i) and 2i+1 (negation).

    Every original term is split in half between the two symmetric copies;
    supermodular pairwise terms pair a literal with the other variable's
    negation, which makes both halves submodular. Returns the network,
    source, sink and the constant term (lower bound = constant + max flow).
    """
    n = p.num_vars
    source = 2 * n
    sink = 2 * n + 1
    net_cost1 = [0.0] * (2 * n)  # accumulated cost(1) - cost(0) per literal node
    constant = 0.0
    arc_caps: dict[tuple[int, int], float] = {}

    def add_half_pair(u: int, v: int, e00: float, e01: float, e10: float, e11: float) -> None:
        # Submodular decomposition: e00 + (e11-e01)*xu + (e01-e00)*xv + D*xu*(1-xv)
        nonlocal constant
        constant += e00
        net_cost1[u] += e11 - e01
        net_cost1[v] += e01 - e00
        d = e01 + e10 - e00 - e11
        if d > 0.0:
            key = (v, u)  # pay when xu = 1 and xv = 0
            arc_caps[key] = arc_caps.get(key, 0.0) + d

    for i, (c0, c1) in enumerate(p.unary):
        net_cost1[2 * i] += (c1 - c0) / 2.0
        constant += c0 / 2.0
        net_cost1[2 * i + 1] += (c0 - c1) / 2.0
        constant += c1 / 2.0

    for i, j, t00, t01, t10, t11 in p.pairwise:
        if t01 + t10 - t00 - t11 >= 0.0:  # submodular as given
            add_half_pair(2 * i, 2 * j, t00 / 2.0, t01 / 2.0, t10 / 2.0, t11 / 2.0)
            add_half_pair(2 * i + 1, 2 * j + 1, t11 / 2.0, t10 / 2.0, t01 / 2.0, t00 / 2.0)
        else:  # pair each literal with the other variable's negation
            add_half_pair(2 * i, 2 * j + 1, t01 / 2.0, t00 / 2.0, t11 / 2.0, t10 / 2.0)
            add_half_pair(2 * i + 1, 2 * j, t10 / 2.0, t11 / 2.0, t00 / 2.0, t01 / 2.0)

    network = _FlowNetwork(2 * n + 2)
    for (u, v), cap in arc_caps.items():
        network.add_edge(u, v, cap)
    for node, net in enumerate(net_cost1):
        if net > 0.0:
            # label 1 puts the node on the sink side and cuts this arc
            network.add_edge(source, node, net)
        elif net < 0.0:
            network.add_edge(node, sink, -net)
            constant += net
    return network, source, sink, constant


def _audit_cut(network: _FlowNetwork, source: int, flow: float, caps: dict) -> None:
    """Check the max-flow value against the capacity of the derived cut."""
    side = network.source_side(source)
    cut = sum(cap for (u, v), cap in caps.items() if side[u] and not side[v])
    tol = 1e-9 * max(1.0, abs(cut), abs(flow))
    if abs(cut - flow) > tol:
        raise AssertionError(f"max-flow {flow!r} != min-cut capacity {cut!r}")


def solve_roof_duality(p: PseudoBooleanProblem, audit: bool = False) -> Labeling:
    """Persistent partial labeling from one min-cut of the doubled network.

    Labeled variables take their value in some global optimum. The reported
    energy is that of the labeling completed with zeros.
    """
    if p.num_vars == 0:
        return Labeling((), 0.0)
    network, source, sink, _ = _build_doubled_network(p)
    caps = None
    if audit:
        caps = {}
        for u in range(network.n):
            for v, cap, _ in network.adj[u]:
                if cap > 0.0:
                    caps[(u, v)] = caps.get((u, v), 0.0) + cap
    flow = network.max_flow(source, sink)
    if audit:
        _audit_cut(network, source, flow, caps)
    side = network.source_side(source)
    labels: list[int | None] = []
    for i in range(p.num_vars):
        a = 0 if side[2 * i] else 1
        b = 0 if side[2 * i + 1] else 1
        labels.append(a if a != b else None)
    return Labeling(tuple(labels), p.evaluate(labels, default=0))


def _adjacency(p: PseudoBooleanProblem) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(p.num_vars)]
    for i, j, *_ in p.pairwise:
        adj[i].add(j)
        adj[j].add(i)
    return adj


def _components(vars_left: list[int], adj: list[set[int]]) -> list[list[int]]:
    """Connected components among the given variables, each sorted."""
    remaining = set(vars_left)
    components = []
    for start in sorted(vars_left):
        if start not in remaining:
            continue
        comp = []
        stack = [start]
        remaining.discard(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v in remaining:
                    remaining.discard(v)
                    stack.append(v)
        components.append(sorted(comp))
    return components


def _component_subproblem(
    p: PseudoBooleanProblem, fixed: dict[int, int], comp: list[int]
) -> PseudoBooleanProblem:
    """Sub-energy over one unlabeled component, conditioned on ``fixed``.

    Valid because every neighbour of the component outside it is fixed
    (otherwise it would belong to the component); terms to fixed neighbours
    fold into the component's unary costs, fully external terms are
    constants.
    """
    index = {v: k for k, v in enumerate(comp)}
    unary = [list(p.unary[v]) for v in comp]
    pairwise = []
    for i, j, c00, c01, c10, c11 in p.pairwise:
        ii = index.get(i)
        jj = index.get(j)
        if ii is not None and jj is not None:
            pairwise.append((ii, jj, c00, c01, c10, c11))
        elif ii is not None:
            fj = fixed.get(j)
            if fj is not None:
                unary[ii][0] += c01 if fj else c00
                unary[ii][1] += c11 if fj else c10
        elif jj is not None:
            fi = fixed.get(i)
            if fi is not None:
                unary[jj][0] += c10 if fi else c00
                unary[jj][1] += c11 if fi else c01
    return PseudoBooleanProblem(len(comp), tuple((u[0], u[1]) for u in unary), tuple(pairwise))


def _fix_variable(p: PseudoBooleanProblem, var: int, value: int) -> tuple[PseudoBooleanProblem, list[int]]:
    """Condition a problem on one variable; returns (subproblem, kept vars)."""
    keep = [i for i in range(p.num_vars) if i != var]
    index = {v: k for k, v in enumerate(keep)}
    unary = [list(p.unary[i]) for i in keep]
    pairwise = []
    for i, j, c00, c01, c10, c11 in p.pairwise:
        if i == var:
            u = unary[index[j]]
            u[0] += c10 if value else c00
            u[1] += c11 if value else c01
        elif j == var:
            u = unary[index[i]]
            u[0] += c01 if value else c00
            u[1] += c11 if value else c10
        else:
            pairwise.append((index[i], index[j], c00, c01, c10, c11))
    return PseudoBooleanProblem(len(keep), tuple((u[0], u[1]) for u in unary), tuple(pairwise)), keep


def _probe(sub: PseudoBooleanProblem) -> dict[int, int]:
    """Probing rounds on a component subproblem; returns implied labels.

    Each unlabeled variable is fixed to 0 and to 1 in turn and roof duality
    re-run on both branches; a variable labeled identically in both keeps
    that label (it survives in some optimum whichever way the probed
    variable goes). Repeats until a round adds nothing, up to
    PROBING_ROUNDS.
    """
    implied: dict[int, int] = {}
    for _ in range(PROBING_ROUNDS):
        progress = False
        for i in range(sub.num_vars):
            if i in implied:
                continue
            conditioned = _component_subproblem(
                sub, implied, [v for v in range(sub.num_vars) if v not in implied]
            ) if implied else sub
            # Map component-local indices of the conditioned problem.
            free = [v for v in range(sub.num_vars) if v not in implied]
            local = free.index(i)
            branches = []
            for value in (0, 1):
                reduced, keep = _fix_variable(conditioned, local, value)
                partial = solve_roof_duality(reduced)
                branches.append(
                    {free[keep[k]]: l for k, l in enumerate(partial.labels) if l is not None}
                )
            common = {
                j: a for j, a in branches[0].items() if branches[1].get(j) == a and j not in implied
            }
            if common:
                implied.update(common)
                progress = True
        if not progress:
            break
    return implied


def _enumerate_subproblem(sub: PseudoBooleanProblem) -> list[int]:
    """Exact minimum of a small subproblem by exhaustive enumeration.

    Ties are broken toward fewer active variables, then lowest assignment
    code, so the result is deterministic.
    """
    k = sub.num_vars
    c0 = np.array([u[0] for u in sub.unary])
    c1 = np.array([u[1] for u in sub.unary])
    best: tuple[float, int, int] | None = None  # (energy, popcount, code)
    total = 1 << k
    for start in range(0, total, _ENUM_BLOCK):
        codes = np.arange(start, min(start + _ENUM_BLOCK, total), dtype=np.int64)
        bits = (codes[:, None] >> np.arange(k, dtype=np.int64)) & 1
        energies = bits @ c1 + (1 - bits) @ c0
        for i, j, t00, t01, t10, t11 in sub.pairwise:
            zi = bits[:, i]
            zj = bits[:, j]
            energies = energies + (
                t00 * (1 - zi) * (1 - zj) + t01 * (1 - zi) * zj + t10 * zi * (1 - zj) + t11 * zi * zj
            )
        pops = bits.sum(axis=1)
        order = np.lexsort((codes, pops, energies))
        top = order[0]
        cand = (float(energies[top]), int(pops[top]), int(codes[top]))
        if best is None or cand < best:
            best = cand
    code = best[2] if best is not None else 0
    return [(code >> t) & 1 for t in range(k)]


def _greedy_descent(sub: PseudoBooleanProblem) -> list[int]:
    """Deterministic single-flip descent from the all-zero labeling."""
    labels = [0] * sub.num_vars
    incident: list[list[tuple]] = [[] for _ in range(sub.num_vars)]
    for term in sub.pairwise:
        incident[term[0]].append(term)
        incident[term[1]].append(term)

    def flip_delta(var: int) -> float:
        new = 1 - labels[var]
        delta = sub.unary[var][new] - sub.unary[var][labels[var]]
        for i, j, c00, c01, c10, c11 in incident[var]:
            table = ((c00, c01), (c10, c11))
            if i == var:
                delta += table[new][labels[j]] - table[labels[var]][labels[j]]
            else:
                delta += table[labels[i]][new] - table[labels[i]][labels[var]]
        return delta

    # Energy strictly decreases at every flip, so no state repeats and the
    # loop terminates; the cap is a safety net.
    for _ in range(1 << 14):
        best_var = None
        best_delta = 0.0
        for var in range(sub.num_vars):
            d = flip_delta(var)
            if d < best_delta:
                best_delta = d
                best_var = var
        if best_var is None:
            break
        labels[best_var] = 1 - labels[best_var]
    return labels


def solve_complete(p: PseudoBooleanProblem, audit: bool = False) -> Labeling:
    """Total labeling: roof duality, then probing, then exact or greedy
    resolution of what remains.

    Residual components small enough to enumerate are solved exactly
    (probing would be redundant there and is skipped); larger ones are
    probed and whatever is still open afterwards is enumerated if it now
    fits or finished by greedy single-flip descent from all-zero. The
    returned energy never exceeds the all-zero labeling's.
    """
    base = solve_roof_duality(p, audit=audit)
    fixed = {i: l for i, l in enumerate(base.labels) if l is not None}
    unlabeled = [i for i in range(p.num_vars) if i not in fixed]
    if unlabeled:
        adj = _adjacency(p)
        for comp in _components(unlabeled, adj):
            if len(comp) > ENUMERATION_LIMIT:
                sub = _component_subproblem(p, fixed, comp)
                implied = _probe(sub)
                fixed.update({comp[k]: v for k, v in implied.items()})
            residue = [c for c in comp if c not in fixed]
            for sub_comp in _components(residue, adj):
                sub = _component_subproblem(p, fixed, sub_comp)
                if len(sub_comp) <= ENUMERATION_LIMIT:
                    local = _enumerate_subproblem(sub)
                else:
                    local = _greedy_descent(sub)
                fixed.update({sub_comp[k]: v for k, v in enumerate(local)})
    labels = tuple(fixed[i] for i in range(p.num_vars))
    return Labeling(labels, p.evaluate(labels))


def dump_flow_network(p: PseudoBooleanProblem) -> str:
    """Plain-text edge list of the roof-duality network, for inspection.

    One line per arc: ``<from> <to> <capacity>``, with literal nodes named
    ``x<i>``/``~x<i>`` and the terminals ``s``/``t``.
    """
    network, source, sink, _ = _build_doubled_network(p)

    def name(node: int) -> str:
        if node == source:
            return "s"
        if node == sink:
            return "t"
        return ("x" if node % 2 == 0 else "~x") + str(node // 2)

    lines = []
    for u in range(network.n):
        for v, cap, _ in network.adj[u]:
            if cap > 0.0:
                lines.append(f"{name(u)} {name(v)} {cap!r}")
    return "\n".join(lines)
