"""Minimal path covers of connected multigraphs.

A connected multigraph with ``2k`` odd-degree nodes splits into exactly ``k``
edge-disjoint trails that jointly use every edge once (``k = 1`` closed trail
for an Eulerian graph).  That count is optimal: removing one trail fixes the
parity of at most two nodes, so fewer than ``k`` trails cannot exist.

The decomposition here strips trails between odd nodes of the shrinking
residual graph, walking with Fleury's rule (never cross a residual bridge
while a non-bridge alternative exists).  Any leftover all-even component is a
closed circuit; it is spliced into an already-extracted trail that visits one
of its nodes, which keeps the trail count at exactly ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GraphError",
    "MultiGraph",
    "Path",
    "PathDecomposition",
    "odd_nodes",
    "is_bridge",
    "fleury_euler_path",
    "decompose_into_paths",
]


class GraphError(ValueError):
    """Invalid graph input or violated precondition."""


@dataclass(frozen=True)
class MultiGraph:
    """Connected undirected multigraph without self-loops.

    Edges are ``(edge_id, node_a, node_b)`` triples; parallel edges are
    distinct entries with distinct ids.
    """

    nodes: frozenset[str]
    edges: tuple[tuple[str, str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        ids = [e[0] for e in self.edges]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate edge ids")
        for eid, a, b in self.edges:
            if a == b:
                raise GraphError(f"self-loop edge {eid!r}")
            if a not in self.nodes or b not in self.nodes:
                raise GraphError(f"edge {eid!r} references unknown node")
        if not self.nodes:
            raise GraphError("empty graph")
        if not _connected(self._adjacency(), self.nodes):
            raise GraphError("disconnected input")

    def _adjacency(self) -> dict[str, dict[str, str]]:
        """node -> {edge_id: other endpoint}, nodes in sorted order."""
        adj: dict[str, dict[str, str]] = {n: {} for n in sorted(self.nodes)}
        for eid, a, b in self.edges:
            adj[a][eid] = b
            adj[b][eid] = a
        return adj

    def degree(self, node: str) -> int:
        return sum(1 for _, a, b in self.edges for n in (a, b) if n == node)

    def adjacency_matrix(self) -> tuple[list[str], np.ndarray]:
        """Node order and the symmetric edge-multiplicity count matrix.

        Entry ``[i, j]`` counts the parallel edges between nodes ``i`` and
        ``j``; row sums equal node degrees even in the multigraph case.
        """
        order = sorted(self.nodes)
        idx = {n: i for i, n in enumerate(order)}
        mat = np.zeros((len(order), len(order)), dtype=int)
        for _, a, b in self.edges:
            mat[idx[a], idx[b]] += 1
            mat[idx[b], idx[a]] += 1
        return order, mat


@dataclass(frozen=True)
class Path:
    """Alternating node/edge trail: ``nodes[i] -edges[i]- nodes[i+1]``."""

    nodes: tuple[str, ...]
    edges: tuple[str, ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.edges) + 1 or not self.nodes:
            raise GraphError("path must alternate node, edge, ..., node")
        if len(set(self.edges)) != len(self.edges):
            raise GraphError("path repeats an edge")

    @property
    def start(self) -> str:
        return self.nodes[0]

    @property
    def end(self) -> str:
        return self.nodes[-1]

    @property
    def closed(self) -> bool:
        return len(self.edges) > 0 and self.start == self.end

    def is_valid_in(self, g: MultiGraph) -> bool:
        """Every consecutive (node, edge, node) triple is incident in g."""
        ends = {eid: frozenset((a, b)) for eid, a, b in g.edges}
        for i, eid in enumerate(self.edges):
            if eid not in ends or ends[eid] != frozenset((self.nodes[i], self.nodes[i + 1])):
                return False
        return True


@dataclass(frozen=True)
class PathDecomposition:
    """Edge-disjoint trails covering every edge of ``graph`` exactly once."""

    paths: tuple[Path, ...]
    graph: MultiGraph

    def __post_init__(self):
        covered = [eid for p in self.paths for eid in p.edges]
        if sorted(covered) != sorted(e[0] for e in self.graph.edges):
            raise GraphError("paths do not cover the edge set exactly once")

    @property
    def k(self) -> int:
        return len(self.paths)

    def dump(self) -> str:
        """One path per line as a node sequence (debug/CLI format)."""
        return "\n".join(" ".join(p.nodes) for p in self.paths)


def _connected(adj: dict[str, dict[str, str]], nodes) -> bool:
    if not nodes:
        return True
    start = next(iter(sorted(nodes)))
    seen = {start}
    stack = [start]
    while stack:
        for other in adj[stack.pop()].values():
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return seen >= set(nodes)


def odd_nodes(g: MultiGraph) -> list[str]:
    """Sorted list of odd-degree nodes; always an even-sized set."""
    deg: dict[str, int] = {n: 0 for n in g.nodes}
    for _, a, b in g.edges:
        deg[a] += 1
        deg[b] += 1
    return sorted(n for n, d in deg.items() if d % 2 == 1)


def is_bridge(g: MultiGraph, edge_id: str) -> bool:
    """True iff deleting the edge disconnects the graph."""
    for eid, a, b in g.edges:
        if eid == edge_id:
            adj = g._adjacency()
            del adj[a][eid]
            del adj[b][eid]
            return not _reachable(adj, a, b)
    raise GraphError(f"unknown edge id {edge_id!r}")


def _reachable(adj: dict[str, dict[str, str]], src: str, dst: str) -> bool:
    if src == dst:
        return True
    seen = {src}
    stack = [src]
    while stack:
        for other in adj[stack.pop()].values():
            if other == dst:
                return True
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return False


def _residual_odd(adj: dict[str, dict[str, str]]) -> list[str]:
    return sorted(n for n, inc in adj.items() if len(inc) % 2 == 1)


def _walk(adj: dict[str, dict[str, str]], start: str, rng: np.random.Generator) -> Path:
    """Fleury walk from ``start`` until stuck, deleting traversed edges.

    Prefers non-bridge edges of the residual; ties are broken with ``rng``
    over edge ids in sorted order, so the walk is reproducible per seed.
    """
    nodes = [start]
    edges: list[str] = []
    cur = start
    while adj[cur]:
        options = sorted(adj[cur].items())
        if len(options) > 1:
            keep = []
            for eid, other in options:
                del adj[cur][eid]
                del adj[other][eid]
                ok = _reachable(adj, cur, other)
                adj[cur][eid] = other
                adj[other][eid] = cur
                if ok:
                    keep.append((eid, other))
            if keep:
                options = keep
        eid, other = options[int(rng.integers(len(options)))]
        del adj[cur][eid]
        del adj[other][eid]
        edges.append(eid)
        nodes.append(other)
        cur = other
    return Path(tuple(nodes), tuple(edges))


def fleury_euler_path(g: MultiGraph, start: str, seed: int = 0) -> Path:
    """Euler trail from ``start`` covering every edge exactly once.

    Requires an Eulerian graph (any start) or a semi-Eulerian graph with
    ``start`` one of its two odd nodes.
    """
    if start not in g.nodes:
        raise GraphError(f"unknown start node {start!r}")
    odd = odd_nodes(g)
    if len(odd) not in (0, 2):
        raise GraphError(f"graph has {len(odd)} odd nodes; Euler trail needs 0 or 2")
    if odd and start not in odd:
        raise GraphError(f"start node {start!r} must be odd (odd nodes: {odd})")
    path = _walk(g._adjacency(), start, np.random.default_rng(seed))
    if len(path.edges) != len(g.edges):
        raise AssertionError("Fleury walk failed to cover the graph")
    return path


def _components(adj: dict[str, dict[str, str]]) -> list[set[str]]:
    """Connected components of the residual, ignoring isolated bare nodes."""
    seen: set[str] = set()
    comps = []
    for n in sorted(adj):
        if n in seen or not adj[n]:
            continue
        comp = {n}
        stack = [n]
        seen.add(n)
        while stack:
            for other in adj[stack.pop()].values():
                if other not in seen:
                    seen.add(other)
                    comp.add(other)
                    stack.append(other)
        comps.append(comp)
    return comps


def _splice(host: Path, circuit: Path) -> Path | None:
    """Insert a closed trail into a host trail at a shared node."""
    for i, n in enumerate(host.nodes):
        if n in circuit.nodes:
            j = circuit.nodes.index(n)
            # rotate the circuit so it starts and ends at n
            rot_nodes = circuit.nodes[j:-1] + circuit.nodes[: j + 1]
            rot_edges = circuit.edges[j:] + circuit.edges[:j]
            return Path(
                host.nodes[: i + 1] + rot_nodes[1:] + host.nodes[i + 1 :],
                host.edges[:i] + rot_edges + host.edges[i:],
            )
    return None


def decompose_into_paths(g: MultiGraph, seed: int = 0) -> PathDecomposition:
    """Split the graph into ``max(1, odd_count/2)`` edge-disjoint trails.

    Repeatedly picks a random odd node of an edge-bearing residual component
    and strips a Fleury walk (which necessarily ends at another odd node);
    an all-even component yields one closed circuit instead.  Circuits other
    than a whole-graph Euler circuit are spliced into an existing trail
    through a shared node, preserving the optimal count.
    """
    rng = np.random.default_rng(seed)
    adj = g._adjacency()
    target = max(1, len(odd_nodes(g)) // 2)
    open_paths: list[Path] = []
    circuits: list[Path] = []
    while True:
        comps = _components(adj)
        if not comps:
            break
        for comp in comps:
            odd = [n for n in _residual_odd(adj) if n in comp]
            if odd:
                start = odd[int(rng.integers(len(odd)))]
                open_paths.append(_walk(adj, start, rng))
            else:
                start = sorted(comp)[int(rng.integers(len(comp)))]
                circuits.append(_walk(adj, start, rng))
            break  # residual changed; recompute components

    paths = list(open_paths)
    for circuit in circuits:
        for i, host in enumerate(paths):
            merged = _splice(host, circuit)
            if merged is not None:
                paths[i] = merged
                break
        else:
            paths.append(circuit)  # whole-graph Euler circuit case
    if len(paths) != target:
        raise AssertionError(
            f"decomposition produced {len(paths)} paths, expected {target}"
        )
    return PathDecomposition(tuple(paths), g)
