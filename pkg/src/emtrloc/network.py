"""Branched power-line network model.

A network is an undirected connected graph whose edges are uniform
transmission-line segments (per-unit-length R, L, C and a length) and whose
nodes may carry lumped attachments: resistive terminations, one AC source
behind a series resistance, and the observation point where transients are
recorded.

Positions on the network are expressed either as an :class:`EdgePosition`
(edge id + metric offset from the edge's first endpoint) or as a single
coordinate along a search path produced by
:mod:`emtrloc.graphs`; :func:`path_to_edge_position` converts between the two.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from typing import Iterable

from .graphs import MultiGraph, Path

__all__ = [
    "NetworkError",
    "ConfigError",
    "LineParams",
    "Edge",
    "Termination",
    "SourceSpec",
    "EdgePosition",
    "NetworkTopology",
    "characteristic_impedance",
    "propagation_speed",
    "parse_network",
    "serialize_network",
    "parse_network_file",
    "as_multigraph",
    "path_length",
    "path_to_edge_position",
    "edge_position_to_path_coordinate",
    "network_distance",
    "travel_time",
    "max_travel_time",
]


class NetworkError(ValueError):
    """Invalid network structure or parameters."""


class ConfigError(NetworkError):
    """Malformed network config text. Carries line/column of the offence."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class LineParams:
    """Per-unit-length electrical parameters of a line segment."""

    inductance_per_m: float  # H/m
    capacitance_per_m: float  # F/m
    resistance_per_m: float = 0.0  # ohm/m

    def __post_init__(self):
        if not self.inductance_per_m > 0:
            raise NetworkError("inductance_per_m must be > 0")
        if not self.capacitance_per_m > 0:
            raise NetworkError("capacitance_per_m must be > 0")
        if self.resistance_per_m < 0:
            raise NetworkError("resistance_per_m must be >= 0")


def characteristic_impedance(params: LineParams) -> float:
    """Surge impedance sqrt(L/C) of a lossless line with these parameters."""
    return math.sqrt(params.inductance_per_m / params.capacitance_per_m)


def propagation_speed(params: LineParams) -> float:
    """Travelling-wave speed 1/sqrt(L*C)."""
    return 1.0 / math.sqrt(params.inductance_per_m * params.capacitance_per_m)


@dataclass(frozen=True)
class Edge:
    """A uniform line segment between two distinct nodes."""

    edge_id: str
    endpoints: tuple[str, str]
    length: float  # m
    params: LineParams

    def __post_init__(self):
        if not self.length > 0:
            raise NetworkError(f"edge {self.edge_id}: length must be > 0")
        if self.endpoints[0] == self.endpoints[1]:
            raise NetworkError(f"edge {self.edge_id}: self-loop edges are not allowed")


@dataclass(frozen=True)
class Termination:
    """Purely resistive shunt from a node to ground."""

    node: str
    impedance: float  # ohm

    def __post_init__(self):
        if not self.impedance > 0:
            raise NetworkError(f"termination at {self.node}: impedance must be > 0")


@dataclass(frozen=True)
class SourceSpec:
    """Sinusoidal voltage source behind a series resistance, shunted at a node.

    The series resistance doubles as the node's terminating impedance: a
    power transformer is modelled as its no-load EMF behind its equivalent
    (large) impedance, so a leaf node carrying the source needs no separate
    termination entry.
    """

    node: str
    amplitude: float  # V, peak
    frequency: float  # Hz
    series_impedance: float  # ohm

    def __post_init__(self):
        if self.amplitude < 0:
            raise NetworkError("source amplitude must be >= 0")
        if not self.frequency > 0:
            raise NetworkError("source frequency must be > 0")
        if not self.series_impedance > 0:
            raise NetworkError("source series impedance must be > 0")


@dataclass(frozen=True)
class EdgePosition:
    """A point on the network: metric offset from the edge's first endpoint."""

    edge: str
    offset: float  # m


@dataclass(frozen=True)
class NetworkTopology:
    """Validated, immutable description of a branched line network."""

    nodes: frozenset[str]
    edges: tuple[Edge, ...]
    terminations: tuple[Termination, ...]
    source: SourceSpec
    observation_node: str

    def __post_init__(self):
        if not self.edges:
            raise NetworkError("disconnected graph: network has no edges")
        for e in self.edges:
            for n in e.endpoints:
                if n not in self.nodes:
                    raise NetworkError(f"edge {e.edge_id}: unknown node reference {n!r}")
        ids = [e.edge_id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate edge ids")
        # connectivity over the full node set
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            a, b = e.endpoints
            adj[a].append(b)
            adj[b].append(a)
        seen = {next(iter(sorted(self.nodes)))}
        stack = list(seen)
        while stack:
            for m in adj[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        if seen != self.nodes:
            raise NetworkError("disconnected graph")
        term_nodes = [t.node for t in self.terminations]
        if len(set(term_nodes)) != len(term_nodes):
            raise NetworkError("multiple terminations at one node")
        for t in self.terminations:
            if t.node not in self.nodes:
                raise NetworkError(f"termination at unknown node {t.node!r}")
        if self.source.node not in self.nodes:
            raise NetworkError(f"source at unknown node {self.source.node!r}")
        if self.observation_node not in self.nodes:
            raise NetworkError(f"observation at unknown node {self.observation_node!r}")
        lumped = set(term_nodes) | {self.source.node}
        for n in sorted(self.nodes):
            if len(adj[n]) == 1 and n not in lumped:
                raise NetworkError(f"degree-1 node {n!r} without termination")

    def degree(self, node: str) -> int:
        return sum(1 for e in self.edges for n in e.endpoints if n == node)

    def edge_by_id(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.edge_id == edge_id:
                return e
        raise NetworkError(f"unknown edge id {edge_id!r}")

    def termination_at(self, node: str) -> Termination | None:
        for t in self.terminations:
            if t.node == node:
                return t
        return None


def as_multigraph(net: NetworkTopology) -> MultiGraph:
    """Abstract the network into the bare connected multigraph of its lines."""
    return MultiGraph(
        nodes=net.nodes,
        edges=tuple((e.edge_id, e.endpoints[0], e.endpoints[1]) for e in net.edges),
    )


# ---------------------------------------------------------------------------
# Path coordinates
# ---------------------------------------------------------------------------

def path_length(net: NetworkTopology, path: Path) -> float:
    """Total metric length of a search path."""
    return sum(net.edge_by_id(eid).length for eid in path.edges)


def path_to_edge_position(net: NetworkTopology, path: Path, s: float) -> EdgePosition:
    """Map a coordinate ``s`` along ``path`` onto the physical network.

    Each edge of the path owns the half-open interval
    ``[cumulative_start, cumulative_end)`` of path coordinates, except the
    last edge which also owns its right endpoint.  The returned offset is
    measured from the edge's stored first endpoint, so an edge traversed
    against its stored orientation gets ``length - along``.
    """
    total = path_length(net, path)
    if not (0.0 <= s <= total + 1e-9):
        raise NetworkError(f"path coordinate {s} out of range [0, {total}]")
    s = min(s, total)
    cum = 0.0
    for i, eid in enumerate(path.edges):
        edge = net.edge_by_id(eid)
        last = i == len(path.edges) - 1
        if s < cum + edge.length or last:
            along = min(s - cum, edge.length)
            if path.nodes[i] == edge.endpoints[0]:
                return EdgePosition(eid, along)
            return EdgePosition(eid, edge.length - along)
        cum += edge.length
    raise AssertionError("unreachable")


def edge_position_to_path_coordinate(
    net: NetworkTopology, path: Path, pos: EdgePosition
) -> float:
    """Inverse of :func:`path_to_edge_position` for positions on the path."""
    edge = net.edge_by_id(pos.edge)
    if not (0.0 <= pos.offset <= edge.length):
        raise NetworkError(f"offset {pos.offset} outside edge {pos.edge}")
    cum = 0.0
    for i, eid in enumerate(path.edges):
        e = net.edge_by_id(eid)
        if eid == pos.edge:
            if path.nodes[i] == e.endpoints[0]:
                return cum + pos.offset
            return cum + e.length - pos.offset
        cum += e.length
    raise NetworkError(f"edge {pos.edge} is not on the given path")


# ---------------------------------------------------------------------------
# Metric and travel-time distances
# ---------------------------------------------------------------------------

def _node_dijkstra(net: NetworkTopology, start: str, weight: str) -> dict[str, float]:
    adj: dict[str, list[tuple[str, float]]] = {n: [] for n in net.nodes}
    for e in net.edges:
        w = e.length if weight == "length" else e.length / propagation_speed(e.params)
        a, b = e.endpoints
        adj[a].append((b, w))
        adj[b].append((a, w))
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, n = heapq.heappop(heap)
        if d > dist.get(n, math.inf):
            continue
        for m, w in adj[n]:
            nd = d + w
            if nd < dist.get(m, math.inf):
                dist[m] = nd
                heapq.heappush(heap, (nd, m))
    return dist


def _position_to_node_metric(
    net: NetworkTopology, pos: EdgePosition, node: str, weight: str
) -> float:
    edge = net.edge_by_id(pos.edge)
    a, b = edge.endpoints
    if weight == "length":
        wa, wb = pos.offset, edge.length - pos.offset
    else:
        c = propagation_speed(edge.params)
        wa, wb = pos.offset / c, (edge.length - pos.offset) / c
    da = _node_dijkstra(net, a, weight)
    db = _node_dijkstra(net, b, weight)
    return min(wa + da.get(node, math.inf), wb + db.get(node, math.inf))


def network_distance(net: NetworkTopology, a: EdgePosition, b: EdgePosition) -> float:
    """Shortest along-the-lines distance in metres between two positions."""
    if a.edge == b.edge:
        direct = abs(a.offset - b.offset)
    else:
        direct = math.inf
    ea = net.edge_by_id(a.edge)
    best = direct
    for end, off in ((ea.endpoints[0], a.offset), (ea.endpoints[1], ea.length - a.offset)):
        best = min(best, off + _position_to_node_metric(net, b, end, "length"))
    return best


def travel_time(net: NetworkTopology, pos: EdgePosition, node: str) -> float:
    """One-way wave travel time in seconds from a position to a node."""
    return _position_to_node_metric(net, pos, node, "time")


def max_travel_time(net: NetworkTopology) -> float:
    """Largest one-way travel time between any two nodes of the network."""
    best = 0.0
    for n in sorted(net.nodes):
        dist = _node_dijkstra(net, n, "time")
        best = max(best, max(dist.values()))
    return best


# ---------------------------------------------------------------------------
# Config text format
# ---------------------------------------------------------------------------

_LENGTH_RE = re.compile(r"^([0-9.eE+-]+)(km|m)?$")


def _parse_length(text: str, line_no: int, col: int) -> float:
    m = _LENGTH_RE.match(text)
    if not m:
        raise ConfigError(f"bad length {text!r} (expected e.g. 2.0km or 2000m)", line_no, col)
    try:
        val = float(m.group(1))
    except ValueError:
        raise ConfigError(f"bad length value {text!r}", line_no, col) from None
    return val * 1000.0 if m.group(2) == "km" else val


def _parse_float(text: str, what: str, line_no: int, col: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad {what} value {text!r}", line_no, col) from None


def _kv(tokens: list[str], keys: tuple[str, ...], line_no: int, line: str) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for tok in tokens:
        col = line.find(tok) + 1
        if "=" not in tok:
            raise ConfigError(f"expected key=value, got {tok!r}", line_no, col)
        key, val = tok.split("=", 1)
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} (expected one of {', '.join(keys)})", line_no, col)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", line_no, col)
        out[key] = (val, col)
    missing = [k for k in keys if k not in out]
    if missing:
        raise ConfigError(f"missing {', '.join(missing)}", line_no, 1)
    return out


def parse_network(config_text: str) -> NetworkTopology:
    """Parse the section-per-entity network config format.

    Directives, one per line (``#`` starts a comment)::

        node <id>
        params <name> L=<H/m> C=<F/m> R=<ohm/m>
        edge <id> <nodeA> <nodeB> length=<val>[m|km] params=<name>
        termination <node> R=<ohm>
        source <node> amplitude=<V> frequency=<Hz> series_R=<ohm>
        observe <node>
    """
    nodes: list[str] = []
    params: dict[str, LineParams] = {}
    edges: list[Edge] = []
    terminations: list[Termination] = []
    source: SourceSpec | None = None
    observe: str | None = None

    for line_no, raw in enumerate(config_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "node":
                if len(tokens) != 2:
                    raise ConfigError("usage: node <id>", line_no, 1)
                if tokens[1] in nodes:
                    raise ConfigError(f"duplicate node {tokens[1]!r}", line_no, line.find(tokens[1]) + 1)
                nodes.append(tokens[1])
            elif kind == "params":
                if len(tokens) != 5:
                    raise ConfigError("usage: params <name> L=<H/m> C=<F/m> R=<ohm/m>", line_no, 1)
                name = tokens[1]
                if name in params:
                    raise ConfigError(f"duplicate params set {name!r}", line_no, line.find(name) + 1)
                kv = _kv(tokens[2:], ("L", "C", "R"), line_no, line)
                params[name] = LineParams(
                    inductance_per_m=_parse_float(kv["L"][0], "L", line_no, kv["L"][1]),
                    capacitance_per_m=_parse_float(kv["C"][0], "C", line_no, kv["C"][1]),
                    resistance_per_m=_parse_float(kv["R"][0], "R", line_no, kv["R"][1]),
                )
            elif kind == "edge":
                if len(tokens) != 6:
                    raise ConfigError(
                        "usage: edge <id> <nodeA> <nodeB> length=<val> params=<name>", line_no, 1
                    )
                eid, a, b = tokens[1], tokens[2], tokens[3]
                kv = _kv(tokens[4:], ("length", "params"), line_no, line)
                for n in (a, b):
                    if n not in nodes:
                        raise ConfigError(f"unknown node reference {n!r}", line_no, line.find(n) + 1)
                if a == b:
                    raise ConfigError(f"self-loop edge {eid!r} at node {a!r}", line_no, line.find(b) + 1)
                pname, pcol = kv["params"]
                if pname not in params:
                    raise ConfigError(f"unknown params set {pname!r}", line_no, pcol)
                if any(e.edge_id == eid for e in edges):
                    raise ConfigError(f"duplicate edge id {eid!r}", line_no, line.find(eid) + 1)
                edges.append(
                    Edge(eid, (a, b), _parse_length(kv["length"][0], line_no, kv["length"][1]), params[pname])
                )
            elif kind == "termination":
                if len(tokens) != 3:
                    raise ConfigError("usage: termination <node> R=<ohm>", line_no, 1)
                node = tokens[1]
                if node not in nodes:
                    raise ConfigError(f"unknown node reference {node!r}", line_no, line.find(node) + 1)
                kv = _kv(tokens[2:], ("R",), line_no, line)
                terminations.append(Termination(node, _parse_float(kv["R"][0], "R", line_no, kv["R"][1])))
            elif kind == "source":
                if len(tokens) != 5:
                    raise ConfigError(
                        "usage: source <node> amplitude=<V> frequency=<Hz> series_R=<ohm>", line_no, 1
                    )
                if source is not None:
                    raise ConfigError("multiple source lines", line_no, 1)
                node = tokens[1]
                if node not in nodes:
                    raise ConfigError(f"unknown node reference {node!r}", line_no, line.find(node) + 1)
                kv = _kv(tokens[2:], ("amplitude", "frequency", "series_R"), line_no, line)
                source = SourceSpec(
                    node,
                    _parse_float(kv["amplitude"][0], "amplitude", line_no, kv["amplitude"][1]),
                    _parse_float(kv["frequency"][0], "frequency", line_no, kv["frequency"][1]),
                    _parse_float(kv["series_R"][0], "series_R", line_no, kv["series_R"][1]),
                )
            elif kind == "observe":
                if len(tokens) != 2:
                    raise ConfigError("usage: observe <node>", line_no, 1)
                if observe is not None:
                    raise ConfigError("multiple observe lines", line_no, 1)
                if tokens[1] not in nodes:
                    raise ConfigError(f"unknown node reference {tokens[1]!r}", line_no, line.find(tokens[1]) + 1)
                observe = tokens[1]
            else:
                raise ConfigError(f"unknown directive {kind!r}", line_no, 1)
        except NetworkError as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(str(err), line_no, 1) from None

    if source is None:
        raise ConfigError("missing source line", max(1, config_text.count("\n") + 1), 1)
    if observe is None:
        raise ConfigError("missing observe line", max(1, config_text.count("\n") + 1), 1)
    return NetworkTopology(
        nodes=frozenset(nodes),
        edges=tuple(edges),
        terminations=tuple(terminations),
        source=source,
        observation_node=observe,
    )


def parse_network_file(path) -> NetworkTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read())


def serialize_network(net: NetworkTopology) -> str:
    """Emit config text that :func:`parse_network` maps back to ``net``."""
    param_names: dict[LineParams, str] = {}
    for e in net.edges:
        if e.params not in param_names:
            param_names[e.params] = f"p{len(param_names) + 1}"
    lines = []
    for p, name in param_names.items():
        lines.append(
            f"params {name} L={p.inductance_per_m!r} C={p.capacitance_per_m!r} R={p.resistance_per_m!r}"
        )
    for n in sorted(net.nodes):
        lines.append(f"node {n}")
    for e in net.edges:
        lines.append(
            f"edge {e.edge_id} {e.endpoints[0]} {e.endpoints[1]} "
            f"length={e.length!r}m params={param_names[e.params]}"
        )
    for t in net.terminations:
        lines.append(f"termination {t.node} R={t.impedance!r}")
    s = net.source
    lines.append(
        f"source {s.node} amplitude={s.amplitude!r} frequency={s.frequency!r} series_R={s.series_impedance!r}"
    )
    lines.append(f"observe {net.observation_node}")
    return "\n".join(lines) + "\n"
