"""Join graphs: one node per query alias, one edge per joined alias pair.

Cyclic graphs are made acyclic by *folding*: two adjacent nodes are replaced
by their materialized equi-join, and edges are re-homed onto the fold
(parallel edges merge into one conjunctive edge). Folds remember which base
aliases they contain, so a reduced fold can later be split back into
per-alias tuple sets by projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import EngineError, GraphError
from .values import Value, compare

FOLD_SEPARATOR = "⋈"  # the join symbol, used in fold node names


@dataclass(frozen=True)
class AttrRef:
    """A resolved reference to one attribute of one query alias."""

    alias: str
    attr: str
    vtype: str

    def __str__(self) -> str:
        return f"{self.alias}.{self.attr}"


@dataclass(frozen=True)
class JoinPredicate:
    """Equality between attributes of two distinct aliases."""

    left: AttrRef
    right: AttrRef

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class FilterPredicate:
    """Comparison between one attribute and one literal."""

    ref: AttrRef
    op: str
    value: Value

    def __str__(self) -> str:
        if isinstance(self.value, str):
            literal = "'" + self.value.replace("'", "''") + "'"
        else:
            literal = repr(self.value)
        return f"{self.ref} {self.op} {literal}"


@dataclass(frozen=True)
class GraphNode:
    """Either a base alias or a fold of several (aliases carries provenance)."""

    aliases: tuple[str, ...]
    columns: tuple[AttrRef, ...]
    rows: frozenset[tuple]
    filters: tuple[FilterPredicate, ...] = ()

    @property
    def name(self) -> str:
        return FOLD_SEPARATOR.join(self.aliases)

    @property
    def is_fold(self) -> bool:
        return len(self.aliases) > 1

    def column_index(self, alias: str, attr: str) -> int:
        for i, col in enumerate(self.columns):
            if col.alias == alias and col.attr == attr:
                return i
        raise EngineError(f"node {self.name!r} has no column {alias}.{attr}")

    def alias_columns(self, alias: str) -> list[int]:
        return [i for i, col in enumerate(self.columns) if col.alias == alias]


@dataclass(frozen=True)
class GraphEdge:
    a: str
    b: str
    conjuncts: tuple[JoinPredicate, ...]

    def touches(self, node_name: str) -> bool:
        return node_name in (self.a, self.b)

    def other(self, node_name: str) -> str:
        return self.b if node_name == self.a else self.a


@dataclass
class JoinGraph:
    nodes: dict[str, GraphNode]  # insertion order: FROM order, folds in place
    edges: list[GraphEdge]
    alias_order: tuple[str, ...]

    def __post_init__(self):
        for edge in self.edges:
            if edge.a not in self.nodes or edge.b not in self.nodes:
                raise EngineError(f"edge {edge.a!r} -- {edge.b!r} references a missing node")
            if edge.a == edge.b:
                raise EngineError(f"self-loop edge on node {edge.a!r}")

    def node_for_alias(self, alias: str) -> GraphNode:
        for node in self.nodes.values():
            if alias in node.aliases:
                return node
        raise EngineError(f"no node contains alias {alias!r}")

    def degree(self, name: str) -> int:
        return sum(1 for e in self.edges if e.touches(name))

    def neighbors(self, name: str) -> list[str]:
        return [e.other(name) for e in self.edges if e.touches(name)]


def is_connected(g: JoinGraph) -> bool:
    if not g.nodes:
        return False
    start = next(iter(g.nodes))
    seen = {start}
    frontier = [start]
    while frontier:
        current = frontier.pop()
        for neighbor in g.neighbors(current):
            if neighbor not in seen:
                seen.add(neighbor)
                frontier.append(neighbor)
    return len(seen) == len(g.nodes)


def is_cyclic(g: JoinGraph) -> bool:
    """For a connected graph, cyclic iff there are at least as many edges as nodes."""
    return len(g.edges) >= len(g.nodes)


def join_rows(
    left_rows: Iterable[tuple],
    right_rows: Iterable[tuple],
    on: Sequence[tuple[int, int]],
) -> frozenset[tuple]:
    """Equi-join two row sets, concatenating left + right columns.

    Builds a hash table on the smaller input. Rows with a null in any join
    column never match.
    """
    left_rows = list(left_rows)
    right_rows = list(right_rows)
    build_left = len(left_rows) <= len(right_rows)
    build, probe = (left_rows, right_rows) if build_left else (right_rows, left_rows)
    build_idx = [l for l, _ in on] if build_left else [r for _, r in on]
    probe_idx = [r for _, r in on] if build_left else [l for l, _ in on]

    table: dict[tuple, list[tuple]] = {}
    for row in build:
        key = tuple(row[i] for i in build_idx)
        if any(v is None for v in key):
            continue
        table.setdefault(key, []).append(row)

    out = set()
    for row in probe:
        key = tuple(row[i] for i in probe_idx)
        if any(v is None for v in key):
            continue
        for match in table.get(key, ()):
            if build_left:
                out.add(match + row)
            else:
                out.add(row + match)
    return frozenset(out)


def semi_join_rows(
    left_rows: Iterable[tuple],
    right_rows: Iterable[tuple],
    on: Sequence[tuple[int, int]],
) -> frozenset[tuple]:
    """left semi-join right: the left rows with at least one join partner."""
    right_keys = set()
    for row in right_rows:
        key = tuple(row[i] for _, i in on)
        if not any(v is None for v in key):
            right_keys.add(key)
    out = set()
    for row in left_rows:
        key = tuple(row[i] for i, _ in on)
        if any(v is None for v in key):
            continue
        if key in right_keys:
            out.add(row)
    return frozenset(out)


def conjunct_index_pairs(
    target: GraphNode, source: GraphNode, conjuncts: Sequence[JoinPredicate]
) -> list[tuple[int, int]]:
    """Resolve edge conjuncts to (target column, source column) index pairs."""
    pairs = []
    for conj in conjuncts:
        if conj.left.alias in target.aliases and conj.right.alias in source.aliases:
            t_ref, s_ref = conj.left, conj.right
        elif conj.right.alias in target.aliases and conj.left.alias in source.aliases:
            t_ref, s_ref = conj.right, conj.left
        else:
            raise EngineError(
                f"conjunct {conj} does not connect nodes {target.name!r} and {source.name!r}"
            )
        pairs.append(
            (target.column_index(t_ref.alias, t_ref.attr), source.column_index(s_ref.alias, s_ref.attr))
        )
    return pairs


def apply_filters(g: JoinGraph) -> JoinGraph:
    """Push every node's filter predicates into its tuple set (selection pushdown)."""
    nodes = {}
    for name, node in g.nodes.items():
        if node.filters:
            col_idx = {(f.ref.alias, f.ref.attr): node.column_index(f.ref.alias, f.ref.attr) for f in node.filters}
            rows = frozenset(
                row
                for row in node.rows
                if all(compare(f.op, row[col_idx[(f.ref.alias, f.ref.attr)]], f.value) for f in node.filters)
            )
            nodes[name] = replace(node, rows=rows, filters=())
        else:
            nodes[name] = node
    return JoinGraph(nodes, list(g.edges), g.alias_order)


def _fold_sort_key(g: JoinGraph, edge: GraphEdge):
    a, b = g.nodes[edge.a], g.nodes[edge.b]
    return (len(a.rows) * len(b.rows), tuple(sorted(a.aliases + b.aliases)))


def _fold_edge(g: JoinGraph, edge: GraphEdge) -> JoinGraph:
    a, b = g.nodes[edge.a], g.nodes[edge.b]
    on = conjunct_index_pairs(a, b, edge.conjuncts)
    joined = join_rows(a.rows, b.rows, on)
    aliases = tuple(sorted(a.aliases + b.aliases, key=g.alias_order.index))
    fold = GraphNode(aliases=aliases, columns=a.columns + b.columns, rows=joined)

    nodes: dict[str, GraphNode] = {}
    inserted = False
    for name, node in g.nodes.items():
        if name in (edge.a, edge.b):
            if not inserted:
                nodes[fold.name] = fold
                inserted = True
        else:
            nodes[name] = node

    # Re-home remaining edges onto the fold and merge parallel edges into
    # one conjunction, preserving the original edge order.
    merged: dict[tuple[str, str], list[JoinPredicate]] = {}
    for other in g.edges:
        if other is edge:
            continue
        x = fold.name if other.a in (edge.a, edge.b) else other.a
        y = fold.name if other.b in (edge.a, edge.b) else other.b
        key = (x, y) if x <= y else (y, x)
        merged.setdefault(key, []).extend(other.conjuncts)
    edges = [GraphEdge(x, y, tuple(conjuncts)) for (x, y), conjuncts in merged.items()]
    return JoinGraph(nodes, edges, g.alias_order)


def fold_join_graph(g: JoinGraph) -> JoinGraph:
    """Fold nodes pairwise until the graph is acyclic; acyclic input is returned as is.

    The folded edge is the one minimizing |rows(a)| * |rows(b)|, ties broken
    by the combined sorted alias list. Each fold removes one node, so the
    loop terminates.
    """
    if not is_connected(g):
        raise GraphError("cannot fold a disconnected join graph")
    for node in g.nodes.values():
        if node.filters:
            raise EngineError("filters must be applied before folding")
    graph = g
    while is_cyclic(graph):
        edge = min(graph.edges, key=lambda e: _fold_sort_key(graph, e))
        graph = _fold_edge(graph, edge)
    return graph


def split_folds(g: JoinGraph) -> dict[str, frozenset[tuple]]:
    """Project every node back onto its base aliases, eliminating duplicates.

    Base nodes map their alias to their (reduced) tuple set unchanged; folds
    are projected per constituent alias via their column provenance.
    """
    out: dict[str, frozenset[tuple]] = {}
    for node in g.nodes.values():
        if not node.is_fold:
            out[node.aliases[0]] = node.rows
            continue
        for alias in node.aliases:
            idx = node.alias_columns(alias)
            out[alias] = frozenset(tuple(row[i] for i in idx) for row in node.rows)
    return out


def to_dot(g: JoinGraph, name: str = "join_graph") -> str:
    """Render the graph as undirected DOT text for debugging."""
    lines = [f"graph {name} {{"]
    for node in g.nodes.values():
        lines.append(f'  "{node.name}" [label="{node.name}"];')
    for edge in g.edges:
        label = " AND ".join(str(c) for c in edge.conjuncts)
        lines.append(f'  "{edge.a}" -- "{edge.b}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
