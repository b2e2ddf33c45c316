"""Query execution.

`select_resultdb` is the native pipeline: join graph -> filters -> fold (if
cyclic) -> two-pass semi-join reduction -> split folds -> projection.
`oracle_resultdb` is the brute-force reference (nested-loop join of
everything, then per-alias projection) kept deliberately independent of the
hash-join machinery so the two routes can check each other.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .catalog import RelationSchema
from .errors import EngineError, PostJoinError
from .frontend import AnalyzedQuery, QueryMode, build_join_graph, relationship_preserving
from .joingraph import (
    AttrRef,
    GraphNode,
    JoinGraph,
    JoinPredicate,
    apply_filters,
    conjunct_index_pairs,
    fold_join_graph,
    is_connected,
    is_cyclic,
    join_rows,
    semi_join_rows,
    split_folds,
)
from .values import compare, format_value, row_sort_key


@dataclass(frozen=True)
class SubRelation:
    """One member of a subdatabase: a projected, duplicate-free tuple set."""

    relation: str
    attributes: tuple[str, ...]
    types: tuple[str, ...]
    rows: frozenset[tuple]


@dataclass
class SubDatabase:
    """Per-alias participation sets, ordered by FROM-clause appearance."""

    entries: dict[str, SubRelation]
    schemas: dict[str, RelationSchema]  # all query aliases, also the projected-away ones
    relationship_preserving: bool

    def row_sets(self) -> dict[str, frozenset[tuple]]:
        return {alias: entry.rows for alias, entry in self.entries.items()}

    def total_rows(self) -> int:
        return sum(len(entry.rows) for entry in self.entries.values())

    def render(self) -> str:
        """The result-dictionary text block (canonical, ascending tuple order)."""
        lines = ["Result = {"]
        for alias, entry in self.entries.items():
            lines.append(f"    '{alias}': {{")
            for row in sorted(entry.rows, key=row_sort_key):
                rendered = ", ".join("NULL" if v is None else format_value(v) for v in row)
                lines.append(f"        ({rendered}),")
            lines.append("    },")
        lines.append("}")
        return "\n".join(lines)


@dataclass
class ResultTable:
    """A single-table result: ordered, duplicate-free rows."""

    columns: tuple[str, ...]  # qualified labels, e.g. "p.name"
    types: tuple[str, ...]
    rows: tuple[tuple, ...]

    def row_set(self) -> frozenset[tuple]:
        return frozenset(self.rows)

    def to_csv(self) -> str:
        """Rows in table order (canonical_csv would re-sort, dropping ORDER BY)."""
        import csv as _csv
        import io as _io

        out = _io.StringIO()
        writer = _csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return out.getvalue()


# --- semi-join and reduction --------------------------------------------


def semi_join(
    left_rows: frozenset[tuple] | set[tuple],
    left_columns: Sequence[AttrRef],
    right_rows: frozenset[tuple] | set[tuple],
    right_columns: Sequence[AttrRef],
    conjuncts: Sequence[JoinPredicate],
) -> frozenset[tuple]:
    """Left semi-join: the left tuples with at least one partner on the right."""
    left_node = GraphNode(
        aliases=tuple(dict.fromkeys(c.alias for c in left_columns)),
        columns=tuple(left_columns),
        rows=frozenset(left_rows),
    )
    right_node = GraphNode(
        aliases=tuple(dict.fromkeys(c.alias for c in right_columns)),
        columns=tuple(right_columns),
        rows=frozenset(right_rows),
    )
    pairs = conjunct_index_pairs(left_node, right_node, conjuncts)
    for li, ri in pairs:
        if left_node.columns[li].vtype != right_node.columns[ri].vtype:
            raise EngineError(
                f"semi-join predicate pairs {left_node.columns[li]} "
                f"({left_node.columns[li].vtype}) with {right_node.columns[ri]} "
                f"({right_node.columns[ri].vtype})"
            )
    return semi_join_rows(left_node.rows, right_node.rows, pairs)


def reduce_relations(g: JoinGraph) -> JoinGraph:
    """Fully reduce an acyclic join graph with two semi-join passes.

    Root: node of maximum degree, ties by smallest alias. Pass 1 walks the
    BFS edge order backwards reducing each parent by its child; pass 2 walks
    it forwards reducing each child by its parent.
    """
    if not is_connected(g):
        raise EngineError("reduce_relations requires a connected join graph")
    if is_cyclic(g):
        raise EngineError("reduce_relations requires an acyclic join graph (fold first)")
    for node in g.nodes.values():
        if node.filters:
            raise EngineError("filters must be applied before reduction")
    if len(g.nodes) <= 1:
        return g

    root = min(g.nodes, key=lambda name: (-g.degree(name), min(g.nodes[name].aliases)))
    edge_by_pair = {}
    for edge in g.edges:
        edge_by_pair[(edge.a, edge.b)] = edge
        edge_by_pair[(edge.b, edge.a)] = edge

    bfs_order: list[tuple[str, str]] = []  # (parent, child)
    visited = {root}
    queue = [root]
    while queue:
        current = queue.pop(0)
        children = [n for n in g.neighbors(current) if n not in visited]
        for child in sorted(children, key=lambda name: min(g.nodes[name].aliases)):
            visited.add(child)
            bfs_order.append((current, child))
            queue.append(child)

    rows = {name: node.rows for name, node in g.nodes.items()}
    for parent, child in reversed(bfs_order):
        pairs = conjunct_index_pairs(g.nodes[parent], g.nodes[child], edge_by_pair[(parent, child)].conjuncts)
        rows[parent] = semi_join_rows(rows[parent], rows[child], pairs)
    for parent, child in bfs_order:
        pairs = conjunct_index_pairs(g.nodes[child], g.nodes[parent], edge_by_pair[(parent, child)].conjuncts)
        rows[child] = semi_join_rows(rows[child], rows[parent], pairs)

    nodes = {name: replace(node, rows=rows[name]) for name, node in g.nodes.items()}
    return JoinGraph(nodes, list(g.edges), g.alias_order)


# --- the native RESULTDB pipeline ----------------------------------------


def _project_rows(
    rows: frozenset[tuple], attr_index: Sequence[int]
) -> frozenset[tuple]:
    return frozenset(tuple(row[i] for i in attr_index) for row in rows)


def _assemble_subdatabase(
    q: AnalyzedQuery, per_alias_rows: dict[str, frozenset[tuple]]
) -> SubDatabase:
    entries: dict[str, SubRelation] = {}
    for table in q.tables:
        alias = table.alias
        if alias not in q.target_subschema:
            continue
        schema = q.schemas[alias]
        attrs = q.target_subschema[alias]
        idx = [schema.index_of(a) for a in attrs]
        entries[alias] = SubRelation(
            relation=schema.name,
            attributes=attrs,
            types=tuple(schema.type_of(a) for a in attrs),
            rows=_project_rows(per_alias_rows[alias], idx),
        )
    return SubDatabase(
        entries=entries,
        schemas=dict(q.schemas),
        relationship_preserving=q.relationship_preserving,
    )


def select_resultdb(q: AnalyzedQuery) -> SubDatabase:
    """Compute the subdatabase natively (fold if cyclic, reduce, split, project)."""
    if q.mode is not QueryMode.RESULT_DB:
        raise EngineError("select_resultdb requires a RESULTDB query")
    graph = build_join_graph(q)
    graph = apply_filters(graph)
    if is_cyclic(graph):
        graph = fold_join_graph(graph)
    graph = reduce_relations(graph)
    return _assemble_subdatabase(q, split_folds(graph))


def oracle_resultdb(q: AnalyzedQuery) -> SubDatabase:
    """Brute-force reference: materialize the full join, project per alias.

    Nested-loop evaluation in FROM order, applying each predicate as soon as
    its aliases are available. Intended for small instances.
    """
    if q.mode is not QueryMode.RESULT_DB:
        raise EngineError("oracle_resultdb requires a RESULTDB query")
    offsets: dict[str, int] = {}
    acc: list[tuple] = [()]
    placed: list[str] = []
    for table in q.tables:
        alias = table.alias
        schema = q.schemas[alias]
        filters = [
            (schema.index_of(f.ref.attr), f.op, f.value)
            for f in q.filter_predicates
            if f.ref.alias == alias
        ]
        joins = []
        for pred in q.join_predicates:
            if pred.left.alias == alias and pred.right.alias in offsets:
                here, there = pred.left, pred.right
            elif pred.right.alias == alias and pred.left.alias in offsets:
                here, there = pred.right, pred.left
            else:
                continue
            joins.append(
                (
                    schema.index_of(here.attr),
                    offsets[there.alias] + q.schemas[there.alias].index_of(there.attr),
                )
            )
        offsets[alias] = sum(len(q.schemas[a].attributes) for a in placed)
        placed.append(alias)

        extended = []
        for row in q.db.relation(table.relation).rows:
            if not all(compare(op, row[i], value) for i, op, value in filters):
                continue
            for partial in acc:
                ok = True
                for here_i, there_i in joins:
                    a, b = row[here_i], partial[there_i]
                    if a is None or b is None or a != b:
                        ok = False
                        break
                if ok:
                    extended.append(partial + row)
        acc = extended

    per_alias: dict[str, frozenset[tuple]] = {}
    for alias in q.target_subschema:
        schema = q.schemas[alias]
        base = offsets[alias]
        idx = [base + schema.index_of(a) for a in schema.attribute_names]
        per_alias[alias] = frozenset(tuple(row[i] for i in idx) for row in acc)
    return _assemble_subdatabase(q, per_alias)


# --- single-table execution and reconstruction ---------------------------


@dataclass(frozen=True)
class _Source:
    """One FROM item lowered for the greedy hash-join evaluator."""

    key: str
    attrs: tuple[str, ...]
    rows: frozenset[tuple]

    def index_of(self, attr: str) -> int:
        try:
            return self.attrs.index(attr)
        except ValueError:
            raise EngineError(f"source {self.key!r} has no attribute {attr!r}") from None


def join_sources(
    sources: Sequence[_Source],
    equalities: Sequence[tuple[tuple[str, str], tuple[str, str]]],
) -> tuple[dict[str, int], frozenset[tuple]]:
    """Greedy connected hash-join of all sources, preferring FROM order.

    `equalities` pair (source key, attr) with (source key, attr). Returns the
    column offset of each source in the combined rows plus the row set.
    Raises if the sources cannot be joined without a cross product.
    """
    by_key = {s.key: s for s in sources}
    remaining = [s.key for s in sources]
    first = remaining.pop(0)
    offsets = {first: 0}
    width = len(by_key[first].attrs)
    rows = by_key[first].rows

    while remaining:
        candidate = None
        for key in remaining:
            if any(
                (a[0] == key and b[0] in offsets) or (b[0] == key and a[0] in offsets)
                for a, b in equalities
            ):
                candidate = key
                break
        if candidate is None:
            raise EngineError(
                "query requires a cross product between "
                f"{{{', '.join(offsets)}}} and {{{', '.join(remaining)}}}"
            )
        remaining.remove(candidate)
        source = by_key[candidate]
        pairs = []
        for a, b in equalities:
            if a[0] == candidate and b[0] in offsets:
                here, there = a, b
            elif b[0] == candidate and a[0] in offsets:
                here, there = b, a
            else:
                continue
            left_idx = offsets[there[0]] + by_key[there[0]].index_of(there[1])
            right_idx = source.index_of(here[1])
            pairs.append((left_idx, right_idx))
        rows = join_rows(rows, source.rows, pairs)
        offsets[candidate] = width
        width += len(source.attrs)
    return offsets, rows


def _filtered_base_rows(q: AnalyzedQuery, alias: str) -> frozenset[tuple]:
    schema = q.schemas[alias]
    relation = next(t.relation for t in q.tables if t.alias == alias)
    rows = q.db.relation(relation).rows
    filters = [
        (schema.index_of(f.ref.attr), f.op, f.value)
        for f in q.filter_predicates
        if f.ref.alias == alias
    ]
    if not filters:
        return rows
    return frozenset(
        row for row in rows if all(compare(op, row[i], v) for i, op, v in filters)
    )


def _ordered_rows(
    rows: set[tuple], order_idx: Sequence[int]
) -> tuple[tuple, ...]:
    if order_idx:
        return tuple(
            sorted(
                rows,
                key=lambda r: (row_sort_key([r[i] for i in order_idx]), row_sort_key(r)),
            )
        )
    return tuple(sorted(rows, key=row_sort_key))


def _project_result(
    q: AnalyzedQuery, offsets: dict[str, int], joined: frozenset[tuple]
) -> ResultTable:
    col_idx = [
        offsets[c.alias] + q.schemas[c.alias].index_of(c.attr) for c in q.select_columns
    ]
    rows = {tuple(row[i] for i in col_idx) for row in joined}
    select_pos = {(c.alias, c.attr): i for i, c in enumerate(q.select_columns)}
    order_idx = []
    for ref in q.order_by if q.mode is QueryMode.SINGLE_TABLE else ():
        if (ref.alias, ref.attr) not in select_pos:
            raise EngineError(f"ORDER BY column {ref} must appear in the select list")
        order_idx.append(select_pos[(ref.alias, ref.attr)])
    return ResultTable(
        columns=tuple(str(c) for c in q.select_columns),
        types=tuple(c.vtype for c in q.select_columns),
        rows=_ordered_rows(rows, order_idx),
    )


def execute_single_table(q: AnalyzedQuery) -> ResultTable:
    """Full equi-join + filters + duplicate-free projection (ORDER BY applied)."""
    build_join_graph(q)  # validates connectivity
    sources = [
        _Source(t.alias, q.schemas[t.alias].attribute_names, _filtered_base_rows(q, t.alias))
        for t in q.tables
    ]
    equalities = [
        ((p.left.alias, p.left.attr), (p.right.alias, p.right.attr))
        for p in q.join_predicates
    ]
    offsets, joined = join_sources(sources, equalities)
    return _project_result(q, offsets, joined)


def post_join(sub: SubDatabase, q: AnalyzedQuery) -> ResultTable:
    """Re-run the single-table query over a subdatabase instead of base relations.

    Every attribute the query touches must be present in the subdatabase;
    otherwise the first missing one is reported.
    """
    needed: list[AttrRef] = list(q.select_columns)
    for pred in q.join_predicates:
        needed.extend((pred.left, pred.right))
    for f in q.filter_predicates:
        needed.append(f.ref)
    needed.extend(q.order_by)
    for ref in needed:
        entry = sub.entries.get(ref.alias)
        if entry is None or ref.attr not in entry.attributes:
            raise PostJoinError(
                f"attribute {ref} is missing from the subdatabase; "
                "the projection is not relationship-preserving for this query"
            )

    sources = []
    for table in q.tables:
        entry = sub.entries[table.alias]
        filters = [
            (entry.attributes.index(f.ref.attr), f.op, f.value)
            for f in q.filter_predicates
            if f.ref.alias == table.alias
        ]
        rows = entry.rows
        if filters:
            rows = frozenset(
                row for row in rows if all(compare(op, row[i], v) for i, op, v in filters)
            )
        sources.append(_Source(table.alias, entry.attributes, rows))
    equalities = [
        ((p.left.alias, p.left.attr), (p.right.alias, p.right.attr))
        for p in q.join_predicates
    ]
    offsets, joined = join_sources(sources, equalities)

    col_idx = [
        offsets[c.alias] + sub.entries[c.alias].attributes.index(c.attr)
        for c in q.select_columns
    ]
    rows = {tuple(row[i] for i in col_idx) for row in joined}
    select_pos = {(c.alias, c.attr): i for i, c in enumerate(q.select_columns)}
    order_idx = [select_pos[(ref.alias, ref.attr)] for ref in q.order_by]
    return ResultTable(
        columns=tuple(str(c) for c in q.select_columns),
        types=tuple(c.vtype for c in q.select_columns),
        rows=_ordered_rows(rows, order_idx),
    )


def project_subdatabase(
    sub: SubDatabase, target: dict[str, Sequence[str]]
) -> SubDatabase:
    """Project a subdatabase to a database subschema (duplicates eliminated).

    Aliases absent from the target are dropped. The result's
    relationship-preserving flag is recomputed (reported, not enforced).
    """
    entries: dict[str, SubRelation] = {}
    normalized: dict[str, tuple[str, ...]] = {}
    for alias, wanted in target.items():
        entry = sub.entries.get(alias)
        if entry is None:
            raise EngineError(f"projection target references unknown alias {alias!r}")
        for attr in wanted:
            if attr not in entry.attributes:
                raise EngineError(
                    f"projection target references {alias}.{attr}, "
                    "which is not in the subdatabase"
                )
        normalized[alias] = tuple(a for a in entry.attributes if a in set(wanted))
    for alias, entry in sub.entries.items():
        if alias not in normalized:
            continue
        attrs = normalized[alias]
        idx = [entry.attributes.index(a) for a in attrs]
        entries[alias] = SubRelation(
            relation=entry.relation,
            attributes=attrs,
            types=tuple(entry.types[i] for i in idx),
            rows=_project_rows(entry.rows, idx),
        )
    return SubDatabase(
        entries=entries,
        schemas=dict(sub.schemas),
        relationship_preserving=relationship_preserving(sub.schemas, normalized),
    )
