"""SQL rewrite methods: four ways to express a RESULTDB query in plain SQL.

Classification: semi-join strategy (SELECT DISTINCT vs IN-subquery) times
materialization strategy (dynamic vs materialized view).

  rwm1: per output alias, SELECT DISTINCT over the unmodified join, in a
        transaction.
  rwm2: one materialized view holding the full join, per-alias DISTINCT
        scans, drop the view.
  rwm3: per output alias, DISTINCT scan of that relation alone with one
        IN-subquery per connected component of the remaining join graph.
  rwm4: one materialized view acting as a full join index (primary keys
        only, join-redundant columns dropped), per-alias IN-membership reads.

`execute_script` parses and runs generated statements against an immutable
database plus a session-private view namespace, re-assembling a SubDatabase.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .catalog import Database
from .engine import SubDatabase, SubRelation, _Source, join_sources
from .errors import EngineError, ParseError, ScriptError
from .frontend import (
    AnalyzedQuery,
    BeginTransaction,
    ColumnRef,
    Commit,
    Comparison,
    CreateView,
    DropView,
    InPredicate,
    QueryAst,
    QueryMode,
    TableRef,
    parse_script_statement,
    relationship_preserving,
)
from .joingraph import FilterPredicate, JoinPredicate
from .values import compare


class RewriteMethod(enum.Enum):
    RWM1 = "rwm1"
    RWM2 = "rwm2"
    RWM3 = "rwm3"
    RWM4 = "rwm4"


@dataclass(frozen=True)
class ResultSlot:
    """Which statement produces which subdatabase member."""

    statement_index: int
    alias: str
    relation: str
    attributes: tuple[str, ...]
    types: tuple[str, ...]


@dataclass
class SqlScript:
    method: RewriteMethod
    statements: list[str]
    slots: list[ResultSlot]
    alias_relations: dict[str, str]  # every query alias -> relation name

    @property
    def result_slots(self) -> list[tuple[int, str]]:
        return [(slot.statement_index, slot.alias) for slot in self.slots]


MV_NAME = "MV"


def _ref(pred_side) -> ColumnRef:
    return ColumnRef(pred_side.alias, pred_side.attr)


def _predicate_conjuncts(predicates) -> tuple[Comparison, ...]:
    out = []
    for pred in predicates:
        if isinstance(pred, JoinPredicate):
            out.append(Comparison(_ref(pred.left), "=", _ref(pred.right)))
        else:
            out.append(Comparison(_ref(pred.ref), pred.op, pred.value))
    return tuple(out)


def _target_aliases(q: AnalyzedQuery) -> list[str]:
    return [t.alias for t in q.tables if t.alias in q.target_subschema]


def _alias_select_items(q: AnalyzedQuery, alias: str) -> tuple[ColumnRef, ...]:
    return tuple(ColumnRef(alias, attr) for attr in q.target_subschema[alias])


def _slot(q: AnalyzedQuery, index: int, alias: str) -> ResultSlot:
    schema = q.schemas[alias]
    attrs = q.target_subschema[alias]
    return ResultSlot(
        statement_index=index,
        alias=alias,
        relation=schema.name,
        attributes=attrs,
        types=tuple(schema.type_of(a) for a in attrs),
    )


def _table_of(q: AnalyzedQuery, alias: str) -> TableRef:
    return next(t for t in q.tables if t.alias == alias)


def _generate_rwm1(q: AnalyzedQuery) -> tuple[list, list[ResultSlot]]:
    statements: list = [BeginTransaction()]
    slots = []
    conjuncts = _predicate_conjuncts(q.predicates)
    for alias in _target_aliases(q):
        query = QueryAst(
            mode=QueryMode.SINGLE_TABLE,
            star=False,
            select_items=_alias_select_items(q, alias),
            from_list=q.tables,
            where=conjuncts,
            distinct=True,
        )
        slots.append(_slot(q, len(statements), alias))
        statements.append(query)
    statements.append(Commit())
    return statements, slots


def _generate_rwm2(q: AnalyzedQuery) -> tuple[list, list[ResultSlot]]:
    all_items = tuple(
        item for alias in _target_aliases(q) for item in _alias_select_items(q, alias)
    )
    mv_query = QueryAst(
        mode=QueryMode.SINGLE_TABLE,
        star=False,
        select_items=all_items,
        from_list=q.tables,
        where=_predicate_conjuncts(q.predicates),
    )
    statements: list = [CreateView(MV_NAME, mv_query)]
    slots = []
    for alias in _target_aliases(q):
        query = QueryAst(
            mode=QueryMode.SINGLE_TABLE,
            star=False,
            select_items=_alias_select_items(q, alias),
            from_list=(TableRef(MV_NAME, MV_NAME),),
            where=(),
            distinct=True,
        )
        slots.append(_slot(q, len(statements), alias))
        statements.append(query)
    statements.append(DropView(MV_NAME))
    return statements, slots


def _rest_components(q: AnalyzedQuery, alias: str) -> list[list[str]]:
    """Connected components of the join graph with `alias` removed, FROM order."""
    others = [a for a in q.aliases if a != alias]
    adjacency = {a: set() for a in others}
    for pred in q.join_predicates:
        x, y = pred.left.alias, pred.right.alias
        if x in adjacency and y in adjacency:
            adjacency[x].add(y)
            adjacency[y].add(x)
    components = []
    seen: set[str] = set()
    for start in others:
        if start in seen:
            continue
        component = []
        frontier = [start]
        seen.add(start)
        while frontier:
            current = frontier.pop()
            component.append(current)
            for neighbor in adjacency[current]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
        components.append(sorted(component, key=q.aliases.index))
    return components


def _generate_rwm3(q: AnalyzedQuery) -> tuple[list, list[ResultSlot]]:
    statements: list = [BeginTransaction()]
    slots = []
    for alias in _target_aliases(q):
        own_filters = _predicate_conjuncts(
            p for p in q.predicates
            if isinstance(p, FilterPredicate) and p.ref.alias == alias
        )
        conjuncts: list = list(own_filters)
        for component in _rest_components(q, alias):
            members = set(component)
            keys: list[ColumnRef] = []
            counterparts: list[ColumnRef] = []
            for pred in q.join_predicates:
                if pred.left.alias == alias and pred.right.alias in members:
                    keys.append(_ref(pred.left))
                    counterparts.append(_ref(pred.right))
                elif pred.right.alias == alias and pred.left.alias in members:
                    keys.append(_ref(pred.right))
                    counterparts.append(_ref(pred.left))
            inner_predicates = [
                p for p in q.predicates
                if (isinstance(p, FilterPredicate) and p.ref.alias in members)
                or (
                    isinstance(p, JoinPredicate)
                    and p.left.alias in members
                    and p.right.alias in members
                )
            ]
            subquery = QueryAst(
                mode=QueryMode.SINGLE_TABLE,
                star=False,
                select_items=tuple(counterparts),
                from_list=tuple(t for t in q.tables if t.alias in members),
                where=_predicate_conjuncts(inner_predicates),
            )
            conjuncts.append(InPredicate(tuple(keys), subquery))
        query = QueryAst(
            mode=QueryMode.SINGLE_TABLE,
            star=False,
            select_items=_alias_select_items(q, alias),
            from_list=(_table_of(q, alias),),
            where=tuple(conjuncts),
            distinct=True,
        )
        slots.append(_slot(q, len(statements), alias))
        statements.append(query)
    statements.append(Commit())
    return statements, slots


class _EquivalenceClasses:
    """Union-find over (alias, attr) pairs connected by join predicates."""

    def __init__(self, predicates):
        self.parent: dict[tuple[str, str], tuple[str, str]] = {}
        for pred in predicates:
            a = (pred.left.alias, pred.left.attr)
            b = (pred.right.alias, pred.right.attr)
            self.parent.setdefault(a, a)
            self.parent.setdefault(b, b)
            self.parent[self.find(a)] = self.find(b)

    def find(self, item: tuple[str, str]) -> tuple[str, str]:
        self.parent.setdefault(item, item)
        while self.parent[item] != item:
            self.parent[item] = self.parent[self.parent[item]]
            item = self.parent[item]
        return item


def _generate_rwm4(q: AnalyzedQuery) -> tuple[list, list[ResultSlot]]:
    for alias in q.aliases:
        if not q.schemas[alias].primary_key:
            raise EngineError(
                f"rwm4 requires a primary key, relation {q.schemas[alias].name!r} has none"
            )
    classes = _EquivalenceClasses(q.join_predicates)

    # Join-index columns: primary key attributes of every alias, one per
    # equivalence class. Keys that are foreign-key parts are redundant with
    # the keys they reference, so they only fill classes nobody else covers.
    candidates = [(alias, attr) for alias in q.aliases for attr in q.schemas[alias].primary_key]
    fk_attrs = {
        alias: {a for fk in q.schemas[alias].foreign_keys for a in fk.attributes}
        for alias in q.aliases
    }
    mv_items: list[ColumnRef] = []
    representative: dict[tuple[str, str], ColumnRef] = {}
    for is_fk_pass in (False, True):
        for alias, attr in candidates:
            if (attr in fk_attrs[alias]) is not is_fk_pass:
                continue
            root = classes.find((alias, attr))
            if root not in representative:
                representative[root] = ColumnRef(alias, attr)
                mv_items.append(representative[root])

    mv_query = QueryAst(
        mode=QueryMode.SINGLE_TABLE,
        star=False,
        select_items=tuple(mv_items),
        from_list=q.tables,
        where=_predicate_conjuncts(q.predicates),
    )
    statements: list = [CreateView(MV_NAME, mv_query)]
    slots = []

    def mv_column_for(alias: str, attr: str) -> ColumnRef | None:
        return representative.get(classes.find((alias, attr)))

    for alias in _target_aliases(q):
        target_attrs = q.target_subschema[alias]
        mapped = [mv_column_for(alias, attr) for attr in target_attrs]
        if all(m is not None for m in mapped):
            # Every requested attribute lives in the join index already.
            star = list(mapped) == mv_items
            query = QueryAst(
                mode=QueryMode.SINGLE_TABLE,
                star=star,
                select_items=() if star else tuple(mapped),
                from_list=(TableRef(MV_NAME, MV_NAME),),
                where=(),
                distinct=True,
            )
        else:
            pk = q.schemas[alias].primary_key
            keys = tuple(ColumnRef(alias, attr) for attr in pk)
            counterparts = tuple(mv_column_for(alias, attr) for attr in pk)
            subquery = QueryAst(
                mode=QueryMode.SINGLE_TABLE,
                star=False,
                select_items=counterparts,
                from_list=(TableRef(MV_NAME, MV_NAME),),
                where=(),
            )
            query = QueryAst(
                mode=QueryMode.SINGLE_TABLE,
                star=False,
                select_items=_alias_select_items(q, alias),
                from_list=(_table_of(q, alias),),
                where=(InPredicate(keys, subquery),),
                distinct=True,
            )
        slots.append(_slot(q, len(statements), alias))
        statements.append(query)
    statements.append(DropView(MV_NAME))
    return statements, slots


_GENERATORS = {
    RewriteMethod.RWM1: _generate_rwm1,
    RewriteMethod.RWM2: _generate_rwm2,
    RewriteMethod.RWM3: _generate_rwm3,
    RewriteMethod.RWM4: _generate_rwm4,
}


def generate_rewrite(q: AnalyzedQuery, method: RewriteMethod) -> SqlScript:
    """Produce the SQL script realizing a RESULTDB query via one rewrite method."""
    if q.mode is not QueryMode.RESULT_DB:
        raise EngineError("rewrites are defined for RESULTDB queries")
    statements, slots = _GENERATORS[method](q)
    return SqlScript(
        method=method,
        statements=[stmt.sql() for stmt in statements],
        slots=slots,
        alias_relations={t.alias: t.relation for t in q.tables},
    )


def script_text(script: SqlScript) -> str:
    return "\n".join(script.statements) + "\n"


# --- reference executor ---------------------------------------------------


@dataclass(frozen=True)
class _ScriptSource:
    key: str
    attrs: tuple[str, ...]  # names used for binding
    labels: tuple[str, ...]  # output column labels
    rows: frozenset[tuple]


def _resolve(ref: ColumnRef, sources: list[_ScriptSource]) -> tuple[str, int, str]:
    """Bind a column reference to (source key, column index, output label)."""
    if ref.alias is not None:
        for src in sources:
            if src.key == ref.alias and ref.name in src.attrs:
                i = src.attrs.index(ref.name)
                return src.key, i, src.labels[i]
        dotted = ref.sql()
        matches = [
            (src, i)
            for src in sources
            for i, label in enumerate(src.labels)
            if label == dotted
        ]
        if len(matches) == 1:
            src, i = matches[0]
            return src.key, i, src.labels[i]
        raise ScriptError(f"cannot resolve column {dotted!r}")
    matches = [
        (src, i) for src in sources for i, attr in enumerate(src.attrs) if attr == ref.name
    ]
    if len(matches) != 1:
        raise ScriptError(f"cannot resolve column {ref.name!r}")
    src, i = matches[0]
    return src.key, i, src.labels[i]


def _evaluate_script_query(
    ast: QueryAst, db: Database, views: dict[str, tuple[tuple[str, ...], frozenset]]
) -> tuple[tuple[str, ...], frozenset[tuple]]:
    sources: list[_ScriptSource] = []
    for table in ast.from_list:
        if table.relation in views:
            columns, rows = views[table.relation]
            sources.append(_ScriptSource(table.alias, columns, columns, rows))
        elif table.relation in db.relations:
            schema = db.schema(table.relation)
            names = schema.attribute_names
            labels = tuple(f"{table.alias}.{a}" for a in names)
            sources.append(_ScriptSource(table.alias, names, labels, db.relation(table.relation).rows))
        else:
            raise ScriptError(f"unknown relation or view {table.relation!r}")

    filters: dict[str, list[tuple[int, str, object]]] = {s.key: [] for s in sources}
    equalities: list[tuple[tuple[str, str], tuple[str, str]]] = []
    memberships: list[tuple[list[tuple[str, int]], frozenset]] = []
    for conj in ast.where:
        if isinstance(conj, InPredicate):
            _, member_rows = _evaluate_script_query(conj.query, db, views)
            key_refs = [_resolve(k, sources) for k in conj.keys]
            memberships.append(([(key, i) for key, i, _ in key_refs], member_rows))
            continue
        left_is_ref = isinstance(conj.left, ColumnRef)
        right_is_ref = isinstance(conj.right, ColumnRef)
        if left_is_ref and right_is_ref:
            lk, li, _ = _resolve(conj.left, sources)
            rk, ri, _ = _resolve(conj.right, sources)
            if lk == rk:
                raise ScriptError(f"unsupported predicate {conj.sql()!r} within one source")
            if conj.op != "=":
                raise ScriptError(f"unsupported join operator in {conj.sql()!r}")
            lsrc = next(s for s in sources if s.key == lk)
            rsrc = next(s for s in sources if s.key == rk)
            equalities.append(((lk, lsrc.attrs[li]), (rk, rsrc.attrs[ri])))
        elif left_is_ref or right_is_ref:
            if left_is_ref:
                key, i, _ = _resolve(conj.left, sources)
                op, literal = conj.op, conj.right
            else:
                key, i, _ = _resolve(conj.right, sources)
                flipped = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}
                op, literal = flipped[conj.op], conj.left
            filters[key].append((i, op, literal))
        else:
            raise ScriptError(f"unsupported literal-only predicate {conj.sql()!r}")

    lowered = [
        _Source(
            s.key,
            s.attrs,
            frozenset(
                row
                for row in s.rows
                if all(compare(op, row[i], v) for i, op, v in filters[s.key])
            )
            if filters[s.key]
            else s.rows,
        )
        for s in sources
    ]
    try:
        offsets, joined = join_sources(lowered, equalities)
    except EngineError as exc:
        raise ScriptError(str(exc)) from None

    for key_positions, member_rows in memberships:
        positions = [offsets[key] + i for key, i in key_positions]
        joined = frozenset(
            row
            for row in joined
            if not any(row[p] is None for p in positions)
            and tuple(row[p] for p in positions) in member_rows
        )

    if ast.star:
        out_labels: list[str] = []
        out_idx: list[int] = []
        for src in sources:
            for i, label in enumerate(src.labels):
                out_labels.append(label)
                out_idx.append(offsets[src.key] + i)
    else:
        out_labels = []
        out_idx = []
        for item in ast.select_items:
            key, i, label = _resolve(item, sources)
            out_labels.append(label)
            out_idx.append(offsets[key] + i)
    rows = frozenset(tuple(row[i] for i in out_idx) for row in joined)
    return tuple(out_labels), rows


def execute_script(script: SqlScript, db: Database) -> SubDatabase:
    """Run a generated script on the reference executor, re-assembling the result.

    BEGIN/COMMIT are no-ops over the immutable snapshot; materialized views
    live in a session-private namespace.
    """
    views: dict[str, tuple[tuple[str, ...], frozenset]] = {}
    outputs: dict[int, frozenset[tuple]] = {}
    for index, text in enumerate(script.statements):
        try:
            statement = parse_script_statement(text)
        except ParseError as exc:
            raise ScriptError(f"statement {index}: {exc}") from None
        if isinstance(statement, (BeginTransaction, Commit)):
            continue
        if isinstance(statement, CreateView):
            if statement.name in views:
                raise ScriptError(f"view {statement.name!r} already exists")
            views[statement.name] = _evaluate_script_query(statement.query, db, views)
        elif isinstance(statement, DropView):
            if statement.name not in views:
                raise ScriptError(f"view {statement.name!r} is not defined")
            del views[statement.name]
        else:
            _, rows = _evaluate_script_query(statement, db, views)
            outputs[index] = rows

    entries: dict[str, SubRelation] = {}
    target: dict[str, tuple[str, ...]] = {}
    for slot in script.slots:
        rows = outputs.get(slot.statement_index)
        if rows is None:
            raise ScriptError(f"statement {slot.statement_index} produced no result")
        entries[slot.alias] = SubRelation(
            relation=slot.relation,
            attributes=slot.attributes,
            types=slot.types,
            rows=rows,
        )
        target[slot.alias] = slot.attributes
    schemas = {alias: db.schema(rel) for alias, rel in script.alias_relations.items()}
    return SubDatabase(
        entries=entries,
        schemas=schemas,
        relationship_preserving=relationship_preserving(schemas, target),
    )
