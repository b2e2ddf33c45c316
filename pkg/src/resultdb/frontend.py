"""SQL frontend: lexing, parsing, semantic analysis, join-graph extraction.

Two dialects share one grammar implementation. User queries are plain
SPJ SELECTs, optionally with the RESULTDB keyword. The script dialect
(produced by the rewrite generator, never typed by users) additionally
allows DISTINCT, IN-subqueries, transactions, and materialized views.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

from .catalog import Database, RelationSchema
from .errors import AnalysisError, GraphError, ParseError, UnsupportedFeatureError
from .joingraph import AttrRef, FilterPredicate, GraphEdge, GraphNode, JoinGraph, JoinPredicate, is_connected
from .values import Value

KEYWORDS = {
    "SELECT", "RESULTDB", "DISTINCT", "FROM", "AS", "WHERE", "AND",
    "ORDER", "BY", "GROUP", "HAVING", "IN",
    "BEGIN", "TRANSACTION", "COMMIT", "CREATE", "MATERIALIZED", "VIEW", "DROP",
}

_SYMBOLS = {
    ",": "COMMA", ".": "DOT", ";": "SEMI", "(": "LPAREN", ")": "RPAREN",
    "*": "STAR", "=": "EQ", "-": "MINUS",
    "<": "LT", "<=": "LE", ">": "GT", ">=": "GE", "<>": "NE",
}

_COMPARISON_TOKENS = {"EQ": "=", "NE": "<>", "LT": "<", "LE": "<=", "GT": ">", "GE": ">="}

_FLIPPED_OP = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line, col = 1, 1
    n = len(text)

    def advance(count: int):
        nonlocal i, line, col
        for _ in range(count):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(1)
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word.upper() if word.upper() in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, start_line, start_col))
            advance(j - i)
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            is_float = False
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(Token("FLOAT" if is_float else "INT", text[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch == "'":
            j = i + 1
            parts: list[str] = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", start_line, start_col)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        parts.append("'")
                        j += 2
                        continue
                    j += 1
                    break
                parts.append(text[j])
                j += 1
            tokens.append(Token("STRING", "".join(parts), start_line, start_col))
            advance(j - i)
            continue
        two = text[i : i + 2]
        if len(two) == 2 and two in _SYMBOLS:
            tokens.append(Token(_SYMBOLS[two], two, start_line, start_col))
            advance(2)
            continue
        if ch in _SYMBOLS:
            tokens.append(Token(_SYMBOLS[ch], ch, start_line, start_col))
            advance(1)
            continue
        raise ParseError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# --- AST ---------------------------------------------------------------


class QueryMode(enum.Enum):
    SINGLE_TABLE = "single_table"
    RESULT_DB = "result_db"


@dataclass(frozen=True)
class ColumnRef:
    alias: str | None
    name: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)

    def sql(self) -> str:
        return f"{self.alias}.{self.name}" if self.alias else self.name


@dataclass(frozen=True)
class TableRef:
    relation: str
    alias: str

    def sql(self) -> str:
        if self.alias == self.relation:
            return self.relation
        return f"{self.relation} AS {self.alias}"


def literal_sql(value: Value) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(value)


Operand = Union[ColumnRef, int, float, str]


@dataclass(frozen=True)
class Comparison:
    left: Operand
    op: str
    right: Operand

    def sql(self) -> str:
        def side(x: Operand) -> str:
            return x.sql() if isinstance(x, ColumnRef) else literal_sql(x)

        return f"{side(self.left)} {self.op} {side(self.right)}"


@dataclass(frozen=True)
class InPredicate:
    """Row-value membership against a subquery (script dialect only)."""

    keys: tuple[ColumnRef, ...]
    query: "QueryAst"

    def sql(self) -> str:
        if len(self.keys) == 1:
            lhs = self.keys[0].sql()
        else:
            lhs = "(" + ", ".join(k.sql() for k in self.keys) + ")"
        return f"{lhs} IN ({self.query.sql(semicolon=False)})"


Conjunct = Union[Comparison, InPredicate]


@dataclass(frozen=True)
class QueryAst:
    mode: QueryMode
    star: bool
    select_items: tuple[ColumnRef, ...]
    from_list: tuple[TableRef, ...]
    where: tuple[Conjunct, ...]
    order_by: tuple[ColumnRef, ...] = ()
    distinct: bool = False

    def sql(self, semicolon: bool = True) -> str:
        parts = ["SELECT"]
        if self.mode is QueryMode.RESULT_DB:
            parts.append("RESULTDB")
        if self.distinct:
            parts.append("DISTINCT")
        parts.append("*" if self.star else ", ".join(c.sql() for c in self.select_items))
        parts.append("FROM")
        parts.append(", ".join(t.sql() for t in self.from_list))
        if self.where:
            parts.append("WHERE")
            parts.append(" AND ".join(c.sql() for c in self.where))
        if self.order_by:
            parts.append("ORDER BY")
            parts.append(", ".join(c.sql() for c in self.order_by))
        text = " ".join(parts)
        return text + ";" if semicolon else text


@dataclass(frozen=True)
class BeginTransaction:
    def sql(self) -> str:
        return "BEGIN TRANSACTION;"


@dataclass(frozen=True)
class Commit:
    def sql(self) -> str:
        return "COMMIT;"


@dataclass(frozen=True)
class CreateView:
    name: str
    query: QueryAst

    def sql(self) -> str:
        return f"CREATE MATERIALIZED VIEW {self.name} AS {self.query.sql(semicolon=False)};"


@dataclass(frozen=True)
class DropView:
    name: str

    def sql(self) -> str:
        return f"DROP MATERIALIZED VIEW {self.name};"


Statement = Union[QueryAst, BeginTransaction, Commit, CreateView, DropView]


# --- Parser ------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], script: bool):
        self.tokens = tokens
        self.pos = 0
        self.script = script

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "EOF":
            self.pos += 1
        return token

    def accept(self, kind: str) -> Token | None:
        if self.peek().kind == kind:
            return self.advance()
        return None

    def expect(self, kind: str, what: str) -> Token:
        token = self.peek()
        if token.kind != kind:
            raise ParseError(f"expected {what}, found {token.text or 'end of input'!r}", token.line, token.col)
        return self.advance()

    def fail_unsupported(self, message: str):
        token = self.peek()
        raise UnsupportedFeatureError(message, token.line, token.col)

    # -- statements

    def parse_statement(self) -> Statement:
        token = self.peek()
        if token.kind == "BEGIN":
            self.advance()
            self.expect("TRANSACTION", "TRANSACTION")
            self.accept("SEMI")
            return BeginTransaction()
        if token.kind == "COMMIT":
            self.advance()
            self.accept("SEMI")
            return Commit()
        if token.kind == "CREATE":
            self.advance()
            self.expect("MATERIALIZED", "MATERIALIZED")
            self.expect("VIEW", "VIEW")
            name = self.expect("IDENT", "view name").text
            self.expect("AS", "AS")
            query = self.parse_query()
            self.accept("SEMI")
            return CreateView(name, query)
        if token.kind == "DROP":
            self.advance()
            self.expect("MATERIALIZED", "MATERIALIZED")
            self.expect("VIEW", "VIEW")
            name = self.expect("IDENT", "view name").text
            self.accept("SEMI")
            return DropView(name)
        query = self.parse_query()
        self.accept("SEMI")
        return query

    # -- queries

    def parse_query(self) -> QueryAst:
        self.expect("SELECT", "SELECT")
        mode = QueryMode.SINGLE_TABLE
        if self.accept("RESULTDB"):
            if self.script:
                self.fail_unsupported("RESULTDB does not occur in generated scripts")
            mode = QueryMode.RESULT_DB
        distinct = False
        if self.peek().kind == "DISTINCT":
            if not self.script:
                self.fail_unsupported("DISTINCT is not supported (results already use set semantics)")
            self.advance()
            distinct = True
        star, items = self.parse_select_list()
        self.expect("FROM", "FROM")
        from_list = self.parse_from_list()
        where: tuple[Conjunct, ...] = ()
        if self.accept("WHERE"):
            where = self.parse_conjuncts()
        order_by: tuple[ColumnRef, ...] = ()
        if self.peek().kind == "ORDER":
            if self.script:
                self.fail_unsupported("ORDER BY does not occur in generated scripts")
            self.advance()
            self.expect("BY", "BY")
            order_by = self.parse_column_list()
        if self.peek().kind in ("GROUP", "HAVING"):
            self.fail_unsupported(f"{self.peek().text.upper()} is not supported")
        return QueryAst(mode, star, items, from_list, where, order_by, distinct)

    def parse_select_list(self) -> tuple[bool, tuple[ColumnRef, ...]]:
        if self.accept("STAR"):
            return True, ()
        items = self.parse_column_list()
        return False, items

    def parse_column_list(self) -> tuple[ColumnRef, ...]:
        items = [self.parse_column_ref()]
        while self.accept("COMMA"):
            items.append(self.parse_column_ref())
        return tuple(items)

    def parse_column_ref(self) -> ColumnRef:
        token = self.expect("IDENT", "column reference")
        if self.peek().kind == "LPAREN":
            self.fail_unsupported(f"aggregate or function call {token.text!r} is not supported")
        if self.accept("DOT"):
            attr = self.expect("IDENT", "attribute name")
            return ColumnRef(token.text, attr.text, token.line, token.col)
        return ColumnRef(None, token.text, token.line, token.col)

    def parse_from_list(self) -> tuple[TableRef, ...]:
        tables = [self.parse_table_ref()]
        while self.accept("COMMA"):
            tables.append(self.parse_table_ref())
        seen = set()
        for table in tables:
            if table.alias in seen:
                raise ParseError(f"duplicate alias {table.alias!r} in FROM clause")
            seen.add(table.alias)
        return tuple(tables)

    def parse_table_ref(self) -> TableRef:
        relation = self.expect("IDENT", "relation name").text
        if self.accept("AS"):
            alias = self.expect("IDENT", "alias").text
        elif self.peek().kind == "IDENT":
            alias = self.advance().text
        else:
            alias = relation
        return TableRef(relation, alias)

    def parse_conjuncts(self) -> tuple[Conjunct, ...]:
        conjuncts = [self.parse_conjunct()]
        while self.accept("AND"):
            conjuncts.append(self.parse_conjunct())
        return tuple(conjuncts)

    def parse_conjunct(self) -> Conjunct:
        token = self.peek()
        if token.kind == "LPAREN":
            if not self.script:
                raise ParseError("unexpected '(' in WHERE clause", token.line, token.col)
            self.advance()
            keys = [self.parse_column_ref()]
            while self.accept("COMMA"):
                keys.append(self.parse_column_ref())
            self.expect("RPAREN", "')'")
            self.expect("IN", "IN")
            return self.parse_in_tail(tuple(keys))
        left = self.parse_operand()
        if self.peek().kind == "IN":
            if not self.script:
                self.fail_unsupported("IN subqueries are not supported in user queries")
            if not isinstance(left, ColumnRef):
                raise ParseError("left side of IN must be a column reference", token.line, token.col)
            self.advance()
            return self.parse_in_tail((left,))
        op_token = self.peek()
        if op_token.kind not in _COMPARISON_TOKENS:
            raise ParseError(
                f"expected comparison operator, found {op_token.text or 'end of input'!r}",
                op_token.line,
                op_token.col,
            )
        self.advance()
        right = self.parse_operand()
        if not isinstance(left, ColumnRef) and not isinstance(right, ColumnRef):
            raise ParseError(
                "comparison must reference at least one attribute", token.line, token.col
            )
        return Comparison(left, _COMPARISON_TOKENS[op_token.kind], right)

    def parse_in_tail(self, keys: tuple[ColumnRef, ...]) -> InPredicate:
        self.expect("LPAREN", "'('")
        query = self.parse_query()
        self.expect("RPAREN", "')'")
        return InPredicate(keys, query)

    def parse_operand(self) -> Operand:
        token = self.peek()
        if token.kind == "IDENT":
            return self.parse_column_ref()
        if token.kind == "MINUS":
            self.advance()
            number = self.peek()
            if number.kind == "INT":
                self.advance()
                return -int(number.text)
            if number.kind == "FLOAT":
                self.advance()
                return -float(number.text)
            raise ParseError("expected a number after '-'", number.line, number.col)
        if token.kind == "INT":
            self.advance()
            return int(token.text)
        if token.kind == "FLOAT":
            self.advance()
            return float(token.text)
        if token.kind == "STRING":
            self.advance()
            return token.text
        raise ParseError(
            f"expected attribute or literal, found {token.text or 'end of input'!r}",
            token.line,
            token.col,
        )

    def expect_end(self):
        token = self.peek()
        if token.kind != "EOF":
            raise ParseError(f"unexpected trailing input {token.text!r}", token.line, token.col)


def parse(query_text: str) -> QueryAst:
    """Parse one user query (the trailing semicolon is optional)."""
    parser = _Parser(tokenize(query_text), script=False)
    ast = parser.parse_statement()
    parser.expect_end()
    return ast


def parse_script_statement(statement_text: str) -> Statement:
    """Parse one statement of the generated-script dialect."""
    parser = _Parser(tokenize(statement_text), script=True)
    statement = parser.parse_statement()
    parser.expect_end()
    return statement


# --- Semantic analysis -------------------------------------------------


_LITERAL_TYPE = {int: "int", float: "float", str: "string"}


@dataclass
class AnalyzedQuery:
    """A bound query: every name resolved, predicates classified."""

    ast: QueryAst
    db: Database
    tables: tuple[TableRef, ...]
    schemas: dict[str, RelationSchema]  # keyed by alias, FROM order
    select_columns: tuple[AttrRef, ...]
    predicates: tuple[JoinPredicate | FilterPredicate, ...]  # original WHERE order
    order_by: tuple[AttrRef, ...]
    target_subschema: dict[str, tuple[str, ...]]  # alias -> attrs in schema order
    relationship_preserving: bool
    warnings: tuple[str, ...] = ()

    @property
    def mode(self) -> QueryMode:
        return self.ast.mode

    @property
    def aliases(self) -> tuple[str, ...]:
        return tuple(t.alias for t in self.tables)

    @property
    def join_predicates(self) -> tuple[JoinPredicate, ...]:
        return tuple(p for p in self.predicates if isinstance(p, JoinPredicate))

    @property
    def filter_predicates(self) -> tuple[FilterPredicate, ...]:
        return tuple(p for p in self.predicates if isinstance(p, FilterPredicate))


def _bind(ref: ColumnRef, schemas: dict[str, RelationSchema]) -> AttrRef:
    if ref.alias is not None:
        schema = schemas.get(ref.alias)
        if schema is None:
            raise AnalysisError(f"unknown alias {ref.alias!r} in {ref.sql()!r}")
        if not schema.has_attribute(ref.name):
            raise AnalysisError(f"unknown attribute {ref.sql()!r}")
        return AttrRef(ref.alias, ref.name, schema.type_of(ref.name))
    candidates = [alias for alias, schema in schemas.items() if schema.has_attribute(ref.name)]
    if not candidates:
        raise AnalysisError(f"unknown attribute {ref.name!r}")
    if len(candidates) > 1:
        raise AnalysisError(
            f"ambiguous attribute {ref.name!r} (in aliases {', '.join(candidates)})"
        )
    alias = candidates[0]
    return AttrRef(alias, ref.name, schemas[alias].type_of(ref.name))


def _classify_conjunct(conj: Comparison, schemas) -> JoinPredicate | FilterPredicate:
    left_is_ref = isinstance(conj.left, ColumnRef)
    right_is_ref = isinstance(conj.right, ColumnRef)
    if left_is_ref and right_is_ref:
        left = _bind(conj.left, schemas)
        right = _bind(conj.right, schemas)
        if left.alias == right.alias:
            raise AnalysisError(
                f"predicate {conj.sql()!r} compares two attributes of the same alias"
            )
        if conj.op != "=":
            raise AnalysisError(
                f"non-equality predicate {conj.sql()!r} between two relations is not supported"
            )
        if left.vtype != right.vtype:
            raise AnalysisError(
                f"join predicate {conj.sql()!r} compares {left.vtype} with {right.vtype}"
            )
        return JoinPredicate(left, right)
    if left_is_ref:
        ref, op, literal = _bind(conj.left, schemas), conj.op, conj.right
    else:
        ref, op, literal = _bind(conj.right, schemas), _FLIPPED_OP[conj.op], conj.left
    literal_type = _LITERAL_TYPE[type(literal)]
    if literal_type != ref.vtype:
        raise AnalysisError(
            f"filter {conj.sql()!r}: literal is {literal_type}, attribute {ref} is {ref.vtype}"
        )
    return FilterPredicate(ref, op, literal)


def relationship_preserving(
    schemas: dict[str, RelationSchema], target: dict[str, tuple[str, ...]]
) -> bool:
    """Check whether a per-alias attribute selection preserves relationships.

    For every query alias and every foreign key of its relation whose
    referenced relation also occurs among the query's aliases, the selection
    must contain the referencing attributes, some alias of the referenced
    relation, and that alias's full primary key.
    """
    for alias, schema in schemas.items():
        for fk in schema.foreign_keys:
            referenced_aliases = [
                b for b, other in schemas.items() if other.name == fk.references
            ]
            if not referenced_aliases:
                continue
            if alias not in target or not set(fk.attributes) <= set(target[alias]):
                return False
            if not any(
                b in target and set(schemas[b].primary_key) <= set(target[b])
                for b in referenced_aliases
            ):
                return False
    return True


def analyze(ast: QueryAst, db: Database) -> AnalyzedQuery:
    """Bind all names, classify predicates, and compute the target subschema."""
    schemas: dict[str, RelationSchema] = {}
    for table in ast.from_list:
        if table.relation not in db.relations:
            raise AnalysisError(f"unknown relation {table.relation!r}")
        schemas[table.alias] = db.schema(table.relation)

    if ast.star:
        select_columns = tuple(
            AttrRef(alias, attr, vtype)
            for alias, schema in schemas.items()
            for attr, vtype in schema.attributes
        )
    else:
        select_columns = tuple(_bind(item, schemas) for item in ast.select_items)

    predicates: list[JoinPredicate | FilterPredicate] = []
    for conj in ast.where:
        if isinstance(conj, InPredicate):
            raise AnalysisError("IN subqueries are not supported in user queries")
        predicates.append(_classify_conjunct(conj, schemas))

    warnings: list[str] = []
    order_by = tuple(_bind(ref, schemas) for ref in ast.order_by)
    if order_by and ast.mode is QueryMode.RESULT_DB:
        warnings.append("ORDER BY is ignored for RESULTDB queries (set semantics)")

    selected_attrs: dict[str, set[str]] = {}
    for col in select_columns:
        selected_attrs.setdefault(col.alias, set()).add(col.attr)
    target_subschema = {
        alias: tuple(a for a in schemas[alias].attribute_names if a in selected_attrs[alias])
        for alias in schemas
        if alias in selected_attrs
    }

    return AnalyzedQuery(
        ast=ast,
        db=db,
        tables=ast.from_list,
        schemas=schemas,
        select_columns=select_columns,
        predicates=tuple(predicates),
        order_by=order_by,
        target_subschema=target_subschema,
        relationship_preserving=relationship_preserving(schemas, target_subschema),
        warnings=tuple(warnings),
    )


def build_join_graph(q: AnalyzedQuery) -> JoinGraph:
    """One node per alias, one edge per joined alias pair (conjuncts merged).

    Disconnected graphs (cross products) are rejected.
    """
    nodes: dict[str, GraphNode] = {}
    for table in q.tables:
        schema = q.schemas[table.alias]
        columns = tuple(AttrRef(table.alias, attr, vtype) for attr, vtype in schema.attributes)
        filters = tuple(f for f in q.filter_predicates if f.ref.alias == table.alias)
        nodes[table.alias] = GraphNode(
            aliases=(table.alias,),
            columns=columns,
            rows=q.db.relation(table.relation).rows,
            filters=filters,
        )

    alias_order = q.aliases
    grouped: dict[tuple[str, str], list[JoinPredicate]] = {}
    for pred in q.join_predicates:
        pair = tuple(sorted((pred.left.alias, pred.right.alias), key=alias_order.index))
        grouped.setdefault(pair, []).append(pred)
    edges = [GraphEdge(a, b, tuple(conjuncts)) for (a, b), conjuncts in grouped.items()]

    graph = JoinGraph(nodes, edges, alias_order)
    if not is_connected(graph):
        raise GraphError(
            "join graph is disconnected; cross products are not supported "
            f"(aliases: {', '.join(alias_order)})"
        )
    return graph
