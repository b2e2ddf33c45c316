"""Command-line interface.

Exit codes: 0 success, 1 usage/parse error, 2 semantic error, 3 data error.
Diagnostics (errors and warnings) go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .catalog import Database, LoadResult, RelationInstance, load_database_from_dir, load_schema, validate_foreign_keys
from .engine import execute_single_table, oracle_resultdb, select_resultdb
from .errors import DataError, ParseError, ResultDbError, SemanticError
from .frontend import QueryMode, analyze, build_join_graph, parse
from .joingraph import apply_filters, fold_join_graph, is_cyclic, to_dot
from .rewrite import RewriteMethod, execute_script, generate_rewrite, script_text
from .sizing import compare_sizes, render_report
from .values import canonical_csv

ENGINES = ("native", "oracle", "rwm1", "rwm2", "rwm3", "rwm4")


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the CLI contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="resultdb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    load = sub.add_parser("load", parents=[], help="load and validate a database")
    load.add_argument("--schema", required=True)
    load.add_argument("--data", required=True)

    query = sub.add_parser("query", help="run a query")
    query.add_argument("--schema", required=True)
    query.add_argument("--data", required=True)
    query.add_argument("--engine", choices=ENGINES, default="native")
    query.add_argument("--format", choices=("text", "csv-dir"), default="text")
    query.add_argument("--out", help="output directory for --format csv-dir")
    query.add_argument("sql")

    rewrite = sub.add_parser("rewrite", help="generate a rewrite-method SQL script")
    rewrite.add_argument("--schema", required=True)
    rewrite.add_argument("--data", help="optional; rewrites need only the schema")
    rewrite.add_argument("--method", choices=("rwm1", "rwm2", "rwm3", "rwm4"), required=True)
    rewrite.add_argument("--emit-sql", help="write the script to this file instead of stdout")
    rewrite.add_argument("sql")

    compare = sub.add_parser("compare", help="compare single-table vs subdatabase sizes")
    compare.add_argument("--schema", required=True)
    compare.add_argument("--data", required=True)
    compare.add_argument("sql")

    graph = sub.add_parser("graph", help="show the join graph before/after folding")
    graph.add_argument("--schema", required=True)
    graph.add_argument("--data", required=True)
    graph.add_argument("--dot", action="store_true", help="render DOT text")
    graph.add_argument("sql")

    return parser


def _load(args) -> LoadResult:
    result = load_database_from_dir(args.schema, args.data)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return result


def _schema_only_database(schema_path: str) -> Database:
    schemas = load_schema(Path(schema_path).read_text(encoding="utf-8"))
    return Database({s.name: RelationInstance(s, frozenset()) for s in schemas})


def _analyze(sql: str, db: Database):
    q = analyze(parse(sql), db)
    for warning in q.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return q


def _cmd_load(args) -> int:
    result = _load(args)
    db = result.database
    print(f"loaded {len(db.relations)} relation(s)")
    for name, inst in db.relations.items():
        schema = inst.schema
        fk_text = ", ".join(
            f"{'+'.join(fk.attributes)}->{fk.references}" for fk in schema.foreign_keys
        )
        print(
            f"  {name}: {len(inst.rows)} tuple(s), "
            f"key ({', '.join(schema.primary_key)})"
            + (f", fks [{fk_text}]" if fk_text else "")
        )
    violations = validate_foreign_keys(db)
    if violations:
        print(f"{len(violations)} foreign-key violation(s):", file=sys.stderr)
        for violation in violations:
            print(f"  {violation}", file=sys.stderr)
        return 3
    print("foreign keys: ok")
    return 0


def _cmd_query(args) -> int:
    db = _load(args).database
    q = _analyze(args.sql, db)

    if q.mode is QueryMode.SINGLE_TABLE:
        if args.engine != "native":
            raise SemanticError(
                f"engine {args.engine!r} applies to RESULTDB queries only"
            )
        table = execute_single_table(q)
        if args.format == "csv-dir":
            out = _require_out(args)
            (out / "result.csv").write_text(table.to_csv(), encoding="utf-8")
            print(f"wrote {out / 'result.csv'}")
        else:
            print(table.to_csv(), end="")
        return 0

    if args.engine == "native":
        sub = select_resultdb(q)
    elif args.engine == "oracle":
        sub = oracle_resultdb(q)
    else:
        script = generate_rewrite(q, RewriteMethod(args.engine))
        sub = execute_script(script, db)

    if args.format == "csv-dir":
        out = _require_out(args)
        for alias, entry in sub.entries.items():
            path = out / f"{alias}.csv"
            path.write_text(canonical_csv(entry.attributes, entry.rows), encoding="utf-8")
            print(f"wrote {path}")
    else:
        print(sub.render())
    return 0


def _require_out(args) -> Path:
    if not args.out:
        raise DataError("--format csv-dir requires --out <dir>")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_rewrite(args) -> int:
    if args.data:
        db = _load(args).database
    else:
        db = _schema_only_database(args.schema)
    q = _analyze(args.sql, db)
    script = generate_rewrite(q, RewriteMethod(args.method))
    text = script_text(script)
    if args.emit_sql:
        Path(args.emit_sql).write_text(text, encoding="utf-8")
        print(f"wrote {args.emit_sql}")
    else:
        print(text, end="")
    return 0


def _cmd_compare(args) -> int:
    db = _load(args).database
    q = _analyze(args.sql, db)
    report = compare_sizes(q)
    print(render_report(report))
    print(json.dumps(report.as_dict()))
    return 0


def _cmd_graph(args) -> int:
    db = _load(args).database
    q = _analyze(args.sql, db)
    graph = apply_filters(build_join_graph(q))
    cyclic = is_cyclic(graph)
    if args.dot:
        print(to_dot(graph, "join_graph"), end="")
        folded = fold_join_graph(graph) if cyclic else graph
        print(to_dot(folded, "folded"), end="")
    else:
        print(
            f"{len(graph.nodes)} node(s), {len(graph.edges)} edge(s), "
            f"{'cyclic' if cyclic else 'acyclic'}"
        )
        if cyclic:
            folded = fold_join_graph(graph)
            print(
                f"after folding: {len(folded.nodes)} node(s), {len(folded.edges)} edge(s)"
            )
    return 0


_COMMANDS = {
    "load": _cmd_load,
    "query": _cmd_query,
    "rewrite": _cmd_rewrite,
    "compare": _cmd_compare,
    "graph": _cmd_graph,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SemanticError, ResultDbError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
