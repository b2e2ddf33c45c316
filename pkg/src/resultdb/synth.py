"""Synthetic databases and queries for demos, property suites, and sizing runs.

Everything here is seed-deterministic. Databases produced by these
generators always satisfy referential integrity.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .catalog import Database, ForeignKey, RelationSchema, make_database

_WORDS = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta")


def running_example() -> Database:
    """The professors / give / lectures database."""
    professors = RelationSchema(
        name="professors",
        attributes=(("id", "int"), ("name", "string"), ("age", "int")),
        primary_key=("id",),
    )
    lectures = RelationSchema(
        name="lectures",
        attributes=(("id", "int"), ("name", "string"), ("difficulty", "string")),
        primary_key=("id",),
    )
    give = RelationSchema(
        name="give",
        attributes=(("pid", "int"), ("lid", "int")),
        primary_key=("pid", "lid"),
        foreign_keys=(
            ForeignKey(("pid",), "professors", ("id",)),
            ForeignKey(("lid",), "lectures", ("id",)),
        ),
    )
    return make_database(
        (professors, {(0, "Prof. A", 49), (1, "Prof. B", 60), (2, "Prof. C", 32)}),
        (give, {(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 3)}),
        (
            lectures,
            {
                (0, "Computer Science", "low"),
                (1, "Databases", "low"),
                (2, "Mathematics", "high"),
                (3, "Artificial Intelligence", "high"),
            },
        ),
    )


RUNNING_EXAMPLE_QUERY = (
    "SELECT RESULTDB p.id, p.name, g.pid, g.lid, l.id, l.name, l.difficulty "
    "FROM professors AS p, give AS g, lectures AS l "
    "WHERE l.difficulty = 'low' AND p.id = g.pid AND l.id = g.lid;"
)

Q1_QUERY = (
    "SELECT p.name, l.name, l.difficulty "
    "FROM professors AS p, give AS g, lectures AS l "
    "WHERE l.difficulty = 'low' AND p.id = g.pid AND l.id = g.lid "
    "ORDER BY p.name;"
)


def triangle_example() -> Database:
    """The minimal cyclic database: every tuple has a partner in every relation,
    yet only one row joins."""
    r = RelationSchema("r", (("id", "int"),), ("id",))
    t = RelationSchema("t", (("id", "int"),), ("id",))
    s = RelationSchema(
        "s",
        (("rid", "int"), ("tid", "int")),
        ("rid", "tid"),
        (ForeignKey(("rid",), "r", ("id",)), ForeignKey(("tid",), "t", ("id",))),
    )
    return make_database(
        (r, {(0,), (1,)}),
        (s, {(0, 0), (0, 1), (1, 0)}),
        (t, {(0,), (1,)}),
    )


TRIANGLE_QUERY = (
    "SELECT RESULTDB * FROM r AS r, s AS s, t AS t "
    "WHERE r.id = s.rid AND s.tid = t.id AND r.id = t.id;"
)


def many_to_many(k: int) -> Database:
    """K professors x K lectures, every pair related; 20-character names.

    Ids start at 10000 so their digit count is constant across the K values
    used by the sizing workload, keeping per-row byte width fixed.
    """
    professors = RelationSchema(
        "professors", (("id", "int"), ("name", "string")), ("id",)
    )
    lectures = RelationSchema("lectures", (("id", "int"), ("name", "string")), ("id",))
    give = RelationSchema(
        "give",
        (("pid", "int"), ("lid", "int")),
        ("pid", "lid"),
        (
            ForeignKey(("pid",), "professors", ("id",)),
            ForeignKey(("lid",), "lectures", ("id",)),
        ),
    )
    prof_rows = {(10000 + i, f"professor-{i:010d}") for i in range(k)}
    lect_rows = {(10000 + i, f"lecture-idx-{i:08d}") for i in range(k)}
    give_rows = {(10000 + i, 10000 + j) for i in range(k) for j in range(k)}
    return make_database(
        (professors, prof_rows), (give, give_rows), (lectures, lect_rows)
    )


MANY_TO_MANY_QUERY = (
    "SELECT RESULTDB p.id, p.name, g.pid, g.lid, l.id, l.name "
    "FROM professors AS p, give AS g, lectures AS l "
    "WHERE p.id = g.pid AND l.id = g.lid;"
)


TOPOLOGIES = ("chain", "star", "cycle3", "chord4")


@dataclass
class Instance:
    """One randomized database + queries for the property suite."""

    seed: int
    topology: str
    cyclic: bool
    db: Database
    resultdb_query: str  # RESULTDB, possibly projected select list
    resultdb_all_query: str  # RESULTDB with * (full attributes)
    single_table_query: str  # no RESULTDB, projected select list


def _instance_edges(rng: random.Random, topology: str) -> tuple[int, list[tuple[int, int]]]:
    if topology == "chain":
        n = rng.randint(3, 6)
        return n, [(i, i + 1) for i in range(n - 1)]
    if topology == "star":
        n = rng.randint(3, 6)
        return n, [(0, i) for i in range(1, n)]
    if topology == "cycle3":
        return 3, [(0, 1), (1, 2), (0, 2)]
    if topology == "chord4":
        return 4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]
    raise ValueError(f"unknown topology {topology!r}")


def random_instance(seed: int) -> Instance:
    """Deterministically generate one small database plus matching queries.

    Relations carry one int column per incident edge plus an int payload and
    an optional nullable string tag; join values are drawn from skewed
    domains so instances range from empty joins to dense ones.
    """
    rng = random.Random(seed)
    topology = TOPOLOGIES[seed % len(TOPOLOGIES)]
    n, edges = _instance_edges(rng, topology)
    domain = rng.choice((2, 3, 5, 8, 16))

    # Column layout per relation: j<edge> join columns, payload, maybe tag.
    join_cols: dict[int, list[str]] = {i: [] for i in range(n)}
    predicates = []
    for a, b in edges:
        col_a = f"j{a}_{b}a"
        col_b = f"j{a}_{b}b"
        join_cols[a].append(col_a)
        join_cols[b].append(col_b)
        predicates.append(f"r{a}.{col_a} = r{b}.{col_b}")

    relations = []
    for i in range(n):
        # Relations either carry a surrogate id key (then tag may be null)
        # or use the whole tuple as a composite key (then no nulls at all).
        has_id = rng.random() < 0.7
        with_tag = rng.random() < 0.5
        attrs: list[tuple[str, str]] = [("id", "int")] if has_id else []
        attrs.extend((c, "int") for c in join_cols[i])
        attrs.append(("payload", "int"))
        if with_tag:
            attrs.append(("tag", "string"))
        n_rows = rng.randint(0, 30) if rng.random() < 0.15 else rng.randint(5, 30)
        rows = set()
        attempts = 0
        while len(rows) < n_rows and attempts < n_rows * 10:
            attempts += 1
            row: list = [len(rows)] if has_id else []
            row.extend(rng.randrange(domain) for _ in join_cols[i])
            row.append(rng.randrange(100))
            if with_tag:
                nullable = has_id and rng.random() < 0.1
                row.append(None if nullable else rng.choice(_WORDS))
            rows.add(tuple(row))
        primary_key = ("id",) if has_id else tuple(a for a, _ in attrs)
        schema = RelationSchema(f"r{i}", tuple(attrs), primary_key)
        relations.append((schema, rows))

    db = make_database(*relations)

    filters = []
    for i in range(n):
        if rng.random() < 0.4:
            op = rng.choice(("=", "<", "<=", ">", ">=", "<>"))
            filters.append(f"r{i}.payload {op} {rng.randrange(100)}")
        elif rng.random() < 0.15 and any(a == "tag" for a, _ in relations[i][0].attributes):
            filters.append(f"r{i}.tag = '{rng.choice(_WORDS)}'")
    conjuncts = predicates + filters
    from_clause = ", ".join(f"r{i} AS r{i}" for i in range(n))
    where_clause = " WHERE " + " AND ".join(conjuncts)

    all_query = f"SELECT RESULTDB * FROM {from_clause}{where_clause};"

    def projected_items(for_resultdb: bool) -> str:
        items = []
        for i in range(n):
            schema = relations[i][0]
            attrs = list(schema.attribute_names)
            keep = [a for a in attrs if rng.random() < 0.7]
            if for_resultdb and not keep and rng.random() < 0.5:
                continue  # drop the alias from the target entirely
            if not keep:
                keep = [attrs[0]]
            items.extend(f"r{i}.{a}" for a in keep)
        if not items:
            items = ["r0.payload"]
        return ", ".join(items)

    if rng.random() < 0.5:
        resultdb_query = all_query
    else:
        resultdb_query = (
            f"SELECT RESULTDB {projected_items(True)} FROM {from_clause}{where_clause};"
        )
    single_query = f"SELECT {projected_items(False)} FROM {from_clause}{where_clause};"

    return Instance(
        seed=seed,
        topology=topology,
        cyclic=topology in ("cycle3", "chord4"),
        db=db,
        resultdb_query=resultdb_query,
        resultdb_all_query=all_query,
        single_table_query=single_query,
    )


def suite(count: int = 200) -> list[Instance]:
    """The randomized property-suite instances (chains, stars, 3-cycles,
    4-cycles with a chord, in rotation)."""
    return [random_instance(seed) for seed in range(count)]
