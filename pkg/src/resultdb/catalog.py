"""Catalog: relation schemas, keys, tuple sets, and database loading.

Databases are immutable after load. Relations are sets of tuples (duplicate
CSV rows are collapsed), and every relation declares a non-empty primary key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import DataError
from .values import VALUE_TYPES, Value, canonical_csv, matches_type, parse_csv, parse_value


@dataclass(frozen=True)
class ForeignKey:
    """Ordered attribute list referencing exactly one relation's primary key."""

    attributes: tuple[str, ...]
    references: str
    referenced_attributes: tuple[str, ...]

    def __post_init__(self):
        if len(self.attributes) != len(self.referenced_attributes):
            raise DataError(
                f"foreign key {self.attributes} -> {self.references}"
                f"{self.referenced_attributes}: attribute lists differ in length"
            )
        if not self.attributes:
            raise DataError(f"foreign key referencing {self.references!r} has no attributes")


@dataclass(frozen=True)
class RelationSchema:
    name: str
    attributes: tuple[tuple[str, str], ...]  # (attribute name, type name)
    primary_key: tuple[str, ...]
    foreign_keys: tuple[ForeignKey, ...] = ()

    def __post_init__(self):
        names = [a for a, _ in self.attributes]
        if len(set(names)) != len(names):
            raise DataError(f"relation {self.name!r} has duplicate attribute names")
        for attr, vtype in self.attributes:
            if vtype not in VALUE_TYPES:
                raise DataError(f"{self.name}.{attr}: unknown type {vtype!r}")
        if not self.primary_key:
            raise DataError(f"relation {self.name!r} has an empty primary key")
        for attr in self.primary_key:
            if attr not in names:
                raise DataError(f"primary key attribute {self.name}.{attr} does not exist")
        for fk in self.foreign_keys:
            for attr in fk.attributes:
                if attr not in names:
                    raise DataError(f"foreign key attribute {self.name}.{attr} does not exist")

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.attributes)

    @property
    def attribute_types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.attributes)

    def has_attribute(self, name: str) -> bool:
        return any(a == name for a, _ in self.attributes)

    def index_of(self, name: str) -> int:
        for i, (a, _) in enumerate(self.attributes):
            if a == name:
                return i
        raise DataError(f"relation {self.name!r} has no attribute {name!r}")

    def type_of(self, name: str) -> str:
        return self.attributes[self.index_of(name)][1]


@dataclass(frozen=True)
class RelationInstance:
    """A schema plus a duplicate-free set of typed tuples."""

    schema: RelationSchema
    rows: frozenset[tuple]

    def __post_init__(self):
        arity = len(self.schema.attributes)
        pk_idx = [self.schema.index_of(a) for a in self.schema.primary_key]
        seen_keys: dict[tuple, tuple] = {}
        for row in self.rows:
            if len(row) != arity:
                raise DataError(
                    f"relation {self.schema.name!r}: row {row!r} has arity "
                    f"{len(row)}, schema has {arity}"
                )
            for value, (attr, vtype) in zip(row, self.schema.attributes):
                if not matches_type(value, vtype):
                    raise DataError(
                        f"{self.schema.name}.{attr}: value {value!r} is not of type {vtype}"
                    )
            key = tuple(row[i] for i in pk_idx)
            if any(v is None for v in key):
                raise DataError(
                    f"relation {self.schema.name!r}: row {row!r} has a null "
                    "primary-key value"
                )
            if key in seen_keys:
                raise DataError(
                    f"relation {self.schema.name!r}: rows {seen_keys[key]!r} and {row!r} "
                    f"share primary key {key!r}"
                )
            seen_keys[key] = row

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class Database:
    relations: dict[str, RelationInstance]

    def __post_init__(self):
        for name, inst in self.relations.items():
            if name != inst.schema.name:
                raise DataError(f"relation {inst.schema.name!r} registered under key {name!r}")
            for fk in inst.schema.foreign_keys:
                target = self.relations.get(fk.references)
                if target is None:
                    raise DataError(
                        f"{name}: foreign key references unknown relation {fk.references!r}"
                    )
                if fk.referenced_attributes != target.schema.primary_key:
                    raise DataError(
                        f"{name}: foreign key {fk.attributes} must reference the primary "
                        f"key of {fk.references!r} ({target.schema.primary_key}), "
                        f"got {fk.referenced_attributes}"
                    )

    def relation(self, name: str) -> RelationInstance:
        try:
            return self.relations[name]
        except KeyError:
            raise DataError(f"unknown relation {name!r}") from None

    def schema(self, name: str) -> RelationSchema:
        return self.relation(name).schema


@dataclass
class LoadResult:
    database: Database
    duplicate_rows: dict[str, int] = field(default_factory=dict)

    @property
    def warnings(self) -> list[str]:
        return [
            f"relation {name!r}: {count} duplicate row(s) collapsed"
            for name, count in self.duplicate_rows.items()
        ]


def load_schema(schema_text: str) -> list[RelationSchema]:
    """Parse the JSON schema file format into relation schemas."""
    try:
        doc = json.loads(schema_text)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed schema JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("relations"), list):
        raise DataError('schema JSON must be an object with a "relations" list')
    schemas = []
    seen = set()
    for entry in doc["relations"]:
        try:
            name = entry["name"]
            attributes = tuple((a["name"], a["type"]) for a in entry["attributes"])
            primary_key = tuple(entry["primary_key"])
            foreign_keys = tuple(
                ForeignKey(
                    attributes=tuple(fk["attributes"]),
                    references=fk["references"],
                    referenced_attributes=tuple(fk["referenced_attributes"]),
                )
                for fk in entry.get("foreign_keys", [])
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed relation entry in schema JSON: {exc}") from None
        if name in seen:
            raise DataError(f"duplicate relation name {name!r} in schema")
        seen.add(name)
        schemas.append(RelationSchema(name, attributes, primary_key, foreign_keys))
    if not schemas:
        raise DataError("schema declares no relations")
    return schemas


def _load_relation(schema: RelationSchema, csv_text: str) -> tuple[RelationInstance, int]:
    header, raw_rows = parse_csv(csv_text)
    if tuple(header) != schema.attribute_names:
        raise DataError(
            f"relation {schema.name!r}: CSV header {header} does not match "
            f"schema attributes {list(schema.attribute_names)}"
        )
    rows: set[tuple] = set()
    duplicates = 0
    for raw in raw_rows:
        if len(raw) != len(schema.attributes):
            raise DataError(
                f"relation {schema.name!r}: CSV row {raw} has {len(raw)} fields, "
                f"expected {len(schema.attributes)}"
            )
        try:
            row = tuple(
                parse_value(cell, vtype) for cell, (_, vtype) in zip(raw, schema.attributes)
            )
        except DataError as exc:
            raise DataError(f"relation {schema.name!r}: {exc}") from None
        if row in rows:
            duplicates += 1
        else:
            rows.add(row)
    return RelationInstance(schema, frozenset(rows)), duplicates


def load_database(schema_text: str, csv_sources: Mapping[str, str]) -> LoadResult:
    """Build a Database from schema JSON and one CSV text per relation.

    Duplicate CSV rows collapse to one tuple and are counted per relation.
    """
    schemas = load_schema(schema_text)
    relations: dict[str, RelationInstance] = {}
    duplicate_rows: dict[str, int] = {}
    for schema in schemas:
        if schema.name not in csv_sources:
            raise DataError(f"no CSV source for relation {schema.name!r}")
        instance, duplicates = _load_relation(schema, csv_sources[schema.name])
        relations[schema.name] = instance
        if duplicates:
            duplicate_rows[schema.name] = duplicates
    return LoadResult(Database(relations), duplicate_rows)


def load_database_from_dir(schema_path: str | Path, data_dir: str | Path) -> LoadResult:
    """Load schema.json plus one `<relation>.csv` per relation from a directory."""
    schema_path = Path(schema_path)
    data_dir = Path(data_dir)
    try:
        schema_text = schema_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read schema file: {exc}") from None
    csv_sources = {}
    for schema in load_schema(schema_text):
        csv_path = data_dir / f"{schema.name}.csv"
        try:
            csv_sources[schema.name] = csv_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read data for relation {schema.name!r}: {exc}") from None
    return load_database(schema_text, csv_sources)


@dataclass(frozen=True)
class ForeignKeyViolation:
    relation: str
    foreign_key: ForeignKey
    row: tuple

    def __str__(self) -> str:
        values = tuple(self.row)
        return (
            f"{self.relation}.{','.join(self.foreign_key.attributes)} -> "
            f"{self.foreign_key.references}: row {values!r} has no referenced tuple"
        )


def validate_foreign_keys(db: Database) -> list[ForeignKeyViolation]:
    """Report every tuple whose FK values match no referenced primary key.

    Rows with a null in any FK attribute are skipped (nulls never match,
    following SQL's treatment of null foreign keys).
    """
    violations = []
    for name, inst in db.relations.items():
        for fk in inst.schema.foreign_keys:
            target = db.relation(fk.references)
            target_idx = [target.schema.index_of(a) for a in fk.referenced_attributes]
            referenced = {tuple(row[i] for i in target_idx) for row in target.rows}
            local_idx = [inst.schema.index_of(a) for a in fk.attributes]
            for row in sorted(inst.rows, key=repr):
                key = tuple(row[i] for i in local_idx)
                if any(v is None for v in key):
                    continue
                if key not in referenced:
                    violations.append(ForeignKeyViolation(name, fk, row))
    return violations


def relation_to_csv(instance: RelationInstance) -> str:
    return canonical_csv(instance.schema.attribute_names, instance.rows)


def schema_to_json(db: Database) -> str:
    doc = {
        "relations": [
            {
                "name": inst.schema.name,
                "attributes": [{"name": a, "type": t} for a, t in inst.schema.attributes],
                "primary_key": list(inst.schema.primary_key),
                "foreign_keys": [
                    {
                        "attributes": list(fk.attributes),
                        "references": fk.references,
                        "referenced_attributes": list(fk.referenced_attributes),
                    }
                    for fk in inst.schema.foreign_keys
                ],
            }
            for inst in db.relations.values()
        ]
    }
    return json.dumps(doc, indent=2) + "\n"


def write_database(db: Database, directory: str | Path) -> None:
    """Write schema.json and one canonical CSV per relation."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "schema.json").write_text(schema_to_json(db), encoding="utf-8")
    for name, inst in db.relations.items():
        (directory / f"{name}.csv").write_text(relation_to_csv(inst), encoding="utf-8")


def make_database(*relations: tuple[RelationSchema, set | frozenset]) -> Database:
    """Convenience constructor used by generators and tests."""
    return Database({s.name: RelationInstance(s, frozenset(rows)) for s, rows in relations})
