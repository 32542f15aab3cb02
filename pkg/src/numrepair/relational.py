"""Typed relational instances, measure cells and attribute-level updates.

Tuples are identified by ``(relation, row index)`` so duplicate rows in a
table file stay distinct and each contributes separately to sums.  Numeric
values are exact: integer attributes hold ``int``, real attributes hold
``fractions.Fraction``.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .errors import InvalidUpdateError, LoadError, SchemaError

Value = Union[int, Fraction, str]
Number = Union[int, Fraction]

DOMAINS = ("integer", "real", "string")


class TupleId(NamedTuple):
    relation: str
    row: int

    def __str__(self) -> str:
        return f"{self.relation}[{self.row}]"


class CellRef(NamedTuple):
    """A ``(tuple, measure attribute)`` pair, the unit that updates touch."""

    relation: str
    row: int
    attribute: str

    @property
    def tuple_id(self) -> TupleId:
        return TupleId(self.relation, self.row)

    def __str__(self) -> str:
        return f"{self.relation}[{self.row}].{self.attribute}"


@dataclass(frozen=True)
class Attribute:
    name: str
    domain: str
    measure: bool = False

    @property
    def numeric(self) -> bool:
        return self.domain in ("integer", "real")


@dataclass(frozen=True)
class RelationSchema:
    name: str
    attributes: tuple[Attribute, ...]

    def __post_init__(self) -> None:
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"relation {self.name}: duplicate attribute names")
        for a in self.attributes:
            if a.domain not in DOMAINS:
                raise SchemaError(f"relation {self.name}: unknown domain {a.domain!r} for {a.name}")
            if a.measure and not a.numeric:
                raise SchemaError(
                    f"relation {self.name}: measure attribute {a.name} must be integer or real"
                )

    @property
    def arity(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def measures(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.measure)

    def index(self, attribute: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == attribute:
                return i
        raise KeyError(f"relation {self.name} has no attribute {attribute!r}")

    def attribute(self, name: str) -> Attribute:
        return self.attributes[self.index(name)]

    def has(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)


@dataclass(frozen=True)
class Schema:
    relations: tuple[RelationSchema, ...]

    def __post_init__(self) -> None:
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate relation names")

    def __getitem__(self, name: str) -> RelationSchema:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(f"unknown relation {name!r}")

    def __contains__(self, name: object) -> bool:
        return any(r.name == name for r in self.relations)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.relations)

    def to_text(self) -> str:
        lines = []
        for r in self.relations:
            attrs = ", ".join(
                f"{a.name}: {a.domain}{' measure' if a.measure else ''}" for a in r.attributes
            )
            lines.append(f"{r.name}({attrs})")
        return "\n".join(lines) + "\n"


_REL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")
_ATTR_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(integer|real|string)(\s+measure)?\s*$")


def parse_schema(text: str) -> Schema:
    """Parse schema text: one ``Name(attr: domain [measure], ...)`` per line.

    Blank lines and ``#`` comments are ignored.
    """
    relations = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _REL_RE.match(line)
        if not m:
            raise SchemaError(f"schema line {lineno}: expected Name(attr: domain, ...)")
        attrs = []
        for part in m.group(2).split(","):
            am = _ATTR_RE.match(part)
            if not am:
                raise SchemaError(f"schema line {lineno}: bad attribute declaration {part.strip()!r}")
            attrs.append(Attribute(am.group(1), am.group(2), am.group(3) is not None))
        relations.append(RelationSchema(m.group(1), tuple(attrs)))
    return Schema(tuple(relations))


def parse_value(domain: str, text: str) -> Value:
    """Parse a literal from a table file into its domain's Python type."""
    if domain == "string":
        return text
    s = text.strip()
    if domain == "integer":
        try:
            return int(s)
        except ValueError:
            # "4/2" or "3.0" are accepted when they denote an integer
            try:
                f = Fraction(s)
            except (ValueError, ZeroDivisionError):
                raise ValueError(f"{text!r} is not an integer") from None
            if f.denominator != 1:
                raise ValueError(f"{text!r} is not an integer") from None
            return int(f)
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{text!r} is not a real number") from None


def coerce_value(domain: str, value: object) -> Value:
    """Bring a Python value into ``domain``; raises ``ValueError`` if it does not fit."""
    if isinstance(value, bool):
        raise ValueError(f"{value!r} is not a {domain} value")
    if domain == "string":
        if not isinstance(value, str):
            raise ValueError(f"{value!r} is not a string")
        return value
    if isinstance(value, str):
        return parse_value(domain, value)
    if isinstance(value, float):
        value = Fraction(value)
    if not isinstance(value, (int, Fraction)):
        raise ValueError(f"{value!r} is not numeric")
    if domain == "integer":
        if Fraction(value).denominator != 1:
            raise ValueError(f"{value!r} is not an integer")
        return int(value)
    return Fraction(value)


def format_value(value: Value) -> str:
    if isinstance(value, Fraction) and value.denominator == 1:
        return str(value.numerator)
    return str(value)


@dataclass(frozen=True)
class Instance:
    """An immutable database instance: rows per relation, in load order."""

    schema: Schema
    relations: Mapping[str, tuple[tuple[Value, ...], ...]] = field(default_factory=dict)

    def rows(self, relation: str) -> tuple[tuple[Value, ...], ...]:
        return self.relations.get(relation, ())

    def tuple_ids(self, relation: str) -> list[TupleId]:
        return [TupleId(relation, i) for i in range(len(self.rows(relation)))]

    def row(self, tid: TupleId) -> tuple[Value, ...]:
        return self.rows(tid.relation)[tid.row]

    def value(self, cell: CellRef) -> Value:
        rel = self.schema[cell.relation]
        return self.rows(cell.relation)[cell.row][rel.index(cell.attribute)]

    def domain(self, cell: CellRef) -> str:
        return self.schema[cell.relation].attribute(cell.attribute).domain

    def measure_cells(self) -> list[CellRef]:
        """All measure cells, ordered by relation (schema order), row, attribute."""
        cells = []
        for rel in self.schema.relations:
            measures = rel.measures
            for i in range(len(self.rows(rel.name))):
                cells.extend(CellRef(rel.name, i, a) for a in measures)
        return cells

    def is_measure_cell(self, cell: CellRef) -> bool:
        if cell.relation not in self.schema:
            return False
        rel = self.schema[cell.relation]
        return (
            rel.has(cell.attribute)
            and rel.attribute(cell.attribute).measure
            and 0 <= cell.row < len(self.rows(cell.relation))
        )

    def size(self) -> int:
        return sum(len(self.rows(r)) for r in self.schema.names)

    def with_values(self, values: Mapping[CellRef, Value]) -> "Instance":
        """Copy of the instance with the given cells overwritten (no validation)."""
        if not values:
            return self
        by_rel: dict[str, dict[int, dict[int, Value]]] = {}
        for cell, v in values.items():
            idx = self.schema[cell.relation].index(cell.attribute)
            by_rel.setdefault(cell.relation, {}).setdefault(cell.row, {})[idx] = v
        new = dict(self.relations)
        for relname, changes in by_rel.items():
            rows = list(new[relname])
            for r, cols in changes.items():
                row = list(rows[r])
                for c, v in cols.items():
                    row[c] = v
                rows[r] = tuple(row)
            new[relname] = tuple(rows)
        return Instance(self.schema, new)


def make_instance(schema: Schema, data: Mapping[str, Iterable[Sequence[object]]]) -> Instance:
    """Build an instance from Python rows, coercing values to their domains."""
    relations: dict[str, tuple[tuple[Value, ...], ...]] = {}
    for rel in schema.relations:
        rows = []
        for i, raw in enumerate(data.get(rel.name, ())):
            if len(raw) != rel.arity:
                raise LoadError(f"{rel.name} row {i}: expected {rel.arity} values, got {len(raw)}")
            row = []
            for a, v in zip(rel.attributes, raw):
                try:
                    row.append(coerce_value(a.domain, v))
                except ValueError as exc:
                    raise LoadError(f"{rel.name} row {i}, column {a.name}: {exc}") from None
            rows.append(tuple(row))
        relations[rel.name] = tuple(rows)
    unknown = set(data) - set(schema.names)
    if unknown:
        raise LoadError(f"data for unknown relations: {sorted(unknown)}")
    return Instance(schema, relations)


def read_table(rel: RelationSchema, text: str, source: str = "<table>") -> tuple[tuple[Value, ...], ...]:
    reader = csv.reader(io.StringIO(text), skipinitialspace=True)
    try:
        header = next(reader)
    except StopIteration:
        raise LoadError(f"{source}: missing header row") from None
    header = [h.strip() for h in header]
    if tuple(header) != rel.attribute_names:
        raise LoadError(
            f"{source}: header {header} does not match schema {list(rel.attribute_names)}"
        )
    rows = []
    for i, raw in enumerate(reader):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != rel.arity:
            raise LoadError(f"{rel.name} row {len(rows)}: expected {rel.arity} values, got {len(raw)}")
        row = []
        for a, cell in zip(rel.attributes, raw):
            try:
                row.append(parse_value(a.domain, cell))
            except ValueError as exc:
                raise LoadError(f"{rel.name} row {len(rows)}, column {a.name}: {exc}") from None
        rows.append(tuple(row))
    return tuple(rows)


def load_instance(schema_text: str, table_files: Mapping[str, Union[str, Path]]) -> Instance:
    """Load an instance from schema text and one CSV file per relation.

    ``table_files`` maps relation names to paths.  Rows keep file order.
    """
    schema = parse_schema(schema_text)
    relations = {}
    for rel in schema.relations:
        if rel.name not in table_files:
            raise LoadError(f"no table file for relation {rel.name}")
        path = Path(table_files[rel.name])
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise LoadError(f"cannot read table file for {rel.name}: {exc}") from None
        relations[rel.name] = read_table(rel, text, str(path))
    return Instance(schema, relations)


def write_table(instance: Instance, relation: str) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(instance.schema[relation].attribute_names)
    for row in instance.rows(relation):
        writer.writerow([format_value(v) for v in row])
    return out.getvalue()


class Update(NamedTuple):
    cell: CellRef
    value: Number


@dataclass(frozen=True)
class UpdateSet:
    """A consistent database update: atomic updates on pairwise distinct cells."""

    updates: tuple[Update, ...] = ()

    @property
    def support(self) -> frozenset[CellRef]:
        return frozenset(u.cell for u in self.updates)

    def as_dict(self) -> dict[CellRef, Number]:
        return {u.cell: u.value for u in self.updates}

    def __len__(self) -> int:
        return len(self.updates)

    def __iter__(self):
        return iter(self.updates)


def validate_update_set(instance: Instance, updates: Iterable[object]) -> UpdateSet:
    """Check that ``updates`` is a consistent database update on ``instance``.

    Accepts ``Update`` objects or ``(cell, value)`` pairs.  Every target must
    be a measure cell, targets must be pairwise distinct, and each new value
    must lie in the attribute domain and differ from the current value.
    """
    seen: set[CellRef] = set()
    out = []
    for item in updates:
        cell, value = item  # type: ignore[misc]
        cell = CellRef(*cell)
        if cell.relation not in instance.schema:
            raise InvalidUpdateError(f"unknown relation {cell.relation!r}")
        rel = instance.schema[cell.relation]
        if not rel.has(cell.attribute):
            raise InvalidUpdateError(f"relation {rel.name} has no attribute {cell.attribute!r}")
        if not rel.attribute(cell.attribute).measure:
            raise InvalidUpdateError(f"{cell}: {cell.attribute} is not a measure attribute")
        if not 0 <= cell.row < len(instance.rows(cell.relation)):
            raise InvalidUpdateError(f"{cell}: no such row")
        if cell in seen:
            raise InvalidUpdateError(f"not a consistent database update: {cell} is updated twice")
        seen.add(cell)
        try:
            new = coerce_value(instance.domain(cell), value)
        except ValueError as exc:
            raise InvalidUpdateError(f"{cell}: {exc}") from None
        if new == instance.value(cell):
            raise InvalidUpdateError(f"{cell}: new value equals the current value {format_value(new)}")
        out.append(Update(cell, new))
    return UpdateSet(tuple(out))


def apply_update_set(instance: Instance, updates: UpdateSet) -> Instance:
    """Return ``U(D)``: the instance with every atomic update performed."""
    return instance.with_values(updates.as_dict())
