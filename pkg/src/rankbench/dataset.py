"""Ranking dataset: schema declaration, ingestion, and validation.

A dataset is a flat table of (query, item, feature) rows, grouped by query.
Rows arrive precomputed from CSV or JSONL; loading materializes an immutable
:class:`DatasetTable` that every scorer and metric reads from. Missing values
are rejected at load time so downstream expression evaluation stays total.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
import sys
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import expr as E

KINDS = ("numeric", "categorical", "text", "boolean")
ROLES = ("query_key", "item_key", "query_feature", "item_feature")

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class DatasetError(Exception):
    pass


class SchemaError(DatasetError):
    pass


class MissingColumn(DatasetError):
    def __init__(self, column: str, row: int | None = None):
        self.column = column
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"missing value for column {column!r}{where}")


class DuplicatePair(DatasetError):
    def __init__(self, query_id, item_id):
        self.pair = (query_id, item_id)
        super().__init__(f"duplicate (query, item) pair: ({query_id!r}, {item_id!r})")


class TypeMismatch(DatasetError):
    def __init__(self, column: str, value, kind: str, row: int):
        self.column = column
        super().__init__(
            f"row {row}: value {value!r} in column {column!r} is not a valid {kind}"
        )


class EmptyDataset(DatasetError):
    pass


class InconsistentQueryFeatures(DatasetError):
    def __init__(self, query_id, column: str, row: int):
        super().__init__(
            f"row {row}: query {query_id!r} has conflicting values for "
            f"query-level column {column!r}"
        )


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    role: str


@dataclass(frozen=True)
class ItemRow:
    item_id: str | float
    features: Mapping[str, float | str]


@dataclass(frozen=True)
class QueryGroup:
    query_id: str | float
    query_features: Mapping[str, float | str]
    items: tuple[ItemRow, ...]


def validate_schema(schema: Sequence[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaError("column names must be unique")
    for col in schema:
        if not _NAME_RE.match(col.name or ""):
            raise SchemaError(f"invalid column name {col.name!r}")
        if col.kind not in KINDS:
            raise SchemaError(f"column {col.name!r}: unknown kind {col.kind!r}")
        if col.role not in ROLES:
            raise SchemaError(f"column {col.name!r}: unknown role {col.role!r}")
    for role in ("query_key", "item_key"):
        n = sum(1 for c in schema if c.role == role)
        if n != 1:
            raise SchemaError(f"schema must declare exactly one {role} column, found {n}")


class DatasetTable:
    """Immutable grouped table plus column-major views for batch evaluation.

    `columns` holds one array per declared column over all item rows in
    grouped order (float64 for numeric/boolean, object of str otherwise);
    `group_bounds[i]` is the [start, end) row span of group i.
    `query_columns` holds one value per group for query-level columns.
    """

    def __init__(
        self,
        schema: Sequence[ColumnSchema],
        groups: Sequence[QueryGroup],
        content_hash: str = "",
    ):
        validate_schema(schema)
        self.schema = tuple(schema)
        self.groups = tuple(groups)
        self.row_count = sum(len(g.items) for g in self.groups)
        self.content_hash = content_hash
        self.query_key = next(c.name for c in schema if c.role == "query_key")
        self.item_key = next(c.name for c in schema if c.role == "item_key")
        self._group_by_id = {str(g.query_id): g for g in self.groups}
        self._build_columns()

    def _build_columns(self) -> None:
        item_cols = [c for c in self.schema if c.role in ("item_key", "item_feature")]
        query_cols = [c for c in self.schema if c.role in ("query_key", "query_feature")]
        bounds: list[tuple[int, int]] = []
        pos = 0
        for g in self.groups:
            bounds.append((pos, pos + len(g.items)))
            pos += len(g.items)
        self.group_bounds = tuple(bounds)

        def new_array(kind: str, n: int) -> np.ndarray:
            return np.empty(n, dtype=np.float64 if kind in ("numeric", "boolean") else object)

        self.columns: dict[str, np.ndarray] = {}
        n = self.row_count
        for col in self.schema:
            self.columns[col.name] = new_array(col.kind, n)
        for g, (start, _end) in zip(self.groups, self.group_bounds):
            for c in query_cols:
                value = g.query_id if c.role == "query_key" else g.query_features[c.name]
                self.columns[c.name][start : start + len(g.items)] = value
            for offset, item in enumerate(g.items):
                for c in item_cols:
                    value = item.item_id if c.role == "item_key" else item.features[c.name]
                    self.columns[c.name][start + offset] = value

        self.query_columns: dict[str, np.ndarray] = {}
        for c in query_cols:
            arr = new_array(c.kind, len(self.groups))
            for i, g in enumerate(self.groups):
                arr[i] = g.query_id if c.role == "query_key" else g.query_features[c.name]
            self.query_columns[c.name] = arr

    # -- lookup ----------------------------------------------------------

    def group(self, query_id) -> QueryGroup | None:
        """Group for a query id, matched on its string form."""
        return self._group_by_id.get(str(query_id))

    def query_ids(self) -> list:
        return [g.query_id for g in self.groups]

    def column_kinds(self) -> dict[str, str]:
        return {c.name: c.kind for c in self.schema}

    def query_level_columns(self) -> frozenset[str]:
        return frozenset(
            c.name for c in self.schema if c.role in ("query_key", "query_feature")
        )

    def item_context(self, group: QueryGroup, item: ItemRow) -> dict[str, float | str]:
        """Bindings for one item row: query features merged with item features."""
        ctx = {self.query_key: group.query_id, **group.query_features}
        ctx[self.item_key] = item.item_id
        ctx.update(item.features)
        return ctx

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DatasetTable)
            and self.schema == other.schema
            and self.groups == other.groups
        )

    def __repr__(self) -> str:
        return (
            f"DatasetTable({len(self.groups)} groups, {self.row_count} rows, "
            f"{len(self.schema)} columns)"
        )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def load_dataset(
    source: bytes | IO[bytes], format: str, schema: Sequence[ColumnSchema]
) -> DatasetTable:
    """Materialize a dataset from CSV or JSONL bytes.

    Rows are grouped by query id in order of first appearance; row order
    within a group is file order. Every declared column must be present and
    parseable in every row.
    """
    validate_schema(schema)
    if format not in ("csv", "jsonl"):
        raise DatasetError(f"unknown format {format!r}")
    raw = source if isinstance(source, bytes) else source.read()
    content_hash = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"source is not valid UTF-8: {exc}") from None

    if format == "csv":
        rows = _iter_csv(text, schema)
    else:
        rows = _iter_jsonl(text, schema)
    groups = _group_rows(rows, schema)
    if not groups:
        raise EmptyDataset("dataset contains no rows")
    return DatasetTable(schema, groups, content_hash)


def load_dataset_file(path, format: str, schema: Sequence[ColumnSchema]) -> DatasetTable:
    with open(path, "rb") as fh:
        return load_dataset(fh.read(), format, schema)


def _iter_csv(text: str, schema: Sequence[ColumnSchema]) -> Iterator[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return
    header = set(reader.fieldnames)
    for col in schema:
        if col.name not in header:
            raise MissingColumn(col.name)
    for row_no, row in enumerate(reader, start=1):
        parsed = {}
        for col in schema:
            raw = row.get(col.name)
            if raw is None:
                raise MissingColumn(col.name, row_no)
            parsed[col.name] = _parse_csv_value(raw, col, row_no)
        yield parsed


def _iter_jsonl(text: str, schema: Sequence[ColumnSchema]) -> Iterator[dict]:
    row_no = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        row_no += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"row {row_no}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise DatasetError(f"row {row_no}: expected a JSON object per line")
        parsed = {}
        for col in schema:
            if col.name not in obj or obj[col.name] is None:
                raise MissingColumn(col.name, row_no)
            parsed[col.name] = _parse_json_value(obj[col.name], col, row_no)
        yield parsed


def _parse_csv_value(raw: str, col: ColumnSchema, row_no: int) -> float | str:
    if col.kind == "numeric":
        try:
            value = float(raw)
        except ValueError:
            raise TypeMismatch(col.name, raw, col.kind, row_no) from None
        if not math.isfinite(value):
            raise TypeMismatch(col.name, raw, col.kind, row_no)
        return value
    if col.kind == "boolean":
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "1.0"):
            return 1.0
        if lowered in ("false", "0", "0.0"):
            return 0.0
        raise TypeMismatch(col.name, raw, col.kind, row_no)
    if col.kind == "categorical":
        return sys.intern(raw)
    return raw  # text


def _parse_json_value(value, col: ColumnSchema, row_no: int) -> float | str:
    if col.kind == "numeric":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(col.name, value, col.kind, row_no)
        if not math.isfinite(value):
            raise TypeMismatch(col.name, value, col.kind, row_no)
        return float(value)
    if col.kind == "boolean":
        if isinstance(value, bool):
            return 1.0 if value else 0.0
        if isinstance(value, (int, float)) and value in (0, 1):
            return float(value)
        raise TypeMismatch(col.name, value, col.kind, row_no)
    if not isinstance(value, str):
        raise TypeMismatch(col.name, value, col.kind, row_no)
    return sys.intern(value) if col.kind == "categorical" else value


def _group_rows(rows: Iterable[dict], schema: Sequence[ColumnSchema]) -> list[QueryGroup]:
    query_key = next(c.name for c in schema if c.role == "query_key")
    item_key = next(c.name for c in schema if c.role == "item_key")
    query_feature_names = [c.name for c in schema if c.role == "query_feature"]
    item_feature_names = [c.name for c in schema if c.role == "item_feature"]

    order: list = []
    by_query: dict = {}
    seen_pairs: set = set()
    for row_no, row in enumerate(rows, start=1):
        qid = row[query_key]
        iid = row[item_key]
        if (qid, iid) in seen_pairs:
            raise DuplicatePair(qid, iid)
        seen_pairs.add((qid, iid))
        qfeats = {name: row[name] for name in query_feature_names}
        if qid not in by_query:
            order.append(qid)
            by_query[qid] = (qfeats, [])
        else:
            known, _ = by_query[qid]
            for name in query_feature_names:
                if known[name] != qfeats[name]:
                    raise InconsistentQueryFeatures(qid, name, row_no)
        by_query[qid][1].append(
            ItemRow(iid, {name: row[name] for name in item_feature_names})
        )
    return [
        QueryGroup(qid, by_query[qid][0], tuple(by_query[qid][1])) for qid in order
    ]


def to_csv(table: DatasetTable) -> str:
    """Serialize back to CSV in schema column order; reloading round-trips."""
    out = io.StringIO()
    writer = csv.writer(out)
    names = [c.name for c in table.schema]
    kinds = table.column_kinds()
    writer.writerow(names)
    for g in table.groups:
        for item in g.items:
            ctx = table.item_context(g, item)
            writer.writerow([_csv_cell(ctx[name], kinds[name]) for name in names])
    return out.getvalue()


def _csv_cell(value, kind: str) -> str:
    if kind in ("numeric", "boolean"):
        return repr(value)
    return value


# ---------------------------------------------------------------------------
# Reference validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    expr_index: int
    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def for_expr(self, index: int) -> list[ValidationIssue]:
        return [i for i in self.issues if i.expr_index == index]


def validate_references(
    dataset: DatasetTable, exprs: Sequence[E.Expr]
) -> ValidationReport:
    """Report unknown columns and type misuse for each parsed expression."""
    kinds = dataset.column_kinds()
    issues: list[ValidationIssue] = []
    for index, ast in enumerate(exprs):
        for issue in E.check_types(ast, kinds):
            issues.append(ValidationIssue(index, issue.kind, issue.message))
    return ValidationReport(tuple(issues))


def check_expr(
    dataset: DatasetTable,
    ast: E.Expr,
    *,
    query_level_only: bool = False,
    numeric_root: bool = True,
) -> list[E.TypeIssue]:
    """Type issues for a single expression, optionally restricted to query columns."""
    allowed = dataset.query_level_columns() if query_level_only else None
    return E.check_types(
        ast, dataset.column_kinds(), allowed=allowed, numeric_root=numeric_root
    )
