"""
Tabular toolkit: column selection, filtering, joins, aggregation and foreign-key inference
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from core import geoalign
from core.errors import PredicateError, SchemaError
from models.api_models import ParamKind, ToolSpec
from models.data_structures import Column, ColumnType, Modality, Table, TimeInterval
from modules.tools.predicates import Predicate
from modules.tools.registry import ToolContext, element, literal, tool_registry

logger = logging.getLogger(__name__)

AGGREGATES = ("count", "sum", "mean", "min", "max")
JOIN_KINDS = ("inner", "left")
RIGHT_PREFIX = "right."


def column_select(table: Table, names: List[str]) -> Table:
    """Restrict and reorder columns; every name must exist"""
    if len(set(names)) != len(names):
        raise SchemaError(f"column list repeats a name: {names}")
    columns = [table.column(name) for name in names]
    return table.with_frame(table.frame[names], columns)


def row_filter(table: Table, predicate: Predicate) -> Table:
    mask = predicate.mask(table)
    return table.with_frame(table.frame[mask.to_numpy(dtype=bool)])


def _comparable(left: Column, right: Column) -> bool:
    return left.type == right.type or (left.type.is_numeric and right.type.is_numeric)


def _join_key(table: Table, column: Column) -> pd.Series:
    values = table.frame[column.name]
    if column.type.is_numeric:
        return values.astype("Float64").astype(object).where(values.notna(), None)
    if column.type == ColumnType.DATE:
        return values.astype(object).where(values.notna(), None)
    return values.astype(object)


def join(left: Table, right: Table, left_key: str, right_key: str, kind: str = "inner") -> Table:
    """Equi-join keeping left row order, right matches in right input order

    Right columns whose names collide with left ones get a ``right.`` prefix.
    Null keys never match.
    """
    lk, rk = left.column(left_key), right.column(right_key)
    if not _comparable(lk, rk):
        raise SchemaError(f"join keys '{left_key}' ({lk.type.value}) and '{right_key}' ({rk.type.value}) differ in type")
    if kind not in JOIN_KINDS:
        raise SchemaError(f"join kind must be inner or left, got '{kind}'")

    taken = set(left.column_names)
    right_columns = [Column(RIGHT_PREFIX + c.name if c.name in taken else c.name, c.type) for c in right.columns]

    lframe = left.frame.copy()
    lframe.columns = [f"l{i}" for i in range(len(left.columns))]
    lframe["__key"] = _join_key(left, lk)
    lframe["__lpos"] = np.arange(len(lframe))
    rframe = right.frame.copy()
    rframe.columns = [f"r{i}" for i in range(len(right.columns))]
    rframe["__key"] = _join_key(right, rk)
    rframe["__rpos"] = np.arange(len(rframe))
    rframe = rframe[rframe["__key"].notna()]

    merged = lframe.merge(rframe, on="__key", how=kind, sort=False)
    merged = merged.sort_values(["__lpos", "__rpos"], kind="stable", na_position="last")
    frame = pd.DataFrame(
        {
            **{c.name: merged[f"l{i}"].to_numpy() for i, c in enumerate(left.columns)},
            **{c.name: merged[f"r{i}"].to_numpy() for i, c in enumerate(right_columns)},
        }
    )
    return Table(columns=left.columns + right_columns, frame=frame)


def aggregate(table: Table, agg: str, column: Optional[str] = None, group_by: Optional[str] = None) -> Table:
    """One row per group (first-appearance order) or one total row

    count counts rows, or non-null cells when a column is named; sum and mean
    skip nulls.
    """
    if agg not in AGGREGATES:
        raise PredicateError(f"unknown aggregate '{agg}'")
    target: Optional[Column] = table.column(column) if column else None
    if agg != "count":
        if target is None:
            raise PredicateError(f"{agg} needs a column")
        if not target.type.is_numeric:
            raise PredicateError(f"{agg} needs a numeric column, '{target.name}' is {target.type.value}")
    out_name = agg if target is None else f"{agg}_{target.name}"
    if agg == "count" or agg == "mean":
        out_type = ColumnType.INTEGER if agg == "count" else ColumnType.FLOAT
    else:
        out_type = ColumnType.INTEGER if target.type == ColumnType.INTEGER else ColumnType.FLOAT

    def reduce(frame: pd.DataFrame) -> Any:
        if agg == "count":
            return int(len(frame)) if target is None else int(frame[target.name].notna().sum())
        values = frame[target.name].dropna()
        if agg == "sum":
            return values.sum() if len(values) else 0
        if values.empty:
            return None
        return {"mean": values.mean, "min": values.min, "max": values.max}[agg]()

    if group_by is None:
        return Table.from_rows([Column(out_name, out_type)], [[reduce(table.frame)]])
    key = table.column(group_by)
    if out_name == key.name:
        out_name = f"{out_name}_value"
    rows = []
    for group_key, frame in table.frame.groupby(group_by, sort=False, dropna=False):
        rows.append([None if pd.isna(group_key) else group_key, reduce(frame)])
    return Table.from_rows([key, Column(out_name, out_type)], rows)


def _distinct(table: Table, column: Column) -> set:
    values = table.frame[column.name].dropna()
    if column.type.is_numeric:
        return {float(v) for v in values}
    return set(values.tolist())


def infer_foreign_keys(a: Table, b: Table, threshold: float = 0.5) -> Table:
    """Same-type column pairs ranked by Jaccard overlap of their distinct values"""
    candidates = []
    distinct_b = {c.name: _distinct(b, c) for c in b.columns}
    for ca in a.columns:
        values_a = _distinct(a, ca)
        for cb in b.columns:
            if ca.type != cb.type:
                continue
            values_b = distinct_b[cb.name]
            union = values_a | values_b
            if not union:
                continue
            score = len(values_a & values_b) / len(union)
            if score >= threshold:
                candidates.append((ca.name, cb.name, score))
    candidates.sort(key=lambda item: (-item[2], item[0], item[1]))
    columns = [Column("column_a", ColumnType.TEXT), Column("column_b", ColumnType.TEXT), Column("score", ColumnType.FLOAT)]
    return Table.from_rows(columns, [list(c) for c in candidates])


# ---------------------------------------------------------------------------
# Tool handlers
# ---------------------------------------------------------------------------


def _column_select_tool(ctx: ToolContext, table: Table, columns: List[str]) -> Table:
    return column_select(table, columns)


def _row_filter_tool(ctx: ToolContext, table: Table, predicate: Predicate) -> Table:
    return row_filter(table, predicate)


def _temporal_filter_tool(ctx: ToolContext, table: Table, date_column: str, interval: TimeInterval) -> Table:
    return geoalign.temporal_filter(table, date_column, interval)


def _join_tool(
    ctx: ToolContext, left: Table, right: Table, left_key: str, right_key: str, kind: str = "inner"
) -> Table:
    return join(left, right, left_key, right_key, kind)


def _aggregate_tool(
    ctx: ToolContext, table: Table, agg: str, column: Optional[str] = None, group_by: Optional[str] = None
) -> Table:
    return aggregate(table, agg, column, group_by)


def _infer_foreign_keys_tool(ctx: ToolContext, a: Table, b: Table, threshold: float) -> Table:
    return infer_foreign_keys(a, b, threshold)


TABLE = Modality.TABULAR

tool_registry.register(
    ToolSpec(
        "column_select",
        "Keep only the named columns of a table, in the given order.",
        (
            element("table", TABLE, "input table"),
            literal("columns", ParamKind.COLUMN_LIST, "column names to keep"),
        ),
        TABLE,
    ),
    _column_select_tool,
)
tool_registry.register(
    ToolSpec(
        "row_filter",
        "Keep rows satisfying a predicate. Predicates are JSON trees: {op: and|or, args}, {op: not, arg}, "
        "{op: =|!=|<|<=|>|>=, column, value, extract?: year|month}, {op: contains, column, value}.",
        (
            element("table", TABLE, "input table"),
            literal("predicate", ParamKind.PREDICATE, "row predicate"),
        ),
        TABLE,
    ),
    _row_filter_tool,
)
tool_registry.register(
    ToolSpec(
        "temporal_filter",
        "Keep rows whose date column falls inside a closed calendar interval.",
        (
            element("table", TABLE, "input table"),
            literal("date_column", ParamKind.TEXT, "column holding dates"),
            literal("interval", ParamKind.DATE_INTERVAL, "inclusive {start, end} in YYYY-MM-DD"),
        ),
        TABLE,
    ),
    _temporal_filter_tool,
)
tool_registry.register(
    ToolSpec(
        "join",
        "Equi-join two tables on key columns; colliding right columns get a 'right.' prefix.",
        (
            element("left", TABLE, "left table"),
            element("right", TABLE, "right table"),
            literal("left_key", ParamKind.TEXT, "key column of the left table"),
            literal("right_key", ParamKind.TEXT, "key column of the right table"),
            literal("kind", ParamKind.TEXT, "join kind", required=False, choices=JOIN_KINDS, default="inner"),
        ),
        TABLE,
    ),
    _join_tool,
)
tool_registry.register(
    ToolSpec(
        "aggregate",
        "Count, sum, mean, min or max over a table, optionally per group. The result column is 'count' "
        "for a plain row count, otherwise '<agg>_<column>'.",
        (
            element("table", TABLE, "input table"),
            literal("agg", ParamKind.TEXT, "aggregate function", choices=AGGREGATES),
            literal("column", ParamKind.TEXT, "column to aggregate", required=False),
            literal("group_by", ParamKind.TEXT, "grouping column", required=False),
        ),
        TABLE,
    ),
    _aggregate_tool,
)
tool_registry.register(
    ToolSpec(
        "infer_foreign_keys",
        "Rank same-type column pairs of two tables by Jaccard overlap of distinct values.",
        (
            element("a", TABLE, "first table"),
            element("b", TABLE, "second table"),
            literal("threshold", ParamKind.NUMBER, "minimum score", required=False, default_setting="FK_THRESHOLD"),
        ),
        TABLE,
    ),
    _infer_foreign_keys_tool,
)
