"""
Row predicates for row_filter.

A predicate is a JSON expression tree:

    {"op": "and" | "or", "args": [...]}
    {"op": "not", "arg": {...}}
    {"op": "true"}
    {"op": "=" | "!=" | "<" | "<=" | ">" | ">=", "column": c, "value": v, "extract": "year" | "month"}
    {"op": "contains", "column": c, "value": "text"}

Null cells fail every comparison.
"""

import operator
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import pandas as pd

from core.errors import InvalidArgumentError, PredicateError
from models.data_structures import ColumnType, Table, parse_timestamp

COMPARISONS: Dict[str, Tuple[str, Callable[[Any, Any], Any]]] = {
    "=": ("=", operator.eq),
    "==": ("=", operator.eq),
    "!=": ("!=", operator.ne),
    "≠": ("!=", operator.ne),
    "<": ("<", operator.lt),
    "<=": ("<=", operator.le),
    "≤": ("<=", operator.le),
    ">": (">", operator.gt),
    ">=": (">=", operator.ge),
    "≥": (">=", operator.ge),
}
EXTRACTORS = ("year", "month")


def _as_mask(values: Any, present: pd.Series) -> pd.Series:
    mask = pd.Series(values, index=present.index).astype("boolean").fillna(False).astype(bool)
    return mask & present


class Predicate:
    """Base class for predicate nodes"""

    def mask(self, table: Table) -> pd.Series:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class TruePredicate(Predicate):
    def mask(self, table: Table) -> pd.Series:
        return pd.Series(True, index=table.frame.index, dtype=bool)

    def to_dict(self) -> Dict[str, Any]:
        return {"op": "true"}


@dataclass(frozen=True)
class Comparison(Predicate):
    column: str
    op: str
    value: Any
    extract: Optional[str] = None

    def mask(self, table: Table) -> pd.Series:
        column = table.column(self.column)
        series = table.frame[self.column]
        present = series.notna().astype(bool)
        compare = COMPARISONS[self.op][1]

        if self.extract:
            if column.type != ColumnType.DATE:
                raise PredicateError(f"{self.extract}() needs a Date column, '{self.column}' is {column.type.value}")
            if not _is_number(self.value):
                raise PredicateError(f"{self.extract}({self.column}) compares against a number")
            parts = series.dt.year if self.extract == "year" else series.dt.month
            return _as_mask(compare(parts.astype("Float64"), float(self.value)), present)

        if column.type == ColumnType.DATE:
            if not isinstance(self.value, str):
                raise PredicateError(f"column '{self.column}' is a Date; compare against YYYY-MM-DD text")
            try:
                moment = pd.Timestamp(parse_timestamp(self.value)[0])
            except InvalidArgumentError as e:
                raise PredicateError(e.message)
            return _as_mask(compare(series, moment), present)

        if column.type.is_numeric:
            if not _is_number(self.value):
                raise PredicateError(f"column '{self.column}' is {column.type.value}; compare against a number")
            return _as_mask(compare(series.astype("Float64"), float(self.value)), present)

        if self.op not in ("=", "!="):
            raise PredicateError(f"'{self.op}' is not defined on Text column '{self.column}'")
        if not isinstance(self.value, str):
            raise PredicateError(f"column '{self.column}' is Text; compare against text")
        text = series.where(present, "").astype(str)
        return _as_mask(compare(text, self.value), present)

    def to_dict(self) -> Dict[str, Any]:
        data = {"op": self.op, "column": self.column, "value": self.value}
        if self.extract:
            data["extract"] = self.extract
        return data


@dataclass(frozen=True)
class Contains(Predicate):
    column: str
    value: str

    def mask(self, table: Table) -> pd.Series:
        column = table.column(self.column)
        if column.type != ColumnType.TEXT:
            raise PredicateError(f"contains needs a Text column, '{self.column}' is {column.type.value}")
        series = table.frame[self.column]
        present = series.notna().astype(bool)
        text = series.where(present, "").astype(str)
        return _as_mask(text.str.contains(self.value, regex=False), present)

    def to_dict(self) -> Dict[str, Any]:
        return {"op": "contains", "column": self.column, "value": self.value}


@dataclass(frozen=True)
class BoolOp(Predicate):
    op: str
    args: Tuple[Predicate, ...]

    def mask(self, table: Table) -> pd.Series:
        masks = [arg.mask(table) for arg in self.args]
        combined = masks[0]
        for other in masks[1:]:
            combined = (combined & other) if self.op == "and" else (combined | other)
        return combined

    def to_dict(self) -> Dict[str, Any]:
        return {"op": self.op, "args": [a.to_dict() for a in self.args]}


@dataclass(frozen=True)
class Not(Predicate):
    arg: Predicate

    def mask(self, table: Table) -> pd.Series:
        return ~self.arg.mask(table)

    def to_dict(self) -> Dict[str, Any]:
        return {"op": "not", "arg": self.arg.to_dict()}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def parse_predicate(data: Any) -> Predicate:
    """Build a predicate tree from its JSON form

    Raises:
        PredicateError: malformed expression
    """
    if isinstance(data, Predicate):
        return data
    if not isinstance(data, dict) or not isinstance(data.get("op"), str):
        raise PredicateError("predicate must be an object with an 'op'")
    op = data["op"].strip().lower()
    if op == "true":
        return TruePredicate()
    if op in ("and", "or"):
        args = data.get("args")
        if not isinstance(args, list) or not args:
            raise PredicateError(f"'{op}' needs a non-empty 'args' list")
        return BoolOp(op, tuple(parse_predicate(a) for a in args))
    if op == "not":
        return Not(parse_predicate(data.get("arg")))

    column = data.get("column")
    if not isinstance(column, str) or not column:
        raise PredicateError(f"'{op}' needs a 'column'")
    if "value" not in data or data["value"] is None:
        raise PredicateError(f"'{op}' on '{column}' needs a non-null 'value'")
    value = data["value"]
    if op == "contains":
        if not isinstance(value, str):
            raise PredicateError("contains compares against text")
        return Contains(column, value)
    if data["op"] not in COMPARISONS:
        raise PredicateError(f"unknown predicate operator '{data['op']}'")
    extract = data.get("extract")
    if extract is not None and extract not in EXTRACTORS:
        raise PredicateError(f"unknown extractor '{extract}' (year or month)")
    if not (isinstance(value, str) or _is_number(value)):
        raise PredicateError(f"comparison value must be text or a number, got {type(value).__name__}")
    if _is_number(value):
        value = float(value)
    return Comparison(column, COMPARISONS[data["op"]][0], value, extract)
