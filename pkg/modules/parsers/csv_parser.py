"""
CSV Parser - RFC 4180 tables with type inference or declared type hints
"""

import csv
import io
import logging
import re
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from core.errors import DataError, InvalidArgumentError, ParseError, SchemaError
from models.data_structures import (
    Column,
    ColumnType,
    DataElement,
    Modality,
    ParseOptions,
    Table,
)
from modules.parsers.base_parser import BaseParser, parser_registry

logger = logging.getLogger(__name__)

INTEGER_PATTERN = r"[+-]?\d+"
FLOAT_PATTERN = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
DATE_PATTERN = r"\d{4}-\d{2}-\d{2}(?:T\d{2}:\d{2}:\d{2}Z)?"
INT64 = np.iinfo(np.int64)


def _parse_dates(values: pd.Series) -> pd.Series:
    """ISO dates (optionally with a UTC time) to naive timestamps; bad cells become NaT"""
    text = values.str.replace(r"Z$", "", regex=True)
    return pd.to_datetime(text, errors="coerce", format="ISO8601")


def _within_int64(cells: pd.Series) -> pd.Series:
    """Mask of integer-shaped cells that fit a signed 64-bit integer"""
    return cells.map(lambda text: INT64.min <= int(text) <= INT64.max).astype(bool)


def _first_bad_row(ok: pd.Series) -> int:
    """1-based data row of the first False in a boolean mask"""
    return int(ok.to_numpy(dtype=bool).argmin()) + 1


class CsvParser(BaseParser):
    """
    CSV parser for tabular elements

    Framing is done by the stdlib csv reader (quoted commas, embedded
    newlines, doubled quotes, CRLF or LF); typing is vectorized through
    pandas. Without a hint a column is the first of Integer, Float, Date
    that fits every non-empty cell, else Text.
    """

    modality = Modality.TABULAR
    handles = (Table,)

    def parse(self, payload: bytes, options: ParseOptions) -> Table:
        try:
            text = payload.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise ParseError(f"CSV is not valid UTF-8 (byte {e.start})")
        if not text.strip():
            raise ParseError("CSV input is empty")

        reader = csv.reader(io.StringIO(text, newline=""), strict=True)
        try:
            header = next(reader)
            records: List[List[str]] = []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"row {len(records) + 1} (line {reader.line_num}) has {len(row)} fields, "
                        f"expected {len(header)}"
                    )
                records.append(row)
        except csv.Error as e:
            raise ParseError(f"malformed CSV at line {reader.line_num}: {e}")

        if not any(name.strip() for name in header):
            raise ParseError("CSV header row is empty")
        if len(set(header)) != len(header):
            duplicates = sorted({n for n in header if header.count(n) > 1})
            raise ParseError(f"duplicate column names in header: {', '.join(duplicates)}")
        unknown = sorted(set(options.column_types) - set(header))
        if unknown:
            raise InvalidArgumentError(f"type hints name unknown columns: {', '.join(unknown)}")

        raw = pd.DataFrame(records, columns=header, dtype=object) if records else pd.DataFrame(
            {name: pd.Series([], dtype=object) for name in header}
        )
        columns: List[Column] = []
        converted: Dict[str, pd.Series] = {}
        for name in header:
            cells = raw[name].astype("string")
            ctype = options.column_types.get(name) or self.infer_type(cells)
            columns.append(Column(name, ctype))
            converted[name] = self.convert(name, cells, ctype)

        try:
            table = Table(columns=columns, frame=pd.DataFrame(converted, columns=header))
        except SchemaError as e:
            raise ParseError(e.message)
        logger.debug("Parsed CSV: %d rows x %d columns", table.row_count, len(columns))
        return table

    @staticmethod
    def infer_type(cells: pd.Series) -> ColumnType:
        present = cells[cells.notna() & (cells != "")]
        if present.empty:
            return ColumnType.TEXT
        if bool(present.str.fullmatch(INTEGER_PATTERN).all()):
            # integer-shaped ids beyond int64 keep their digits as text
            return ColumnType.INTEGER if bool(_within_int64(present).all()) else ColumnType.TEXT
        if bool(present.str.fullmatch(FLOAT_PATTERN).all()):
            return ColumnType.FLOAT
        if bool(present.str.fullmatch(DATE_PATTERN).all()) and bool(_parse_dates(present).notna().all()):
            return ColumnType.DATE
        return ColumnType.TEXT

    @staticmethod
    def convert(name: str, cells: pd.Series, ctype: ColumnType) -> pd.Series:
        """Typed series for one column; empty cells become nulls

        Raises:
            DataError: a non-empty cell does not conform to the declared type
        """
        empty = cells.isna() | (cells == "")
        if ctype == ColumnType.TEXT:
            values = cells.astype(object)
            return values.where(~empty, None)
        if ctype == ColumnType.DATE:
            parsed = _parse_dates(cells.where(~empty, None))
        elif ctype == ColumnType.INTEGER:
            fits = cells.str.fullmatch(INTEGER_PATTERN).fillna(False) | empty
            if not bool(fits.all()):
                raise DataError(f"row {_first_bad_row(fits)}: column '{name}' is not an integer")
            in_range = _within_int64(cells.mask(empty, "0"))
            if not bool(in_range.all()):
                raise DataError(f"row {_first_bad_row(in_range)}: column '{name}' is outside the 64-bit integer range")
            values = [None if blank else int(text) for text, blank in zip(cells, empty)]
            return pd.Series(pd.array(values, dtype="Int64"), index=cells.index)
        else:
            parsed = pd.to_numeric(cells.where(~empty, None), errors="coerce")
        ok = parsed.notna() | empty
        if not bool(ok.all()):
            raise DataError(f"row {_first_bad_row(ok)}: column '{name}' does not hold {ctype.value} values")
        return parsed

    def load(self, element: DataElement, payload: bytes, options: ParseOptions) -> Table:
        hints = {
            c["name"]: ColumnType.parse(c["type"]) for c in element.schema.get("columns", [])
        }
        table = self.parse(payload, ParseOptions(column_types=hints))
        table.element_id = element.id
        return table

    def serialize(self, obj: Table) -> bytes:
        """LF-terminated CSV; floats in shortest round-trip form, dates in ISO form"""
        buffer = io.StringIO(newline="")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(obj.column_names)
        for row in obj.rows:
            writer.writerow([self._cell_text(value) for value in row])
        return buffer.getvalue().encode("utf-8")

    @staticmethod
    def _cell_text(value: Optional[Any]) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)


parser_registry.register(CsvParser)
