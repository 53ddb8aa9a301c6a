"""
Data structures for catalog elements and the three concrete modalities
"""

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import DataError, InvalidArgumentError, SchemaError


class Modality(Enum):
    """Kinds of data element held by the catalog"""

    TABULAR = "TABULAR"
    VECTOR = "VECTOR"
    POINT_CLOUD = "POINT_CLOUD"
    RASTER = "RASTER"
    SCALAR_RESULT = "SCALAR_RESULT"

    @classmethod
    def parse(cls, value: str) -> "Modality":
        try:
            return cls(str(value).upper())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise InvalidArgumentError(f"unknown modality {value!r} (expected one of {names})")


class ColumnType(Enum):
    """Declared type of a table column"""

    TEXT = "Text"
    INTEGER = "Integer"
    FLOAT = "Float"
    DATE = "Date"
    LONGITUDE = "Longitude"
    LATITUDE = "Latitude"

    @property
    def is_numeric(self) -> bool:
        return self in (ColumnType.INTEGER, ColumnType.FLOAT, ColumnType.LONGITUDE, ColumnType.LATITUDE)

    @classmethod
    def parse(cls, value: str) -> "ColumnType":
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise InvalidArgumentError(f"unknown column type {value!r}")


# ---------------------------------------------------------------------------
# Coordinate reference systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Crs:
    """Base class for coordinate reference systems"""

    @property
    def name(self) -> str:
        raise NotImplementedError

    @property
    def is_projected(self) -> bool:
        return True

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Wgs84Geographic(Crs):
    """Longitude/latitude degrees on the WGS84 ellipsoid"""

    @property
    def name(self) -> str:
        return "wgs84"

    @property
    def is_projected(self) -> bool:
        return False


@dataclass(frozen=True)
class UtmZone(Crs):
    """Universal Transverse Mercator zone, meters"""

    zone: int
    hemisphere: str = "N"

    def __post_init__(self):
        if not isinstance(self.zone, int) or not 1 <= self.zone <= 60:
            raise InvalidArgumentError(f"UTM zone must be in [1, 60], got {self.zone!r}")
        if self.hemisphere not in ("N", "S"):
            raise InvalidArgumentError(f"UTM hemisphere must be N or S, got {self.hemisphere!r}")

    @property
    def name(self) -> str:
        return f"utm:{self.zone}{self.hemisphere}"

    @property
    def central_meridian(self) -> float:
        return self.zone * 6.0 - 183.0

    @property
    def false_northing(self) -> float:
        return 10_000_000.0 if self.hemisphere == "S" else 0.0


@dataclass(frozen=True)
class LocalTangentPlane(Crs):
    """Equirectangular meters about an origin; used for small synthetic sites"""

    origin_lon: float
    origin_lat: float

    def __post_init__(self):
        if not -180.0 <= self.origin_lon <= 180.0:
            raise InvalidArgumentError(f"origin longitude out of range: {self.origin_lon}")
        if not -90.0 < self.origin_lat < 90.0:
            raise InvalidArgumentError(f"origin latitude must be in (-90, 90): {self.origin_lat}")

    @property
    def name(self) -> str:
        return f"ltp:{self.origin_lon!r},{self.origin_lat!r}"


WGS84 = Wgs84Geographic()


def parse_crs(text: Any) -> Crs:
    """Parse a CRS name such as ``wgs84``, ``utm:18N`` or ``ltp:-74.0,40.7``"""
    if isinstance(text, Crs):
        return text
    if not isinstance(text, str):
        raise InvalidArgumentError(f"CRS name must be text, got {type(text).__name__}")
    value = text.strip()
    lowered = value.lower()
    if lowered in ("wgs84", "epsg:4326"):
        return WGS84
    if lowered.startswith("utm:"):
        body = value[4:].strip()
        if len(body) < 2 or body[-1].upper() not in ("N", "S") or not body[:-1].isdigit():
            raise InvalidArgumentError(f"malformed UTM CRS {text!r} (expected utm:<zone><N|S>)")
        return UtmZone(int(body[:-1]), body[-1].upper())
    if lowered.startswith("ltp:"):
        parts = value[4:].split(",")
        if len(parts) != 2:
            raise InvalidArgumentError(f"malformed local tangent plane CRS {text!r}")
        try:
            return LocalTangentPlane(float(parts[0]), float(parts[1]))
        except ValueError:
            raise InvalidArgumentError(f"malformed local tangent plane CRS {text!r}")
    raise InvalidArgumentError(f"unknown CRS {text!r}")


# ---------------------------------------------------------------------------
# Geometry and time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeoPoint:
    """A coordinate pair with its CRS"""

    x: float
    y: float
    crs: Crs

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgumentError("point coordinates must be finite")
        if not self.crs.is_projected:
            if not -180.0 <= self.x <= 180.0 or not -90.0 <= self.y <= 90.0:
                raise InvalidArgumentError(f"WGS84 point out of range: ({self.x}, {self.y})")


Ring = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class PolygonGeometry:
    """Polygon with an exterior ring and optional holes, all in one CRS"""

    exterior: Ring
    holes: Tuple[Ring, ...] = ()
    crs: Crs = WGS84

    def __post_init__(self):
        for ring in (self.exterior, *self.holes):
            if len(ring) < 4:
                raise InvalidArgumentError(f"polygon ring needs at least 4 points, got {len(ring)}")
            if tuple(ring[0]) != tuple(ring[-1]):
                raise InvalidArgumentError("polygon ring is not closed")

    @classmethod
    def from_coordinates(cls, rings: Sequence[Sequence[Sequence[float]]], crs: Crs) -> "PolygonGeometry":
        if not rings:
            raise InvalidArgumentError("polygon has no rings")
        as_rings = [tuple((float(p[0]), float(p[1])) for p in ring) for ring in rings]
        return cls(exterior=as_rings[0], holes=tuple(as_rings[1:]), crs=crs)

    def rings(self) -> List[Ring]:
        return [self.exterior, *self.holes]

    def to_coordinates(self) -> List[List[List[float]]]:
        return [[[x, y] for x, y in ring] for ring in self.rings()]


def parse_timestamp(value: Any) -> Tuple[datetime, bool]:
    """Parse ``YYYY-MM-DD`` or ``YYYY-MM-DDTHH:MM:SSZ``; returns (value, date_only)"""
    if isinstance(value, datetime):
        return value.replace(tzinfo=None), False
    text = str(value).strip()
    for fmt, date_only in (("%Y-%m-%d", True), ("%Y-%m-%dT%H:%M:%SZ", False)):
        try:
            return datetime.strptime(text, fmt), date_only
        except ValueError:
            continue
    raise InvalidArgumentError(f"unparseable date {text!r} (expected YYYY-MM-DD or YYYY-MM-DDTHH:MM:SSZ)")


def format_timestamp(value: datetime, date_only: Optional[bool] = None) -> str:
    if date_only is None:
        date_only = value.hour == value.minute == value.second == 0 and value.microsecond == 0
    return value.strftime("%Y-%m-%d") if date_only else value.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class TimeInterval:
    """Closed calendar interval; a date-only end covers that whole day"""

    start: datetime
    end: datetime
    start_date_only: bool = True
    end_date_only: bool = True

    def __post_init__(self):
        if self.start > self.end:
            raise InvalidArgumentError(
                f"interval start {format_timestamp(self.start)} is after end {format_timestamp(self.end)}"
            )

    @classmethod
    def parse(cls, start: Any, end: Any) -> "TimeInterval":
        s, s_date = parse_timestamp(start)
        e, e_date = parse_timestamp(end)
        return cls(s, e, s_date, e_date)

    @classmethod
    def from_dict(cls, data: Any) -> "TimeInterval":
        if isinstance(data, TimeInterval):
            return data
        if not isinstance(data, dict) or "start" not in data or "end" not in data:
            raise InvalidArgumentError("time interval must be an object with 'start' and 'end'")
        return cls.parse(data["start"], data["end"])

    def to_dict(self) -> Dict[str, str]:
        return {
            "start": format_timestamp(self.start, self.start_date_only),
            "end": format_timestamp(self.end, self.end_date_only),
        }

    @property
    def end_exclusive(self) -> datetime:
        return self.end + timedelta(days=1) if self.end_date_only else self.end + timedelta(microseconds=1)

    def contains(self, moment: datetime) -> bool:
        return self.start <= moment < self.end_exclusive

    def contains_interval(self, other: "TimeInterval") -> bool:
        return self.start <= other.start and other.end_exclusive <= self.end_exclusive

    def mask(self, series: pd.Series) -> pd.Series:
        """Vectorized containment over a datetime series; NaT never matches"""
        inside = (series >= pd.Timestamp(self.start)) & (series < pd.Timestamp(self.end_exclusive))
        return inside.fillna(False).astype(bool)

    def __str__(self) -> str:
        d = self.to_dict()
        return f"{d['start']}..{d['end']}"


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType

    def to_dict(self) -> Dict[str, str]:
        return {"name": self.name, "type": self.type.value}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Column":
        return cls(name=str(data["name"]), type=ColumnType.parse(data["type"]))


def coerce_series(series: pd.Series, ctype: ColumnType) -> pd.Series:
    """Bring a column to the canonical pandas dtype for its declared type"""
    if ctype == ColumnType.TEXT:
        values = series.astype(object)
        return values.where(values.notna(), None)
    if ctype == ColumnType.INTEGER:
        return series.astype("Int64")
    if ctype.is_numeric:
        return series.astype("Float64")
    return pd.to_datetime(series)


def cell_to_python(value: Any, ctype: ColumnType) -> Any:
    """JSON-friendly python value for one cell"""
    if value is None or value is pd.NA or (not isinstance(value, str) and pd.isna(value)):
        return None
    if ctype == ColumnType.INTEGER:
        return int(value)
    if ctype.is_numeric:
        return float(value)
    if ctype == ColumnType.DATE:
        return format_timestamp(pd.Timestamp(value).to_pydatetime())
    return str(value)


@dataclass
class Table:
    """Typed in-memory table backed by a pandas frame"""

    columns: List[Column]
    frame: pd.DataFrame
    element_id: Optional[str] = None

    crs = None
    temporal_extent = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        if list(self.frame.columns) != names:
            self.frame = self.frame.reindex(columns=names)
        self.frame = pd.DataFrame(
            {c.name: coerce_series(self.frame[c.name], c.type) for c in self.columns},
            columns=names,
        ).reset_index(drop=True)
        for column in self.columns:
            if column.type in (ColumnType.LONGITUDE, ColumnType.LATITUDE):
                limit = 180.0 if column.type == ColumnType.LONGITUDE else 90.0
                values = self.frame[column.name]
                bad = values.notna() & ((values < -limit) | (values > limit))
                if bool(bad.any()):
                    row = int(np.flatnonzero(bad.to_numpy(dtype=bool))[0]) + 1
                    raise DataError(f"row {row}: {column.type.value.lower()} out of range in column '{column.name}'")

    @classmethod
    def from_rows(cls, columns: List[Column], rows: Sequence[Sequence[Any]]) -> "Table":
        names = [c.name for c in columns]
        frame = pd.DataFrame([list(r) for r in rows], columns=names, dtype=object) if rows else pd.DataFrame(
            {n: pd.Series([], dtype=object) for n in names}, columns=names
        )
        return cls(columns=list(columns), frame=frame)

    @property
    def column_names(self) -> List[str]:
        return [c.name for c in self.columns]

    @property
    def row_count(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> Column:
        for column in self.columns:
            if column.name == name:
                return column
        raise SchemaError(f"unknown column '{name}'; available columns: {', '.join(self.column_names)}")

    @property
    def rows(self) -> List[List[Any]]:
        return [
            [cell_to_python(v, c.type) for v, c in zip(record, self.columns)]
            for record in self.frame.itertuples(index=False, name=None)
        ]

    def records(self) -> List[Dict[str, Any]]:
        return [dict(zip(self.column_names, row)) for row in self.rows]

    def schema(self) -> Dict[str, Any]:
        return {"columns": [c.to_dict() for c in self.columns]}

    def stats(self) -> Dict[str, int]:
        return {"rows": self.row_count, "columns": len(self.columns)}

    def with_frame(self, frame: pd.DataFrame, columns: Optional[List[Column]] = None) -> "Table":
        return Table(columns=list(columns or self.columns), frame=frame)


# ---------------------------------------------------------------------------
# Point clouds and rasters
# ---------------------------------------------------------------------------


@dataclass
class PointCloud:
    """Classified LiDAR points in a projected CRS"""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    intensity: np.ndarray
    classification: np.ndarray
    crs: Optional[Crs] = None
    acquisition_time: Optional[TimeInterval] = None
    version: str = "1.2"
    point_format: int = 0
    scale: Tuple[float, float, float] = (0.01, 0.01, 0.01)
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    gps_time: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.x)
        if n == 0:
            raise DataError("point cloud is empty")
        for name in ("y", "z", "intensity", "classification"):
            if len(getattr(self, name)) != n:
                raise DataError(f"point attribute '{name}' has {len(getattr(self, name))} values, expected {n}")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all() and np.isfinite(self.z).all()):
            raise DataError("point cloud has non-finite coordinates")

    @property
    def temporal_extent(self) -> Optional[TimeInterval]:
        return self.acquisition_time

    @property
    def point_count(self) -> int:
        return len(self.x)

    def schema(self) -> Dict[str, Any]:
        attributes = ["x", "y", "z", "intensity", "classification"]
        if self.gps_time is not None:
            attributes.append("gps_time")
        return {"attributes": attributes, "point_format": self.point_format, "version": self.version}

    def stats(self) -> Dict[str, int]:
        return {"points": self.point_count}


class RasterBand(Enum):
    """Semantics of the values held by a raster band"""

    MAX_Z = "max_z"
    CLASS_CODE = "class_code"
    LULC_CLASS = "lulc_class"
    COUNT = "count"


@dataclass
class Raster:
    """Regular grid; row 0 is the southern (min-y) edge"""

    origin: GeoPoint
    cell_size: float
    band: np.ndarray
    band_kind: RasterBand
    nodata: float
    temporal_extent: Optional[TimeInterval] = None

    def __post_init__(self):
        if not self.cell_size > 0:
            raise InvalidArgumentError(f"cell size must be positive, got {self.cell_size}")
        if self.band.ndim != 2 or self.band.shape[0] < 1 or self.band.shape[1] < 1:
            raise InvalidArgumentError(f"raster band must be a non-empty 2-D grid, got shape {self.band.shape}")

    @property
    def crs(self) -> Crs:
        return self.origin.crs

    @property
    def height(self) -> int:
        return int(self.band.shape[0])

    @property
    def width(self) -> int:
        return int(self.band.shape[1])

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Center coordinates of every cell, each shaped like the band"""
        cols = self.origin.x + (np.arange(self.width) + 0.5) * self.cell_size
        rows = self.origin.y + (np.arange(self.height) + 0.5) * self.cell_size
        return np.meshgrid(cols, rows)

    def valid_mask(self) -> np.ndarray:
        return self.band != self.nodata

    def schema(self) -> Dict[str, Any]:
        return {
            "band": self.band_kind.value,
            "cell_size": float(self.cell_size),
            "dtype": str(self.band.dtype),
            "height": self.height,
            "nodata": self.nodata,
            "width": self.width,
        }

    def stats(self) -> Dict[str, int]:
        return {
            "cells": self.width * self.height,
            "nodata_cells": int((~self.valid_mask()).sum()),
        }


class LulcClass(IntEnum):
    """Five-class land use / land cover taxonomy"""

    VEGETATION = 1
    BUILDING = 2
    WATER = 3
    BARE_GROUND = 4
    OTHER = 5

    @property
    def label(self) -> str:
        return _LULC_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "LulcClass":
        for member, text in _LULC_LABELS.items():
            if text == label:
                return member
        raise InvalidArgumentError(f"unknown land cover class {label!r}")


_LULC_LABELS = {
    LulcClass.VEGETATION: "Vegetation",
    LulcClass.BUILDING: "Building",
    LulcClass.WATER: "Water",
    LulcClass.BARE_GROUND: "BareGround",
    LulcClass.OTHER: "Other",
}

LULC_NODATA = -1
CLASS_CODE_NODATA = -1
ELEVATION_NODATA = -9999.0


@dataclass
class LulcReport:
    """Land cover proportions inside one polygon"""

    polygon_key: str
    proportions: Dict[LulcClass, float]
    classified_cell_count: int
    label: Optional[str] = None

    def __post_init__(self):
        if self.classified_cell_count > 0:
            total = sum(self.proportions.values())
            if abs(total - 1.0) > 1e-9:
                raise DataError(f"land cover proportions sum to {total}, expected 1")
        if any(p < 0 or p > 1 for p in self.proportions.values()):
            raise DataError("land cover proportions must lie in [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "polygon_key": self.polygon_key,
            "label": self.label if self.label is not None else self.polygon_key,
            "classified_cell_count": self.classified_cell_count,
            "proportions": {c.label: self.proportions.get(c, 0.0) for c in LulcClass},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LulcReport":
        return cls(
            polygon_key=data["polygon_key"],
            proportions={LulcClass.from_label(k): float(v) for k, v in data["proportions"].items()},
            classified_cell_count=int(data["classified_cell_count"]),
            label=data.get("label"),
        )


# ---------------------------------------------------------------------------
# Vector layers and scalar results
# ---------------------------------------------------------------------------


@dataclass
class VectorFeature:
    key: str
    polygons: List[PolygonGeometry] = field(default_factory=list)
    point: Optional[GeoPoint] = None
    properties: Dict[str, Any] = field(default_factory=dict)

    @property
    def geometry_kind(self) -> str:
        if self.point is not None:
            return "Point"
        return "Polygon" if len(self.polygons) == 1 else "MultiPolygon"


@dataclass
class VectorLayer:
    """Keyed features sharing one CRS"""

    features: List[VectorFeature]
    crs: Crs
    key_property: str

    temporal_extent = None

    def keys(self) -> List[str]:
        return [f.key for f in self.features]

    def feature(self, key: str) -> Optional[VectorFeature]:
        for feature in self.features:
            if feature.key == key:
                return feature
        return None

    def polygon_features(self) -> List[VectorFeature]:
        features = [f for f in self.features if f.polygons]
        if len(features) != len(self.features):
            raise DataError("vector layer holds point features where polygons are required")
        return features

    def schema(self) -> Dict[str, Any]:
        kinds = sorted({"Point" if f.point is not None else "Polygon" for f in self.features})
        properties = sorted({name for f in self.features for name in f.properties})
        return {
            "geometry": kinds[0] if len(kinds) == 1 else "Mixed",
            "key_property": self.key_property,
            "properties": properties,
        }

    def stats(self) -> Dict[str, int]:
        return {"features": len(self.features)}


@dataclass
class ScalarResult:
    """Structured non-tabular result such as land cover proportions or point counts"""

    kind: str
    value: Dict[str, Any]
    temporal_extent: Optional[TimeInterval] = None

    crs = None

    def entries(self) -> List[Any]:
        return list(self.value.get("entries", []))

    def schema(self) -> Dict[str, Any]:
        return {"entries": len(self.entries()), "kind": self.kind}

    def stats(self) -> Dict[str, int]:
        return {"entries": len(self.entries())}


@dataclass
class ParseOptions:
    """Declared metadata passed to payload parsers"""

    crs: Optional[Crs] = None
    temporal_extent: Optional[TimeInterval] = None
    column_types: Dict[str, ColumnType] = field(default_factory=dict)
    key_property: Optional[str] = None


# ---------------------------------------------------------------------------
# Catalog elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperationDescriptor:
    """Tool name plus canonical parameters that produced a derived element"""

    name: str
    params: Dict[str, Any] = field(default_factory=dict, hash=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "params": self.params}


@dataclass(frozen=True)
class DataElement:
    """Immutable catalog node; roots carry a source, derived nodes carry parents and op"""

    id: str
    modality: Modality
    schema: Dict[str, Any] = field(hash=False)
    crs: Optional[Crs] = None
    temporal_extent: Optional[TimeInterval] = None
    source: Optional[Dict[str, Any]] = field(default=None, hash=False)
    parents: Tuple[str, ...] = ()
    op: Optional[OperationDescriptor] = None
    payload_digest: str = ""
    stats: Dict[str, Any] = field(default_factory=dict, hash=False, compare=False)

    @property
    def is_root(self) -> bool:
        return self.op is None

    @property
    def payload_ref(self) -> str:
        return f"blobs/{self.id}"

    @property
    def short_id(self) -> str:
        return self.id[:12]

    @property
    def name(self) -> Optional[str]:
        return (self.source or {}).get("name")

    def to_record(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "modality": self.modality.value,
            "schema": self.schema,
            "crs": self.crs.name if self.crs else None,
            "temporal_extent": self.temporal_extent.to_dict() if self.temporal_extent else None,
            "source": self.source,
            "parents": list(self.parents),
            "op": self.op.to_dict() if self.op else None,
            "payload_digest": self.payload_digest,
            "stats": self.stats,
        }

    @classmethod
    def from_record(cls, data: Dict[str, Any]) -> "DataElement":
        op = data.get("op")
        return cls(
            id=data["id"],
            modality=Modality(data["modality"]),
            schema=data["schema"],
            crs=parse_crs(data["crs"]) if data.get("crs") else None,
            temporal_extent=TimeInterval.from_dict(data["temporal_extent"]) if data.get("temporal_extent") else None,
            source=data.get("source"),
            parents=tuple(data.get("parents") or ()),
            op=OperationDescriptor(op["name"], op.get("params") or {}) if op else None,
            payload_digest=data["payload_digest"],
            stats=data.get("stats") or {},
        )
