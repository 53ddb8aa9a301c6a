"""
Horizontal alignment: CRS transforms, spatial predicates and measures.

Every geometry carries its CRS and nothing is reprojected implicitly.
WGS84 is the interchange system; UTM zones are the analysis systems and
use the ellipsoidal Transverse Mercator series truncated at n**4.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import (
    AlignmentError,
    DataError,
    InvalidArgumentError,
    OutOfDomainError,
    SchemaError,
    UnsupportedTransformError,
)
from models.data_structures import (
    WGS84,
    Column,
    ColumnType,
    Crs,
    GeoPoint,
    LocalTangentPlane,
    PolygonGeometry,
    Ring,
    Table,
    TimeInterval,
    UtmZone,
    VectorFeature,
    VectorLayer,
    Wgs84Geographic,
    parse_timestamp,
)

logger = logging.getLogger(__name__)

# WGS84 ellipsoid
SEMI_MAJOR_AXIS = 6378137.0
FLATTENING = 1 / 298.257223563

UTM_SCALE_FACTOR = 0.9996
UTM_FALSE_EASTING = 500_000.0
UTM_MAX_OFFSET_DEGREES = 7.0

SQUARE_METERS_PER_ACRE = 4046.8564224


def _series_coefficients():
    n = FLATTENING / (2 - FLATTENING)
    n2, n3, n4 = n ** 2, n ** 3, n ** 4
    rectifying_radius = SEMI_MAJOR_AXIS / (1 + n) * (1 + n2 / 4 + n4 / 64)
    alpha = (
        n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180,
        13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440,
        61 * n3 / 240 - 103 * n4 / 140,
        49561 * n4 / 161280,
    )
    beta = (
        n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360,
        n2 / 48 + n3 / 15 - 437 * n4 / 1440,
        17 * n3 / 480 - 37 * n4 / 840,
        4397 * n4 / 161280,
    )
    delta = (
        2 * n - 2 * n2 / 3 - 2 * n3 + 116 * n4 / 45,
        7 * n2 / 3 - 8 * n3 / 5 - 227 * n4 / 45,
        56 * n3 / 15 - 136 * n4 / 35,
        4279 * n4 / 630,
    )
    eccentricity = 2 * math.sqrt(n) / (1 + n)
    return rectifying_radius, alpha, beta, delta, eccentricity


RECTIFYING_RADIUS, ALPHA, BETA, DELTA, ECCENTRICITY = _series_coefficients()


def utm_zone_for(lon: float, lat: float) -> UtmZone:
    """UTM zone containing a WGS84 coordinate; latitude 0 belongs to the north"""
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise InvalidArgumentError(f"WGS84 coordinate out of range: ({lon}, {lat})")
    zone = min(max(int(math.floor((lon + 180.0) / 6.0)) + 1, 1), 60)
    return UtmZone(zone, "N" if lat >= 0 else "S")


def _normalize_longitude(delta: np.ndarray) -> np.ndarray:
    return (delta + 180.0) % 360.0 - 180.0


# ---------------------------------------------------------------------------
# Array transforms
# ---------------------------------------------------------------------------


def _wgs84_to_utm(lon: np.ndarray, lat: np.ndarray, zone: UtmZone) -> Tuple[np.ndarray, np.ndarray]:
    offset = _normalize_longitude(lon - zone.central_meridian)
    if offset.size and float(np.abs(offset).max()) > UTM_MAX_OFFSET_DEGREES:
        raise OutOfDomainError(
            f"longitude is more than {UTM_MAX_OFFSET_DEGREES:g} degrees from the central meridian of {zone.name}"
        )
    phi = np.radians(lat)
    lam = np.radians(offset)
    sin_phi = np.sin(phi)
    t = np.sinh(np.arctanh(sin_phi) - ECCENTRICITY * np.arctanh(ECCENTRICITY * sin_phi))
    xi_prime = np.arctan2(t, np.cos(lam))
    eta_prime = np.arctanh(np.sin(lam) / np.sqrt(1 + t * t))
    xi, eta = xi_prime.copy(), eta_prime.copy()
    for j, coefficient in enumerate(ALPHA, start=1):
        xi += coefficient * np.sin(2 * j * xi_prime) * np.cosh(2 * j * eta_prime)
        eta += coefficient * np.cos(2 * j * xi_prime) * np.sinh(2 * j * eta_prime)
    scale = UTM_SCALE_FACTOR * RECTIFYING_RADIUS
    return UTM_FALSE_EASTING + scale * eta, zone.false_northing + scale * xi


def _utm_to_wgs84(easting: np.ndarray, northing: np.ndarray, zone: UtmZone) -> Tuple[np.ndarray, np.ndarray]:
    scale = UTM_SCALE_FACTOR * RECTIFYING_RADIUS
    xi = (northing - zone.false_northing) / scale
    eta = (easting - UTM_FALSE_EASTING) / scale
    xi_prime, eta_prime = xi.copy(), eta.copy()
    for j, coefficient in enumerate(BETA, start=1):
        xi_prime -= coefficient * np.sin(2 * j * xi) * np.cosh(2 * j * eta)
        eta_prime -= coefficient * np.cos(2 * j * xi) * np.sinh(2 * j * eta)
    chi = np.arcsin(np.sin(xi_prime) / np.cosh(eta_prime))
    phi = chi.copy()
    for j, coefficient in enumerate(DELTA, start=1):
        phi += coefficient * np.sin(2 * j * chi)
    offset = np.degrees(np.arctan2(np.sinh(eta_prime), np.cos(xi_prime)))
    if offset.size and float(np.abs(offset).max()) > UTM_MAX_OFFSET_DEGREES:
        raise OutOfDomainError(f"coordinate lies outside the valid band of {zone.name}")
    return _normalize_longitude(zone.central_meridian + offset), np.degrees(phi)


def _wgs84_to_ltp(lon: np.ndarray, lat: np.ndarray, plane: LocalTangentPlane) -> Tuple[np.ndarray, np.ndarray]:
    x = SEMI_MAJOR_AXIS * np.radians(_normalize_longitude(lon - plane.origin_lon)) * math.cos(math.radians(plane.origin_lat))
    y = SEMI_MAJOR_AXIS * np.radians(lat - plane.origin_lat)
    return x, y


def _ltp_to_wgs84(x: np.ndarray, y: np.ndarray, plane: LocalTangentPlane) -> Tuple[np.ndarray, np.ndarray]:
    lon = plane.origin_lon + np.degrees(x / (SEMI_MAJOR_AXIS * math.cos(math.radians(plane.origin_lat))))
    lat = plane.origin_lat + np.degrees(y / SEMI_MAJOR_AXIS)
    return _normalize_longitude(lon), lat


def _to_wgs84(x: np.ndarray, y: np.ndarray, src: Crs) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(src, Wgs84Geographic):
        return x, y
    if isinstance(src, UtmZone):
        return _utm_to_wgs84(x, y, src)
    if isinstance(src, LocalTangentPlane):
        return _ltp_to_wgs84(x, y, src)
    raise UnsupportedTransformError(f"no transform from {src} to wgs84")


def _from_wgs84(lon: np.ndarray, lat: np.ndarray, dst: Crs) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(dst, Wgs84Geographic):
        return lon, lat
    if isinstance(dst, UtmZone):
        return _wgs84_to_utm(lon, lat, dst)
    if isinstance(dst, LocalTangentPlane):
        return _wgs84_to_ltp(lon, lat, dst)
    raise UnsupportedTransformError(f"no transform from wgs84 to {dst}")


def transform_coordinates(x: Any, y: Any, src: Crs, dst: Crs) -> Tuple[np.ndarray, np.ndarray]:
    """Transform coordinate arrays between supported CRS pairs, composing through WGS84

    Raises:
        UnsupportedTransformError: either CRS has no transform
        OutOfDomainError: a coordinate lies outside the target zone's validity band
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if src == dst:
        return xs, ys
    lon, lat = _to_wgs84(xs, ys, src)
    return _from_wgs84(lon, lat, dst)


# ---------------------------------------------------------------------------
# Geometry reprojection
# ---------------------------------------------------------------------------


def _reproject_ring(ring: Ring, src: Crs, dst: Crs) -> Ring:
    coords = np.asarray(ring, dtype=np.float64)
    xs, ys = transform_coordinates(coords[:, 0], coords[:, 1], src, dst)
    return tuple(zip(xs.tolist(), ys.tolist()))


def reproject(geometry: Any, dst: Crs) -> Any:
    """Reproject a GeoPoint, PolygonGeometry, VectorFeature or VectorLayer into dst"""
    if isinstance(geometry, GeoPoint):
        if geometry.crs == dst:
            return geometry
        xs, ys = transform_coordinates([geometry.x], [geometry.y], geometry.crs, dst)
        return GeoPoint(float(xs[0]), float(ys[0]), dst)
    if isinstance(geometry, PolygonGeometry):
        if geometry.crs == dst:
            return geometry
        return PolygonGeometry(
            exterior=_reproject_ring(geometry.exterior, geometry.crs, dst),
            holes=tuple(_reproject_ring(h, geometry.crs, dst) for h in geometry.holes),
            crs=dst,
        )
    if isinstance(geometry, VectorFeature):
        return VectorFeature(
            key=geometry.key,
            polygons=[reproject(p, dst) for p in geometry.polygons],
            point=reproject(geometry.point, dst) if geometry.point is not None else None,
            properties=dict(geometry.properties),
        )
    if isinstance(geometry, VectorLayer):
        return reproject_layer(geometry, dst)
    raise InvalidArgumentError(f"cannot reproject a {type(geometry).__name__}")


def reproject_layer(layer: VectorLayer, dst: Crs) -> VectorLayer:
    if layer.crs == dst:
        return layer
    logger.debug("Reprojecting %d features from %s to %s", len(layer.features), layer.crs, dst)
    return VectorLayer(
        features=[reproject(f, dst) for f in layer.features],
        crs=dst,
        key_property=layer.key_property,
    )


def default_analysis_crs(layer: VectorLayer) -> Crs:
    """Projected layers keep their CRS; geographic ones use the UTM zone of their centroid"""
    if layer.crs.is_projected:
        return layer.crs
    points = [p for f in layer.features for poly in f.polygons for p in poly.exterior[:-1]]
    points += [(f.point.x, f.point.y) for f in layer.features if f.point is not None]
    if not points:
        raise DataError("layer has no coordinates to place an analysis CRS")
    coords = np.asarray(points, dtype=np.float64)
    return utm_zone_for(float(coords[:, 0].mean()), float(coords[:, 1].mean()))


# ---------------------------------------------------------------------------
# Predicates and measures
# ---------------------------------------------------------------------------


def validate_ring(ring: Ring) -> None:
    """Reject rings whose non-adjacent edges touch or cross

    Raises:
        InvalidArgumentError: the ring self-intersects
    """
    coords = np.asarray(ring, dtype=np.float64)
    starts, ends = coords[:-1], coords[1:]
    count = len(starts)
    if count < 4:
        return

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    def on_segment(a, b, c):
        return (
            (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
        )

    a, b = starts[:, None, :], ends[:, None, :]
    c, d = starts[None, :, :], ends[None, :, :]
    d1, d2 = orient(a, b, c), orient(a, b, d)
    d3, d4 = orient(c, d, a), orient(c, d, b)
    hits = ((d1 * d2 < 0) & (d3 * d4 < 0))
    hits |= (d1 == 0) & on_segment(a, b, c)
    hits |= (d2 == 0) & on_segment(a, b, d)
    hits |= (d3 == 0) & on_segment(c, d, a)
    hits |= (d4 == 0) & on_segment(c, d, b)

    i, j = np.indices((count, count))
    candidates = (j > i + 1) & ~((i == 0) & (j == count - 1))
    crossing = np.argwhere(hits & candidates)
    if len(crossing):
        first, second = crossing[0]
        raise InvalidArgumentError(f"ring self-intersects between edges {first + 1} and {second + 1}")


def points_in_polygon(xs: Any, ys: Any, polygon: PolygonGeometry) -> np.ndarray:
    """Even-odd containment of many points in one polygon; holes count as outside"""
    px = np.asarray(xs, dtype=np.float64)
    py = np.asarray(ys, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for ring in polygon.rings():
            coords = np.asarray(ring, dtype=np.float64)
            for (x1, y1), (x2, y2) in zip(coords[:-1], coords[1:]):
                straddles = (y1 > py) != (y2 > py)
                crossing_x = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                inside ^= straddles & (px < crossing_x)
    return inside


def _require_projected(crs: Crs, what: str) -> None:
    if not crs.is_projected:
        raise AlignmentError(f"{what} uses geographic coordinates; reproject to a projected CRS first")


def point_in_polygon(point: GeoPoint, polygon: PolygonGeometry) -> bool:
    """Even-odd ray casting in a shared projected CRS

    Raises:
        AlignmentError: CRS mismatch or geographic CRS
    """
    if point.crs != polygon.crs:
        raise AlignmentError(f"point is in {point.crs} but polygon is in {polygon.crs}")
    _require_projected(polygon.crs, "polygon")
    return bool(points_in_polygon([point.x], [point.y], polygon)[0])


@dataclass(frozen=True)
class AreaMeasure:
    square_meters: float
    acres: float

    def to_dict(self) -> Dict[str, float]:
        return {"square_meters": self.square_meters, "acres": self.acres}


def _ring_area(ring: Ring) -> float:
    coords = np.asarray(ring, dtype=np.float64)
    # Work relative to the first vertex so large projected coordinates keep precision.
    rel = coords - coords[0]
    x, y = rel[:-1, 0], rel[:-1, 1]
    x_next, y_next = rel[1:, 0], rel[1:, 1]
    return abs(float(np.sum(x * y_next - x_next * y))) / 2.0


def polygon_area(polygon: PolygonGeometry) -> AreaMeasure:
    """Planar shoelace area of the exterior minus holes

    Raises:
        InvalidArgumentError: the polygon is in geographic coordinates
    """
    if not polygon.crs.is_projected:
        raise InvalidArgumentError("polygon_area needs a projected CRS; reproject first")
    area = _ring_area(polygon.exterior) - sum(_ring_area(h) for h in polygon.holes)
    area = abs(area)
    return AreaMeasure(square_meters=area, acres=area / SQUARE_METERS_PER_ACRE)


# ---------------------------------------------------------------------------
# Table predicates
# ---------------------------------------------------------------------------


def date_values(table: Table, column_name: str) -> pd.Series:
    """Timestamps of a Date column, or of a Text column parsed cell by cell

    Raises:
        SchemaError: missing column or a column that cannot hold dates
        DataError: a Text cell that is not a date, naming its row
    """
    column = table.column(column_name)
    values = table.frame[column_name]
    if column.type == ColumnType.DATE:
        return values
    if column.type != ColumnType.TEXT:
        raise SchemaError(f"column '{column_name}' is {column.type.value}, not a date column")
    parsed = []
    for row, cell in enumerate(values.tolist(), start=1):
        if cell is None:
            parsed.append(pd.NaT)
            continue
        try:
            parsed.append(pd.Timestamp(parse_timestamp(cell)[0]))
        except InvalidArgumentError:
            raise DataError(f"row {row}: column '{column_name}' holds a value that is not a date")
    return pd.Series(parsed, dtype="datetime64[ns]")


def temporal_filter(table: Table, date_column: str, interval: TimeInterval) -> Table:
    """Rows whose date lies in the closed interval, in input order"""
    mask = interval.mask(date_values(table, date_column))
    return table.with_frame(table.frame[mask.to_numpy(dtype=bool)])


def coordinate_columns(
    table: Table, lon_column: Optional[str] = None, lat_column: Optional[str] = None
) -> Tuple[str, str]:
    """Pick the longitude/latitude columns, explicitly named or by declared type or name"""

    def pick(explicit: Optional[str], ctype: ColumnType, names: Sequence[str]) -> str:
        if explicit:
            table.column(explicit)
            return explicit
        typed = [c.name for c in table.columns if c.type == ctype]
        if typed:
            return typed[0]
        for column in table.columns:
            if column.name.lower() in names and column.type.is_numeric:
                return column.name
        raise SchemaError(
            f"no {ctype.value.lower()} column found; available columns: {', '.join(table.column_names)}"
        )

    return (
        pick(lon_column, ColumnType.LONGITUDE, ("lon", "lng", "longitude", "x")),
        pick(lat_column, ColumnType.LATITUDE, ("lat", "latitude", "y")),
    )


def project_table_points(
    table: Table, analysis_crs: Crs, lon_column: Optional[str] = None, lat_column: Optional[str] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analysis-CRS coordinates of every row plus a mask of rows with both coordinates"""
    lon_name, lat_name = coordinate_columns(table, lon_column, lat_column)
    lon = table.frame[lon_name].astype("Float64").to_numpy(dtype=np.float64, na_value=np.nan)
    lat = table.frame[lat_name].astype("Float64").to_numpy(dtype=np.float64, na_value=np.nan)
    present = ~(np.isnan(lon) | np.isnan(lat))
    xs = np.full(lon.shape, np.nan)
    ys = np.full(lat.shape, np.nan)
    if present.any():
        xs[present], ys[present] = transform_coordinates(lon[present], lat[present], WGS84, analysis_crs)
    return xs, ys, present


def spatial_join(
    points: Table,
    polygons: Iterable[Tuple[str, PolygonGeometry]],
    analysis_crs: Crs,
    key_column: str = "polygon_key",
    lon_column: Optional[str] = None,
    lat_column: Optional[str] = None,
) -> Table:
    """Add the key of the polygon containing each point (null when none)

    Points inside several polygons take the smallest key.
    """
    _require_projected(analysis_crs, "analysis CRS")
    if key_column in points.column_names:
        raise SchemaError(f"column '{key_column}' already exists")
    xs, ys, present = project_table_points(points, analysis_crs, lon_column, lat_column)
    keys: List[Optional[str]] = [None] * points.row_count
    assigned = ~present
    for key, polygon in sorted(polygons, key=lambda item: item[0]):
        if assigned.all():
            break
        hit = points_in_polygon(xs, ys, reproject(polygon, analysis_crs)) & ~assigned
        for index in np.flatnonzero(hit):
            keys[index] = key
        assigned |= hit
    frame = points.frame.copy()
    frame[key_column] = pd.Series(keys, dtype=object)
    return points.with_frame(frame, points.columns + [Column(key_column, ColumnType.TEXT)])
