"""
Geospatial toolkit: spatial joins, areas, point counts, LiDAR rasterization and land cover
"""

import logging
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core import geoalign
from core.errors import AlignmentError, DataError, EmptyRegionError, InvalidArgumentError, SchemaError
from models.api_models import ParamKind, ToolSpec
from models.data_structures import (
    CLASS_CODE_NODATA,
    ELEVATION_NODATA,
    LULC_NODATA,
    Column,
    ColumnType,
    Crs,
    GeoPoint,
    LulcClass,
    LulcReport,
    Modality,
    PointCloud,
    PolygonGeometry,
    Raster,
    RasterBand,
    ScalarResult,
    Table,
    TimeInterval,
    VectorLayer,
)
from modules.tools.registry import ToolContext, element, literal, tool_registry

logger = logging.getLogger(__name__)

REDUCERS = ("max_z", "majority_class", "count")
CLASS_CODES = 32  # classification keeps the low five bits

# ASPRS classification code -> land cover class; unlisted codes are Other
ASPRS_TO_LULC = {
    2: LulcClass.BARE_GROUND,
    3: LulcClass.VEGETATION,
    4: LulcClass.VEGETATION,
    5: LulcClass.VEGETATION,
    6: LulcClass.BUILDING,
    8: LulcClass.BARE_GROUND,
    9: LulcClass.WATER,
}
LULC_LOOKUP = np.full(256, int(LulcClass.OTHER), dtype=np.int32)
for _code, _class in ASPRS_TO_LULC.items():
    LULC_LOOKUP[_code] = int(_class)


# ---------------------------------------------------------------------------
# Rasters
# ---------------------------------------------------------------------------


def rasterize(cloud: PointCloud, cell_size: float, reducer: str) -> Raster:
    """Bin points into a grid spanning their bounding box

    Width is ceil(extent / cell_size) (at least 1) and points on the max edge
    are clamped into the last cell. Majority ties go to the smaller code.
    """
    if not cell_size > 0 or not math.isfinite(cell_size):
        raise InvalidArgumentError(f"cell_size must be positive, got {cell_size}")
    if cloud.crs is None or not cloud.crs.is_projected:
        raise AlignmentError("rasterize needs a point cloud in a projected CRS")
    if reducer not in REDUCERS:
        raise InvalidArgumentError(f"unknown reducer '{reducer}' (expected {', '.join(REDUCERS)})")

    min_x, min_y = float(cloud.x.min()), float(cloud.y.min())
    width = max(1, math.ceil((float(cloud.x.max()) - min_x) / cell_size))
    height = max(1, math.ceil((float(cloud.y.max()) - min_y) / cell_size))
    cols = np.clip(np.floor((cloud.x - min_x) / cell_size).astype(np.int64), 0, width - 1)
    rows = np.clip(np.floor((cloud.y - min_y) / cell_size).astype(np.int64), 0, height - 1)
    flat = rows * width + cols
    cells = width * height

    if reducer == "count":
        band = np.bincount(flat, minlength=cells).astype(np.int32)
        nodata: Any = -1
        kind = RasterBand.COUNT
    elif reducer == "max_z":
        band = np.full(cells, -np.inf)
        np.maximum.at(band, flat, cloud.z)
        band[np.isinf(band)] = ELEVATION_NODATA
        nodata = ELEVATION_NODATA
        kind = RasterBand.MAX_Z
    else:
        codes = cloud.classification.astype(np.int64) % CLASS_CODES
        tally = np.bincount(flat * CLASS_CODES + codes, minlength=cells * CLASS_CODES).reshape(cells, CLASS_CODES)
        band = tally.argmax(axis=1).astype(np.int32)
        band[tally.sum(axis=1) == 0] = CLASS_CODE_NODATA
        nodata = CLASS_CODE_NODATA
        kind = RasterBand.CLASS_CODE

    logger.debug("Rasterized %d points into %dx%d cells (%s)", cloud.point_count, width, height, reducer)
    return Raster(
        origin=GeoPoint(min_x, min_y, cloud.crs),
        cell_size=float(cell_size),
        band=band.reshape(height, width),
        band_kind=kind,
        nodata=nodata,
        temporal_extent=cloud.acquisition_time,
    )


def classify_lulc(raster: Raster) -> Raster:
    """Map ASPRS class codes to the five land cover classes; nodata stays nodata"""
    if raster.band_kind != RasterBand.CLASS_CODE:
        raise InvalidArgumentError(f"classify_lulc needs a class_code raster, got {raster.band_kind.value}")
    codes = raster.band.astype(np.int64)
    in_range = (codes >= 0) & (codes <= 255)
    classes = np.where(in_range, LULC_LOOKUP[np.clip(codes, 0, 255)], int(LulcClass.OTHER)).astype(np.int32)
    classes[~raster.valid_mask()] = LULC_NODATA
    return Raster(
        origin=raster.origin,
        cell_size=raster.cell_size,
        band=classes,
        band_kind=RasterBand.LULC_CLASS,
        nodata=LULC_NODATA,
        temporal_extent=raster.temporal_extent,
    )


def lulc_report(classes: Raster, polygons: List[PolygonGeometry], key: str, label: Optional[str] = None) -> LulcReport:
    """Land cover proportions over cells whose centers fall inside the polygon(s)

    Raises:
        AlignmentError: raster and polygon CRS differ
        EmptyRegionError: no classified cell center inside
    """
    if classes.band_kind != RasterBand.LULC_CLASS:
        raise InvalidArgumentError(f"lulc_proportions needs a lulc_class raster, got {classes.band_kind.value}")
    xs, ys = classes.cell_centers()
    inside = np.zeros(classes.band.shape, dtype=bool)
    for polygon in polygons:
        if polygon.crs != classes.crs:
            raise AlignmentError(f"polygon {key} is in {polygon.crs} but the raster is in {classes.crs}")
        inside |= geoalign.points_in_polygon(xs, ys, polygon)
    selected = classes.band[inside & classes.valid_mask()]
    total = int(selected.size)
    if total == 0:
        raise EmptyRegionError(f"no classified cells inside polygon {key}")
    counts = np.bincount(selected, minlength=len(LulcClass) + 1)
    proportions = {c: float(counts[int(c)]) / total for c in LulcClass}
    return LulcReport(polygon_key=key, proportions=proportions, classified_cell_count=total, label=label)


# ---------------------------------------------------------------------------
# Polygon selection helpers
# ---------------------------------------------------------------------------


def select_features(
    layer: VectorLayer,
    table: Optional[Table] = None,
    key_column: Optional[str] = None,
    label_column: Optional[str] = None,
) -> List[Tuple[str, str, List[PolygonGeometry]]]:
    """(key, label, polygons) for the table's keys in table order, or every layer feature"""
    layer.polygon_features()
    if table is None:
        if label_column:
            raise InvalidArgumentError("label_column needs a table")
        return [(f.key, f.key, f.polygons) for f in layer.features]
    key_name = key_column or layer.key_property
    table.column(key_name)
    if label_column:
        table.column(label_column)
    selected: List[Tuple[str, str, List[PolygonGeometry]]] = []
    seen = set()
    for row, record in enumerate(table.records()):
        key = record[key_name]
        if key is None or str(key) in seen:
            continue
        seen.add(str(key))
        feature = layer.feature(str(key))
        if feature is None:
            raise DataError(f"key column '{key_name}' row {row} matches no polygon in the layer")
        label = record[label_column] if label_column and record[label_column] is not None else str(key)
        selected.append((str(key), str(label), feature.polygons))
    return selected


def _analysis_crs(ctx: ToolContext, layer: VectorLayer, analysis_crs: Optional[Crs]) -> Crs:
    return analysis_crs or ctx.analysis_crs or geoalign.default_analysis_crs(layer)


# ---------------------------------------------------------------------------
# Tool handlers
# ---------------------------------------------------------------------------


def _spatial_join_tool(
    ctx: ToolContext,
    points: Table,
    polygons: VectorLayer,
    analysis_crs: Optional[Crs] = None,
    key_column: str = "polygon_key",
    lon_column: Optional[str] = None,
    lat_column: Optional[str] = None,
) -> Table:
    crs = _analysis_crs(ctx, polygons, analysis_crs)
    pairs = [(f.key, p) for f in polygons.polygon_features() for p in f.polygons]
    return geoalign.spatial_join(points, pairs, crs, key_column, lon_column, lat_column)


def _polygon_area_tool(ctx: ToolContext, polygons: VectorLayer, analysis_crs: Optional[Crs] = None) -> Table:
    crs = _analysis_crs(ctx, polygons, analysis_crs)
    if not crs.is_projected:
        raise AlignmentError("polygon_area needs a projected analysis CRS")
    projected = geoalign.reproject_layer(polygons, crs)
    rows = []
    for feature in projected.polygon_features():
        square_meters = sum(geoalign.polygon_area(p).square_meters for p in feature.polygons)
        rows.append([feature.key, square_meters, square_meters / geoalign.SQUARE_METERS_PER_ACRE])
    columns = [
        Column(polygons.key_property, ColumnType.TEXT),
        Column("square_meters", ColumnType.FLOAT),
        Column("acres", ColumnType.FLOAT),
    ]
    return Table.from_rows(columns, rows)


def _count_points_tool(
    ctx: ToolContext,
    points: Table,
    polygons: VectorLayer,
    table: Optional[Table] = None,
    key_column: Optional[str] = None,
    label_column: Optional[str] = None,
    analysis_crs: Optional[Crs] = None,
    lon_column: Optional[str] = None,
    lat_column: Optional[str] = None,
) -> ScalarResult:
    crs = _analysis_crs(ctx, polygons, analysis_crs)
    if not crs.is_projected:
        raise AlignmentError("count_points_in_polygon needs a projected analysis CRS")
    xs, ys, present = geoalign.project_table_points(points, crs, lon_column, lat_column)
    records = points.records()
    entries: List[Dict[str, Any]] = []
    for key, label, parts in select_features(polygons, table, key_column, label_column):
        inside = np.zeros(points.row_count, dtype=bool)
        for polygon in parts:
            inside |= geoalign.points_in_polygon(xs, ys, geoalign.reproject(polygon, crs))
        inside &= present
        locations = [records[i] for i in np.flatnonzero(inside)]
        entries.append({"polygon_key": key, "label": label, "count": len(locations), "locations": locations})
    return ScalarResult(kind="point_counts", value={"entries": entries, "analysis_crs": crs.name})


def _reproject_layer_tool(ctx: ToolContext, polygons: VectorLayer, crs: Crs) -> VectorLayer:
    return geoalign.reproject_layer(polygons, crs)


def _rasterize_tool(
    ctx: ToolContext, cloud: PointCloud, reducer: str, cell_size: float, as_of: Optional[TimeInterval] = None
) -> Raster:
    if as_of is not None:
        acquired = cloud.acquisition_time
        if acquired is None:
            raise DataError("point cloud has no acquisition time to match against as_of")
        if not as_of.contains_interval(acquired):
            raise DataError(f"point cloud was acquired {acquired}, outside the requested {as_of}")
    return rasterize(cloud, cell_size, reducer)


def _classify_lulc_tool(ctx: ToolContext, raster: Raster) -> Raster:
    return classify_lulc(raster)


def _lulc_proportions_tool(
    ctx: ToolContext,
    classes: Raster,
    polygons: VectorLayer,
    table: Optional[Table] = None,
    key_column: Optional[str] = None,
    label_column: Optional[str] = None,
) -> ScalarResult:
    if not classes.crs.is_projected:
        raise AlignmentError("land cover raster must be in a projected CRS")
    if polygons.crs != classes.crs:
        raise AlignmentError(
            f"polygon layer is in {polygons.crs} but the land cover raster is in {classes.crs}; reproject_layer first"
        )
    entries = [
        lulc_report(classes, parts, key, label).to_dict()
        for key, label, parts in select_features(polygons, table, key_column, label_column)
    ]
    return ScalarResult(kind="lulc_proportions", value={"entries": entries}, temporal_extent=classes.temporal_extent)


def _lulc_change_tool(ctx: ToolContext, before: ScalarResult, after: ScalarResult) -> ScalarResult:
    for name, result in (("before", before), ("after", after)):
        if result.kind != "lulc_proportions":
            raise InvalidArgumentError(f"'{name}' must be a lulc_proportions result, got {result.kind}")
    later = {e["polygon_key"]: e for e in after.entries()}
    earlier_keys = [e["polygon_key"] for e in before.entries()]
    if sorted(earlier_keys) != sorted(later):
        raise DataError("before and after cover different polygons")
    entries = []
    for entry in before.entries():
        other = later[entry["polygon_key"]]
        entries.append(
            {
                "polygon_key": entry["polygon_key"],
                "label": entry["label"],
                "before": entry["proportions"],
                "after": other["proportions"],
                "change": {c.label: other["proportions"][c.label] - entry["proportions"][c.label] for c in LulcClass},
            }
        )
    return ScalarResult(kind="lulc_change", value={"entries": entries})


TABLE, VECTOR, CLOUD, RASTER, SCALAR = (
    Modality.TABULAR,
    Modality.VECTOR,
    Modality.POINT_CLOUD,
    Modality.RASTER,
    Modality.SCALAR_RESULT,
)
ANALYSIS_CRS = literal(
    "analysis_crs", ParamKind.CRS, "projected CRS for the analysis; defaults to the UTM zone of the data", required=False
)

tool_registry.register(
    ToolSpec(
        "spatial_join",
        "Tag each point row (lon/lat in WGS84) with the key of the polygon containing it, or null.",
        (
            element("points", TABLE, "table with longitude/latitude columns"),
            element("polygons", VECTOR, "polygon layer"),
            ANALYSIS_CRS,
            literal("key_column", ParamKind.TEXT, "name of the added key column", required=False, default="polygon_key"),
            literal("lon_column", ParamKind.TEXT, "longitude column", required=False),
            literal("lat_column", ParamKind.TEXT, "latitude column", required=False),
        ),
        TABLE,
    ),
    _spatial_join_tool,
)
tool_registry.register(
    ToolSpec(
        "polygon_area",
        "Planar area of every polygon feature in square meters and acres.",
        (element("polygons", VECTOR, "polygon layer"), ANALYSIS_CRS),
        TABLE,
    ),
    _polygon_area_tool,
)
tool_registry.register(
    ToolSpec(
        "count_points_in_polygon",
        "Count point rows inside each polygon and list the matching rows. Optionally restrict and label "
        "polygons by a key table.",
        (
            element("points", TABLE, "table with longitude/latitude columns"),
            element("polygons", VECTOR, "polygon layer"),
            element("table", TABLE, "table selecting polygon keys", required=False),
            literal("key_column", ParamKind.TEXT, "key column of the table", required=False),
            literal("label_column", ParamKind.TEXT, "label column of the table", required=False),
            ANALYSIS_CRS,
            literal("lon_column", ParamKind.TEXT, "longitude column", required=False),
            literal("lat_column", ParamKind.TEXT, "latitude column", required=False),
        ),
        SCALAR,
    ),
    _count_points_tool,
)
tool_registry.register(
    ToolSpec(
        "reproject_layer",
        "Reproject every feature of a vector layer into the given CRS, e.g. the CRS of a raster before "
        "lulc_proportions.",
        (element("polygons", VECTOR, "vector layer"), literal("crs", ParamKind.CRS, "target CRS")),
        VECTOR,
    ),
    _reproject_layer_tool,
)
tool_registry.register(
    ToolSpec(
        "rasterize",
        "Convert a LiDAR point cloud into a grid image by max_z, majority_class or count per cell. "
        "as_of must contain the cloud's acquisition time.",
        (
            element("cloud", CLOUD, "point cloud"),
            literal("reducer", ParamKind.TEXT, "cell reducer", choices=REDUCERS),
            literal("cell_size", ParamKind.NUMBER, "cell size in meters", required=False,
                    default_setting="DEFAULT_CELL_SIZE"),
            literal("as_of", ParamKind.DATE_INTERVAL, "period the survey must fall in", required=False),
        ),
        RASTER,
    ),
    _rasterize_tool,
)
tool_registry.register(
    ToolSpec(
        "classify_lulc",
        "Map a class-code raster to land cover classes Vegetation, Building, Water, BareGround, Other.",
        (element("raster", RASTER, "class_code raster"),),
        RASTER,
    ),
    _classify_lulc_tool,
)
tool_registry.register(
    ToolSpec(
        "lulc_proportions",
        "Land cover proportions inside each polygon, by cell-center containment. Optionally restrict and "
        "label polygons by a key table.",
        (
            element("classes", RASTER, "lulc_class raster"),
            element("polygons", VECTOR, "polygon layer"),
            element("table", TABLE, "table selecting polygon keys", required=False),
            literal("key_column", ParamKind.TEXT, "key column of the table", required=False),
            literal("label_column", ParamKind.TEXT, "label column of the table", required=False),
        ),
        SCALAR,
    ),
    _lulc_proportions_tool,
)
tool_registry.register(
    ToolSpec(
        "lulc_change",
        "Per-class change in land cover proportions between two lulc_proportions results.",
        (
            element("before", SCALAR, "earlier lulc_proportions result"),
            element("after", SCALAR, "later lulc_proportions result"),
        ),
        SCALAR,
    ),
    _lulc_change_tool,
)
