"""
GeoJSON Parser - keyed polygon and point layers
"""

import json
import logging
from typing import Any, Dict, List, Optional

from core.errors import InvalidArgumentError, ParseError, UnsupportedFormatError
from core.geoalign import validate_ring
from models.data_structures import (
    WGS84,
    DataElement,
    GeoPoint,
    Modality,
    ParseOptions,
    PolygonGeometry,
    VectorFeature,
    VectorLayer,
)
from modules.parsers.base_parser import BaseParser, parser_registry
from utils.file_utils import CanonicalJson

logger = logging.getLogger(__name__)


class GeoJsonParser(BaseParser):
    """
    Parser for GeoJSON FeatureCollections of Polygon, MultiPolygon and Point features

    Each feature is keyed by a property (``key_property`` from the manifest)
    or, failing that, by its ``id`` member. Coordinates are lon-lat in WGS84
    unless the element declares another CRS.
    """

    modality = Modality.VECTOR
    handles = (VectorLayer,)

    def parse(self, payload: bytes, options: ParseOptions) -> VectorLayer:
        try:
            document = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as e:
            raise ParseError(f"invalid GeoJSON document: {e}")
        if not isinstance(document, dict) or document.get("type") != "FeatureCollection":
            raise ParseError("GeoJSON root must be a FeatureCollection")
        raw_features = document.get("features")
        if not isinstance(raw_features, list):
            raise ParseError("FeatureCollection has no 'features' list")

        crs = options.crs or WGS84
        key_property = options.key_property or "id"
        features: List[VectorFeature] = []
        seen = set()
        for index, raw in enumerate(raw_features, start=1):
            try:
                feature = self._parse_feature(raw, crs, key_property)
            except InvalidArgumentError as e:
                raise ParseError(f"feature {index}: {e.message}")
            if feature.key in seen:
                raise ParseError(f"feature {index}: duplicate key '{feature.key}'")
            seen.add(feature.key)
            features.append(feature)
        logger.debug("Parsed GeoJSON layer: %d features keyed by %s", len(features), key_property)
        return VectorLayer(features=features, crs=crs, key_property=key_property)

    def _parse_feature(self, raw: Any, crs, key_property: str) -> VectorFeature:
        if not isinstance(raw, dict) or raw.get("type") != "Feature":
            raise InvalidArgumentError("not a GeoJSON Feature")
        properties = raw.get("properties") or {}
        if not isinstance(properties, dict):
            raise InvalidArgumentError("feature properties must be an object")
        key = properties.get(key_property, raw.get("id") if key_property == "id" else None)
        if key is None or key == "":
            raise InvalidArgumentError(f"feature has no '{key_property}' key")
        geometry = raw.get("geometry")
        if not isinstance(geometry, dict):
            raise InvalidArgumentError("feature has no geometry")
        kind = geometry.get("type")
        coordinates = geometry.get("coordinates")
        if kind == "Point":
            return VectorFeature(key=str(key), point=self._point(coordinates, crs), properties=properties)
        if kind == "Polygon":
            polygons = [self._polygon(coordinates, crs)]
        elif kind == "MultiPolygon":
            if not isinstance(coordinates, list) or not coordinates:
                raise InvalidArgumentError("MultiPolygon has no polygons")
            polygons = [self._polygon(part, crs) for part in coordinates]
        else:
            raise UnsupportedFormatError(f"geometry type {kind!r} is not supported")
        return VectorFeature(key=str(key), polygons=polygons, properties=properties)

    @staticmethod
    def _point(coordinates: Any, crs) -> GeoPoint:
        if not isinstance(coordinates, list) or len(coordinates) < 2:
            raise InvalidArgumentError("Point needs [x, y] coordinates")
        try:
            return GeoPoint(float(coordinates[0]), float(coordinates[1]), crs)
        except (TypeError, ValueError):
            raise InvalidArgumentError("Point coordinates must be numbers")

    @staticmethod
    def _polygon(rings: Any, crs) -> PolygonGeometry:
        if not isinstance(rings, list) or not rings:
            raise InvalidArgumentError("Polygon has no rings")
        try:
            polygon = PolygonGeometry.from_coordinates(rings, crs)
        except (TypeError, ValueError, IndexError):
            raise InvalidArgumentError("Polygon coordinates must be [x, y] number pairs")
        for ring in polygon.rings():
            for x, y in ring:
                GeoPoint(x, y, crs)
        validate_ring(polygon.exterior)
        return polygon

    def load(self, element: DataElement, payload: bytes, options: ParseOptions) -> VectorLayer:
        return self.parse(
            payload,
            ParseOptions(crs=element.crs or options.crs, key_property=element.schema.get("key_property")),
        )

    def serialize(self, obj: VectorLayer) -> bytes:
        """Canonical FeatureCollection, features in layer order"""
        features: List[Dict[str, Any]] = []
        for feature in obj.features:
            properties = dict(feature.properties)
            properties[obj.key_property] = feature.key
            features.append({"type": "Feature", "properties": properties, "geometry": self._geometry(feature)})
        return CanonicalJson.dumps({"type": "FeatureCollection", "features": features}).encode("utf-8")

    @staticmethod
    def _geometry(feature: VectorFeature) -> Optional[Dict[str, Any]]:
        if feature.point is not None:
            return {"type": "Point", "coordinates": [feature.point.x, feature.point.y]}
        if len(feature.polygons) == 1:
            return {"type": "Polygon", "coordinates": feature.polygons[0].to_coordinates()}
        return {"type": "MultiPolygon", "coordinates": [p.to_coordinates() for p in feature.polygons]}


parser_registry.register(GeoJsonParser)
