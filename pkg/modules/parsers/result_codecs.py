"""
Codecs for derived payloads: rasters and scalar results
"""

import json
import logging
from typing import Any, Dict

import numpy as np

from core.errors import ParseError
from models.data_structures import (
    GeoPoint,
    Modality,
    ParseOptions,
    Raster,
    RasterBand,
    ScalarResult,
)
from modules.parsers.base_parser import BaseParser, parser_registry
from utils.file_utils import CanonicalJson

logger = logging.getLogger(__name__)

BAND_DTYPES = {"int32": "<i4", "float64": "<f8"}


class RasterCodec(BaseParser):
    """
    Raster payload: one canonical JSON header line, then the band as
    little-endian cells, row 0 first.
    """

    modality = Modality.RASTER
    handles = (Raster,)

    def parse(self, payload: bytes, options: ParseOptions) -> Raster:
        head, sep, body = payload.partition(b"\n")
        if not sep:
            raise ParseError("raster payload has no header line")
        try:
            header = json.loads(head.decode("utf-8"))
            dtype = np.dtype(BAND_DTYPES[header["dtype"]])
            width, height = int(header["width"]), int(header["height"])
            band_kind = RasterBand(header["band"])
        except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
            raise ParseError(f"malformed raster header: {e}")
        if options.crs is None:
            raise ParseError("raster element has no CRS")
        expected = width * height * dtype.itemsize
        if len(body) != expected:
            raise ParseError(f"raster body holds {len(body)} bytes, header implies {expected}")
        band = np.frombuffer(body, dtype=dtype).reshape(height, width).astype(dtype.newbyteorder("="))
        return Raster(
            origin=GeoPoint(float(header["origin_x"]), float(header["origin_y"]), options.crs),
            cell_size=float(header["cell_size"]),
            band=band,
            band_kind=band_kind,
            nodata=header["nodata"],
            temporal_extent=options.temporal_extent,
        )

    def serialize(self, obj: Raster) -> bytes:
        dtype_name = str(obj.band.dtype)
        if dtype_name not in BAND_DTYPES:
            raise ParseError(f"raster dtype {dtype_name} cannot be stored")
        header: Dict[str, Any] = {
            "band": obj.band_kind.value,
            "cell_size": float(obj.cell_size),
            "dtype": dtype_name,
            "height": obj.height,
            "nodata": obj.nodata,
            "origin_x": float(obj.origin.x),
            "origin_y": float(obj.origin.y),
            "width": obj.width,
        }
        body = np.ascontiguousarray(obj.band, dtype=BAND_DTYPES[dtype_name]).tobytes()
        return CanonicalJson.dumps(header).encode("utf-8") + b"\n" + body


class ScalarCodec(BaseParser):
    """Scalar results are stored as canonical JSON objects with a ``kind`` member"""

    modality = Modality.SCALAR_RESULT
    handles = (ScalarResult,)

    def parse(self, payload: bytes, options: ParseOptions) -> ScalarResult:
        try:
            document = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as e:
            raise ParseError(f"invalid scalar result document: {e}")
        if not isinstance(document, dict) or not isinstance(document.get("kind"), str):
            raise ParseError("scalar result must be an object with a 'kind'")
        kind = document.pop("kind")
        return ScalarResult(kind=kind, value=document, temporal_extent=options.temporal_extent)

    def serialize(self, obj: ScalarResult) -> bytes:
        return CanonicalJson.dumps({**obj.value, "kind": obj.kind}).encode("utf-8")


parser_registry.register(RasterCodec)
parser_registry.register(ScalarCodec)
