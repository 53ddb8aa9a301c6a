"""
LAS Parser - uncompressed LAS 1.2 / 1.4 point clouds, point formats 0 and 1
"""

import logging
import struct
from typing import Any, Dict, List, Tuple

import numpy as np

from core.errors import DataError, ParseError, UnsupportedFormatError
from models.data_structures import Modality, ParseOptions, PointCloud
from modules.parsers.base_parser import BaseParser, parser_registry

logger = logging.getLogger(__name__)

# (field name, struct format) in file order; all little-endian
HEADER_FIELDS: List[Tuple[str, str]] = [
    ("file_signature", "4s"),
    ("file_source_id", "H"),
    ("global_encoding", "H"),
    ("guid", "16s"),
    ("version_major", "B"),
    ("version_minor", "B"),
    ("system_identifier", "32s"),
    ("generating_software", "32s"),
    ("creation_day", "H"),
    ("creation_year", "H"),
    ("header_size", "H"),
    ("offset_to_point_data", "I"),
    ("number_of_vlrs", "I"),
    ("point_data_format", "B"),
    ("point_data_record_length", "H"),
    ("legacy_point_count", "I"),
    ("legacy_points_by_return", "5I"),
    ("x_scale", "d"),
    ("y_scale", "d"),
    ("z_scale", "d"),
    ("x_offset", "d"),
    ("y_offset", "d"),
    ("z_offset", "d"),
    ("max_x", "d"),
    ("min_x", "d"),
    ("max_y", "d"),
    ("min_y", "d"),
    ("max_z", "d"),
    ("min_z", "d"),
]

LAS14_FIELDS: List[Tuple[str, str]] = [
    ("start_of_waveform_data", "Q"),
    ("start_of_first_evlr", "Q"),
    ("number_of_evlrs", "I"),
    ("point_count", "Q"),
    ("points_by_return", "15Q"),
]

HEADER_SIZES = {(1, 2): 227, (1, 4): 375}
RECORD_LENGTHS = {0: 20, 1: 28}


def _point_dtype(point_format: int, record_length: int) -> np.dtype:
    names = ["X", "Y", "Z", "intensity", "flags", "classification", "scan_angle", "user_data", "point_source_id"]
    formats = ["<i4", "<i4", "<i4", "<u2", "u1", "u1", "i1", "u1", "<u2"]
    offsets = [0, 4, 8, 12, 14, 15, 16, 17, 18]
    if point_format == 1:
        names.append("gps_time")
        formats.append("<f8")
        offsets.append(20)
    return np.dtype({"names": names, "formats": formats, "offsets": offsets, "itemsize": record_length})


def _read_fields(payload: bytes, fields: List[Tuple[str, str]], offset: int) -> Tuple[Dict[str, Any], int]:
    """Unpack header fields one at a time so a short file names the field it stopped at"""
    values: Dict[str, Any] = {}
    for name, fmt in fields:
        size = struct.calcsize("<" + fmt)
        if offset + size > len(payload):
            raise ParseError(
                f"truncated LAS header: field '{name}' needs bytes {offset}..{offset + size - 1}, "
                f"file has {len(payload)} bytes"
            )
        unpacked = struct.unpack_from("<" + fmt, payload, offset)
        values[name] = unpacked if len(unpacked) > 1 else unpacked[0]
        offset += size
    return values, offset


def read_header(payload: bytes) -> Dict[str, Any]:
    """Decode and validate the public header block

    Raises:
        ParseError: bad signature, truncation, inconsistent sizes
        UnsupportedFormatError: version or point data record format out of range
    """
    if len(payload) >= 4 and payload[:4] != b"LASF":
        raise ParseError(f"bad file signature {payload[:4]!r}, expected b'LASF'")
    header, _ = _read_fields(payload, HEADER_FIELDS, 0)
    version = (header["version_major"], header["version_minor"])
    if version not in HEADER_SIZES:
        raise UnsupportedFormatError(f"LAS version {version[0]}.{version[1]} is not supported (1.2 or 1.4)")
    if version == (1, 4):
        extra, _ = _read_fields(payload, LAS14_FIELDS, HEADER_SIZES[(1, 2)])
        header.update(extra)
    else:
        header["point_count"] = header["legacy_point_count"]
    if header["header_size"] < HEADER_SIZES[version]:
        raise ParseError(
            f"header_size {header['header_size']} is smaller than {HEADER_SIZES[version]} for LAS "
            f"{version[0]}.{version[1]}"
        )
    if header["offset_to_point_data"] < header["header_size"]:
        raise ParseError(
            f"offset_to_point_data {header['offset_to_point_data']} points inside the header "
            f"({header['header_size']} bytes)"
        )

    point_format = header["point_data_format"]
    if point_format & 0xC0:
        raise UnsupportedFormatError("compressed (LAZ) point data is not supported")
    if point_format not in RECORD_LENGTHS:
        raise UnsupportedFormatError(f"point data record format {point_format} is not supported (0 or 1)")
    if header["point_data_record_length"] < RECORD_LENGTHS[point_format]:
        raise ParseError(
            f"point_data_record_length {header['point_data_record_length']} is too short for format "
            f"{point_format} (minimum {RECORD_LENGTHS[point_format]})"
        )
    for axis in ("x", "y", "z"):
        if header[f"{axis}_scale"] == 0:
            raise ParseError(f"{axis}_scale is zero")

    body_end = len(payload)
    if version == (1, 4) and header["number_of_evlrs"] > 0:
        body_end = min(body_end, header["start_of_first_evlr"])
    available = body_end - header["offset_to_point_data"]
    declared = header["point_count"] * header["point_data_record_length"]
    if available != declared:
        raise ParseError(
            f"point_count {header['point_count']} needs {declared} bytes of point records, "
            f"file holds {max(available, 0)}"
        )
    return header


class LasParser(BaseParser):
    """
    Parser for LiDAR point clouds in LAS format

    Coordinates are decoded as offset + scale * raw integer per axis and the
    classification is the low five bits of the classification byte. CRS and
    acquisition time come from the catalog manifest, not the file.
    """

    modality = Modality.POINT_CLOUD
    handles = (PointCloud,)

    def parse(self, payload: bytes, options: ParseOptions) -> PointCloud:
        header = read_header(payload)
        count = header["point_count"]
        if count == 0:
            raise DataError("LAS file holds no points")
        records = np.frombuffer(
            payload,
            dtype=_point_dtype(header["point_data_format"], header["point_data_record_length"]),
            count=count,
            offset=header["offset_to_point_data"],
        )
        scale = (header["x_scale"], header["y_scale"], header["z_scale"])
        offset = (header["x_offset"], header["y_offset"], header["z_offset"])
        cloud = PointCloud(
            x=offset[0] + scale[0] * records["X"].astype(np.float64),
            y=offset[1] + scale[1] * records["Y"].astype(np.float64),
            z=offset[2] + scale[2] * records["Z"].astype(np.float64),
            intensity=records["intensity"].astype(np.uint16),
            classification=(records["classification"] & 0x1F).astype(np.uint8),
            crs=options.crs,
            acquisition_time=options.temporal_extent,
            version=f"{header['version_major']}.{header['version_minor']}",
            point_format=header["point_data_format"],
            scale=scale,
            offset=offset,
            gps_time=records["gps_time"].astype(np.float64) if header["point_data_format"] == 1 else None,
        )
        logger.debug("Parsed LAS %s: %d points, format %d", cloud.version, count, cloud.point_format)
        return cloud

    def serialize(self, obj: PointCloud) -> bytes:
        return encode_las(obj)


def raw_coordinates(cloud: PointCloud) -> np.ndarray:
    """Stored integer coordinates (n x 3) for the cloud's scale and offset"""
    columns = [
        np.rint((values - cloud.offset[i]) / cloud.scale[i]).astype(np.int64)
        for i, values in enumerate((cloud.x, cloud.y, cloud.z))
    ]
    raw = np.stack(columns, axis=1)
    if raw.min() < np.iinfo(np.int32).min or raw.max() > np.iinfo(np.int32).max:
        raise DataError("coordinates do not fit 32-bit integers at this scale and offset")
    return raw


def encode_las(cloud: PointCloud) -> bytes:
    """Write a cloud as an uncompressed LAS file of its own version and point format"""
    version = tuple(int(p) for p in cloud.version.split("."))
    if version not in HEADER_SIZES:
        raise UnsupportedFormatError(f"cannot write LAS version {cloud.version}")
    if cloud.point_format not in RECORD_LENGTHS:
        raise UnsupportedFormatError(f"cannot write point data record format {cloud.point_format}")
    header_size = HEADER_SIZES[version]
    record_length = RECORD_LENGTHS[cloud.point_format]
    raw = raw_coordinates(cloud)

    records = np.zeros(cloud.point_count, dtype=_point_dtype(cloud.point_format, record_length))
    records["X"], records["Y"], records["Z"] = raw[:, 0], raw[:, 1], raw[:, 2]
    records["intensity"] = cloud.intensity
    records["classification"] = cloud.classification
    if cloud.point_format == 1:
        records["gps_time"] = cloud.gps_time if cloud.gps_time is not None else 0.0

    count = cloud.point_count
    values: Dict[str, Any] = {
        "file_signature": b"LASF",
        "file_source_id": 0,
        "global_encoding": 0,
        "guid": b"\0" * 16,
        "version_major": version[0],
        "version_minor": version[1],
        "system_identifier": b"parklens".ljust(32, b"\0"),
        "generating_software": b"parklens".ljust(32, b"\0"),
        "creation_day": 0,
        "creation_year": 0,
        "header_size": header_size,
        "offset_to_point_data": header_size,
        "number_of_vlrs": 0,
        "point_data_format": cloud.point_format,
        "point_data_record_length": record_length,
        "legacy_point_count": count if count <= 0xFFFFFFFF else 0,
        "legacy_points_by_return": (count, 0, 0, 0, 0),
        "x_scale": cloud.scale[0],
        "y_scale": cloud.scale[1],
        "z_scale": cloud.scale[2],
        "x_offset": cloud.offset[0],
        "y_offset": cloud.offset[1],
        "z_offset": cloud.offset[2],
        "max_x": float(cloud.x.max()),
        "min_x": float(cloud.x.min()),
        "max_y": float(cloud.y.max()),
        "min_y": float(cloud.y.min()),
        "max_z": float(cloud.z.max()),
        "min_z": float(cloud.z.min()),
        "start_of_waveform_data": 0,
        "start_of_first_evlr": 0,
        "number_of_evlrs": 0,
        "point_count": count,
        "points_by_return": (count,) + (0,) * 14,
    }
    fields = HEADER_FIELDS + (LAS14_FIELDS if version == (1, 4) else [])
    chunks = []
    for name, fmt in fields:
        value = values[name]
        chunks.append(struct.pack("<" + fmt, *(value if isinstance(value, tuple) else (value,))))
    return b"".join(chunks) + records.tobytes()


parser_registry.register(LasParser)
