import json
import struct

import numpy as np
import pytest

from core.errors import DataError, InvalidArgumentError, ParseError, UnsupportedFormatError
from models.data_structures import (
    ColumnType,
    LulcClass,
    Modality,
    ParseOptions,
    PointCloud,
    ScalarResult,
    TimeInterval,
    UtmZone,
)
from modules.parsers import parser_registry
from modules.parsers.csv_parser import CsvParser
from modules.parsers.las_parser import encode_las, raw_coordinates, read_header
from tests.conftest import FIXTURES

UTM18N = UtmZone(18, "N")


def parse_csv(text, **hints):
    options = ParseOptions(column_types={k: ColumnType.parse(v) for k, v in hints.items()})
    return parser_registry.parse(Modality.TABULAR, text.encode("utf-8") if isinstance(text, str) else text, options)


# ---------------------------------------------------------------------------
# CSV conformance corpus
# ---------------------------------------------------------------------------

CORPUS = [
    ("lf", "a,b\nx,y\n", [["x", "y"]]),
    ("crlf", "a,b\r\nx,y\r\n", [["x", "y"]]),
    ("no trailing newline", "a,b\nx,y", [["x", "y"]]),
    ("quoted comma", 'a,b\n"Pier 4, Harbor Road",y\n', [["Pier 4, Harbor Road", "y"]]),
    ("embedded newline", 'a,b\n"line one\nline two",y\n', [["line one\nline two", "y"]]),
    ("embedded crlf", 'a,b\r\n"line one\r\nline two",y\r\n', [["line one\r\nline two", "y"]]),
    ("doubled quotes", 'a,b\n"say ""hi""",y\n', [['say "hi"', "y"]]),
    ("empty cells", "a,b\n,y\nx,\n", [[None, "y"], ["x", None]]),
    ("quoted empty", 'a,b\n"",y\n', [[None, "y"]]),
    ("utf-8 bom", "\ufeffa,b\nx,y\n", [["x", "y"]]),
    ("unicode text", "a,b\nCafé,東京\n", [["Café", "東京"]]),
    ("blank line skipped", "a,b\nx,y\n\nz,w\n", [["x", "y"], ["z", "w"]]),
]


@pytest.mark.parametrize("name,text,rows", CORPUS, ids=[c[0] for c in CORPUS])
def test_csv_framing(name, text, rows):
    table = parse_csv(text)
    assert table.column_names == ["a", "b"]
    assert table.rows == rows


@pytest.mark.parametrize("name,text,rows", CORPUS, ids=[c[0] for c in CORPUS])
def test_csv_serialize_is_a_fixed_point(name, text, rows):
    table = parse_csv(text)
    again = parse_csv(CsvParser().serialize(table))
    assert again.columns == table.columns
    assert again.rows == table.rows
    assert CsvParser().serialize(again) == CsvParser().serialize(table)


def test_type_inference():
    table = parse_csv(
        "i,f,d,t,mixed,blank\n"
        "1,1.5,2015-03-14,2015-03-14T10:30:00Z,1,\n"
        "-2,.5,2017-12-05,2017-12-05T00:00:01Z,x,\n"
        "+3,1e3,2016-04-11,2016-04-11T23:59:59Z,2,\n"
    )
    types = {c.name: c.type for c in table.columns}
    assert types == {
        "i": ColumnType.INTEGER,
        "f": ColumnType.FLOAT,
        "d": ColumnType.DATE,
        "t": ColumnType.DATE,
        "mixed": ColumnType.TEXT,
        "blank": ColumnType.TEXT,
    }
    assert table.rows[0] == [1, 1.5, "2015-03-14", "2015-03-14T10:30:00Z", "1", None]
    assert table.rows[2][:2] == [3, 1000.0]


def test_ragged_row_names_the_row():
    with pytest.raises(ParseError, match=r"row 2 \(line 3\) has 3 fields, expected 2"):
        parse_csv("a,b\nx,y\nx,y,z\n")


def test_ragged_row_count_ignores_embedded_newlines():
    with pytest.raises(ParseError, match="row 2"):
        parse_csv('a,b\n"x\ny",1\nshort\n')


@pytest.mark.parametrize(
    "text,message",
    [
        ("", "empty"),
        ("   \n", "empty"),
        ("a,a\n1,2\n", "duplicate column"),
        ('a,b\n"unterminated,y\n', "malformed CSV"),
        (b"a,b\n\xff,y\n", "UTF-8"),
    ],
)
def test_malformed_input(text, message):
    with pytest.raises(ParseError, match=message):
        parse_csv(text)


def test_type_hints():
    table = parse_csv("id,lon,lat\nF1,-73.98,40.69\n", lon="Longitude", lat="Latitude")
    assert [c.type for c in table.columns] == [ColumnType.TEXT, ColumnType.LONGITUDE, ColumnType.LATITUDE]

    with pytest.raises(DataError, match="row 2: column 'n' is not an integer"):
        parse_csv("n\n1\n2.5\n", n="Integer")
    with pytest.raises(DataError, match="out of range"):
        parse_csv("lon\n-190\n", lon="Longitude")
    with pytest.raises(InvalidArgumentError, match="unknown columns"):
        parse_csv("a\n1\n", missing="Text")


def test_integer_shaped_ids_beyond_64_bits_stay_text():
    table = parse_csv("id,name\n99999999999999999999,a\n1,b\n")
    assert table.columns[0].type == ColumnType.TEXT
    assert table.rows == [["99999999999999999999", "a"], ["1", "b"]]
    edge = parse_csv("n\n9223372036854775807\n-9223372036854775808\n\n")
    assert edge.columns[0].type == ColumnType.INTEGER
    assert edge.rows == [[9223372036854775807], [-9223372036854775808]]

    with pytest.raises(DataError, match="row 2: column 'n' is outside the 64-bit integer range"):
        parse_csv("n\n1\n9223372036854775808\n", n="Integer")


def test_fixture_parks_table():
    table = parse_csv((FIXTURES / "parks.csv").read_bytes())
    types = {c.name: c.type.value for c in table.columns}
    assert types == {
        "park_id": "Text",
        "name": "Text",
        "address": "Text",
        "borough": "Text",
        "acres": "Float",
        "date_constructed": "Date",
    }
    assert table.row_count == 6
    assert table.records()[1]["address"] == "Pier 4, Harbor Road"


# ---------------------------------------------------------------------------
# LAS
# ---------------------------------------------------------------------------

POINT_FORMAT_OFFSET = 104
X_SCALE_OFFSET = 131


def _site(name="site_2010"):
    return (FIXTURES / f"{name}.las").read_bytes()


def _parse_las(payload):
    return parser_registry.parse(Modality.POINT_CLOUD, payload, ParseOptions(crs=UTM18N))


def test_las_fixture_decodes(oracle):
    cloud = _parse_las(_site())
    assert cloud.point_count == oracle["sites"]["site_2010"]["point_count"]
    assert cloud.crs == UTM18N
    assert cloud.classification.max() < 32
    header = read_header(_site())
    assert cloud.x.min() == pytest.approx(header["min_x"], abs=header["x_scale"])
    assert cloud.z.max() == pytest.approx(header["max_z"], abs=header["z_scale"])


def test_las_round_trip_keeps_stored_integers():
    cloud = _parse_las(_site())
    again = _parse_las(encode_las(cloud))
    np.testing.assert_array_equal(raw_coordinates(again), raw_coordinates(cloud))
    np.testing.assert_array_equal(again.classification, cloud.classification)
    np.testing.assert_array_equal(again.intensity, cloud.intensity)
    assert again.scale == cloud.scale
    assert again.offset == cloud.offset


@pytest.mark.parametrize("version", ["1.2", "1.4"])
@pytest.mark.parametrize("point_format", [0, 1])
def test_las_writer_versions_and_formats(version, point_format):
    n = 50
    rng = np.random.default_rng(point_format)
    cloud = PointCloud(
        x=np.round(583000 + rng.uniform(0, 100, n), 2),
        y=np.round(4507000 + rng.uniform(0, 100, n), 2),
        z=np.round(rng.uniform(0, 30, n), 2),
        intensity=rng.integers(0, 1000, n).astype(np.uint16),
        classification=rng.choice([2, 5, 6, 9], n).astype(np.uint8),
        crs=UTM18N,
        version=version,
        point_format=point_format,
        offset=(583000.0, 4507000.0, 0.0),
        gps_time=rng.uniform(0, 1e6, n) if point_format == 1 else None,
    )
    parsed = _parse_las(encode_las(cloud))
    assert parsed.version == version
    assert parsed.point_format == point_format
    np.testing.assert_array_equal(raw_coordinates(parsed), raw_coordinates(cloud))
    if point_format == 1:
        np.testing.assert_array_equal(parsed.gps_time, cloud.gps_time)


def _patched(payload: bytes, offset: int, fmt: str, value) -> bytes:
    data = bytearray(payload)
    struct.pack_into("<" + fmt, data, offset, value)
    return bytes(data)


@pytest.mark.parametrize(
    "corrupt,error,message",
    [
        (lambda p: b"LASX" + p[4:], ParseError, "signature"),
        (lambda p: p[:100], ParseError, "truncated LAS header"),
        (lambda p: p[:-7], ParseError, "point_count"),
        (lambda p: _patched(p, 25, "B", 3), UnsupportedFormatError, "version 1.3"),
        (lambda p: _patched(p, POINT_FORMAT_OFFSET, "B", 6), UnsupportedFormatError, "record format 6"),
        (lambda p: _patched(p, POINT_FORMAT_OFFSET, "B", 0x80), UnsupportedFormatError, "LAZ"),
        (lambda p: _patched(p, X_SCALE_OFFSET, "d", 0.0), ParseError, "x_scale is zero"),
    ],
    ids=["signature", "truncated-header", "truncated-points", "version", "point-format", "laz", "zero-scale"],
)
def test_las_corrupted_headers(corrupt, error, message):
    with pytest.raises(error, match=message):
        _parse_las(corrupt(_site()))


def test_las_acquisition_time_comes_from_options():
    extent = TimeInterval.parse("2020-04-01", "2020-05-31")
    cloud = parser_registry.parse(Modality.POINT_CLOUD, _site("site_2020"), ParseOptions(crs=UTM18N, temporal_extent=extent))
    assert cloud.acquisition_time == extent


# ---------------------------------------------------------------------------
# GeoJSON and derived results
# ---------------------------------------------------------------------------


def _feature(key, geometry):
    return {"type": "Feature", "properties": {"park_id": key}, "geometry": geometry}


def _parse_geojson(document, key="park_id"):
    payload = json.dumps(document).encode("utf-8")
    return parser_registry.parse(Modality.VECTOR, payload, ParseOptions(key_property=key))


def test_geojson_fixture_layer():
    layer = parser_registry.parse(
        Modality.VECTOR, (FIXTURES / "park_polygons.geojson").read_bytes(), ParseOptions(key_property="park_id")
    )
    assert layer.keys() == ["P001", "P002", "P003", "P004", "P005", "P006"]
    assert layer.schema()["geometry"] == "Polygon"


def test_geojson_multipolygon_and_points():
    square = [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]]
    other = [[[2, 2], [3, 2], [3, 3], [2, 3], [2, 2]]]
    layer = _parse_geojson(
        {
            "type": "FeatureCollection",
            "features": [
                _feature("A", {"type": "MultiPolygon", "coordinates": [square, other]}),
                _feature("B", {"type": "Point", "coordinates": [0.5, 0.5]}),
            ],
        }
    )
    assert len(layer.feature("A").polygons) == 2
    assert layer.feature("B").point.x == 0.5
    assert layer.schema()["geometry"] == "Mixed"


@pytest.mark.parametrize(
    "document,message",
    [
        ({"type": "Feature"}, "FeatureCollection"),
        ({"type": "FeatureCollection", "features": [_feature("A", {"type": "LineString", "coordinates": []})]},
         "not supported"),
        ({"type": "FeatureCollection", "features": [
            _feature("A", {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]}),
            _feature("A", {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]}),
        ]}, "duplicate key"),
        ({"type": "FeatureCollection", "features": [
            _feature("A", {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1]]]}),
        ]}, "not closed"),
    ],
)
def test_geojson_rejections(document, message):
    with pytest.raises((ParseError, UnsupportedFormatError), match=message):
        _parse_geojson(document)


def test_scalar_result_codec_round_trip():
    result = ScalarResult(
        kind="lulc_proportions",
        value={"entries": [{"polygon_key": "P004", "label": "Riverbend Park", "classified_cell_count": 2,
                            "proportions": {c.label: (0.5 if c in (LulcClass.WATER, LulcClass.OTHER) else 0.0)
                                            for c in LulcClass}}]},
    )
    payload = parser_registry.serialize(result)
    again = parser_registry.parse(Modality.SCALAR_RESULT, payload)
    assert again.kind == result.kind
    assert again.value == result.value
    assert parser_registry.serialize(again) == payload
