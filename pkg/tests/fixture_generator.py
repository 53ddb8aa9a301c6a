"""
Generator for the bundled park dataset and its reference answers

Writes ``fixtures/`` (tables, park polygons, two LiDAR surveys, manifests,
oracle.json) and ``questions.json`` under an output directory. Every
reference number comes from brute force in this file: per-point binning
loops for the surveys, per-cell and per-fountain ray casting, and a
Transverse Mercator series cross-checked against Snyder's formulas. Nothing
here imports the package, so the reference answers stay independent of the
tools they grade.

    python -m tests.fixture_generator [out-dir]     # default: data/
"""

import argparse
import hashlib
import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent

# ---------------------------------------------------------------------------
# Geodesy
# ---------------------------------------------------------------------------

SEMI_MAJOR = 6378137.0
FLATTENING = 1 / 298.257223563
K0 = 0.9996
N = FLATTENING / (2 - FLATTENING)
RECTIFYING = SEMI_MAJOR / (1 + N) * (1 + N * N / 4 + N ** 4 / 64)
ALPHA = (
    N / 2 - 2 * N * N / 3 + 5 * N ** 3 / 16 + 41 * N ** 4 / 180,
    13 * N * N / 48 - 3 * N ** 3 / 5 + 557 * N ** 4 / 1440,
    61 * N ** 3 / 240 - 103 * N ** 4 / 140,
    49561 * N ** 4 / 161280,
)
BETA = (
    N / 2 - 2 * N * N / 3 + 37 * N ** 3 / 96 - N ** 4 / 360,
    N * N / 48 + N ** 3 / 15 - 437 * N ** 4 / 1440,
    17 * N ** 3 / 480 - 37 * N ** 4 / 840,
    4397 * N ** 4 / 161280,
)
DELTA = (
    2 * N - 2 * N * N / 3 - 2 * N ** 3 + 116 * N ** 4 / 45,
    7 * N * N / 3 - 8 * N ** 3 / 5 - 227 * N ** 4 / 45,
    56 * N ** 3 / 15 - 136 * N ** 4 / 35,
    4279 * N ** 4 / 630,
)
ORACLE_AGREEMENT_M = 0.002


def _rad(degrees: float) -> float:
    return degrees * math.pi / 180


def _deg(radians: float) -> float:
    return radians * 180 / math.pi


def central_meridian(zone: int) -> int:
    return zone * 6 - 183


def forward_kruger(lon: float, lat: float, zone: int = 18, south: bool = False) -> Tuple[float, float]:
    phi, dl = _rad(lat), _rad(lon - central_meridian(zone))
    e = 2 * math.sqrt(N) / (1 + N)
    t = math.sinh(math.atanh(math.sin(phi)) - e * math.atanh(e * math.sin(phi)))
    xi = math.atan(t / math.cos(dl))
    eta = math.atanh(math.sin(dl) / math.sqrt(1 + t * t))
    easting, northing = eta, xi
    for j, coefficient in enumerate(ALPHA, start=1):
        easting += coefficient * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
        northing += coefficient * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
    return 500000 + K0 * RECTIFYING * easting, (10000000 if south else 0) + K0 * RECTIFYING * northing


def inverse_kruger(easting: float, northing: float, zone: int = 18, south: bool = False) -> Tuple[float, float]:
    xi = (northing - (10000000 if south else 0)) / (K0 * RECTIFYING)
    eta = (easting - 500000) / (K0 * RECTIFYING)
    xp, ep = xi, eta
    for j, coefficient in enumerate(BETA, start=1):
        xp -= coefficient * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        ep -= coefficient * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
    chi = math.asin(math.sin(xp) / math.cosh(ep))
    phi = chi
    for j, coefficient in enumerate(DELTA, start=1):
        phi += coefficient * math.sin(2 * j * chi)
    lam = math.atan2(math.sinh(ep), math.cos(xp))
    return central_meridian(zone) + _deg(lam), _deg(phi)


def forward_snyder(lon: float, lat: float, zone: int, south: bool) -> Tuple[float, float]:
    """USGS Professional Paper 1395 series; the cross-check for forward_kruger"""
    e2 = 2 * FLATTENING - FLATTENING * FLATTENING
    ep2 = e2 / (1 - e2)
    phi = _rad(lat)
    nu = SEMI_MAJOR / math.sqrt(1 - e2 * math.sin(phi) ** 2)
    t = math.tan(phi) ** 2
    c = ep2 * math.cos(phi) ** 2
    a = _rad(lon - central_meridian(zone)) * math.cos(phi)
    e4, e6 = e2 * e2, e2 * e2 * e2
    m = SEMI_MAJOR * (
        (1 - e2 / 4 - 3 * e4 / 64 - 5 * e6 / 256) * phi
        - (3 * e2 / 8 + 3 * e4 / 32 + 45 * e6 / 1024) * math.sin(2 * phi)
        + (15 * e4 / 256 + 45 * e6 / 1024) * math.sin(4 * phi)
        - (35 * e6 / 3072) * math.sin(6 * phi)
    )
    x = K0 * nu * (a + (1 - t + c) * a ** 3 / 6 + (5 - 18 * t + t * t + 72 * c - 58 * ep2) * a ** 5 / 120)
    y = K0 * (
        m
        + nu * math.tan(phi) * (
            a * a / 2
            + (5 - t + 9 * c + 4 * c * c) * a ** 4 / 24
            + (61 - 58 * t + t * t + 600 * c - 330 * ep2) * a ** 6 / 720
        )
    )
    return 500000 + x, (10000000 if south else 0) + y


UTM_CHECKPOINTS = [
    (-74.0060, 40.7128, 18, False),
    (-75.0, 0.0, 18, False),
    (-73.5, 42.0, 18, False),
    (-76.2, 38.9, 18, False),
    (151.2093, -33.8688, 56, True),
    (2.3522, 48.8566, 31, False),
]


def utm_reference_points() -> List[Dict[str, Any]]:
    points = []
    for lon, lat, zone, south in UTM_CHECKPOINTS:
        snyder = forward_snyder(lon, lat, zone, south)
        kruger = forward_kruger(lon, lat, zone, south)
        gap = math.hypot(snyder[0] - kruger[0], snyder[1] - kruger[1])
        if gap > ORACLE_AGREEMENT_M:
            raise RuntimeError(f"projection series disagree by {gap} m at ({lon}, {lat})")
        points.append(
            {
                "lon": _number(lon),
                "lat": _number(lat),
                "crs": f"utm:{zone}{'S' if south else 'N'}",
                "easting": _number(round(snyder[0], 4)),
                "northing": _number(round(snyder[1], 4)),
            }
        )
    return points


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

Ring = List[Tuple[float, float]]


def ray_cast(x: float, y: float, ring: Sequence[Tuple[float, float]]) -> bool:
    inside = False
    j = len(ring) - 1
    for i in range(len(ring)):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


def in_polygon(x: float, y: float, polygon: Dict[str, Any]) -> bool:
    return ray_cast(x, y, polygon["exterior"]) and not any(ray_cast(x, y, hole) for hole in polygon["holes"])


def shoelace(ring: Sequence[Tuple[float, float]]) -> float:
    """Ring area relative to the first vertex"""
    x0, y0 = ring[0]
    total = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        total += (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    return abs(total) / 2


def rect(x0: float, y0: float, x1: float, y1: float) -> Ring:
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]


def rect_clockwise(x0: float, y0: float, x1: float, y1: float) -> Ring:
    return [(x0, y0), (x0, y1), (x1, y1), (x1, y0), (x0, y0)]


SITE_X, SITE_Y = 586700, 4514600  # survey origin, UTM 18N
PARK_POLYGONS = {
    "P001": {"exterior": rect(586000, 4505000, 586060, 4505080), "holes": []},
    "P002": {"exterior": rect(592000, 4512000, 592120, 4512115), "holes": []},
    "P003": {
        "exterior": [(594000, 4520000), (594085, 4520000), (594090, 4520040), (594085, 4520080),
                     (594000, 4520080), (593995, 4520040), (594000, 4520000)],
        "holes": [],
    },
    "P004": {"exterior": rect(SITE_X + 4, SITE_Y + 6, SITE_X + 46, SITE_Y + 74), "holes": []},
    "P005": {
        "exterior": rect(SITE_X + 52, SITE_Y + 4, SITE_X + 92, SITE_Y + 76),
        "holes": [rect_clockwise(SITE_X + 68, SITE_Y + 36, SITE_X + 78, SITE_Y + 46)],
    },
    "P006": {"exterior": rect(587000, 4503000, 587060, 4503060), "holes": []},
}


def polygon_features() -> List[Dict[str, Any]]:
    def to_lon_lat(ring: Ring) -> List[List[float]]:
        return [[round(v, 10) for v in inverse_kruger(e, n)] for e, n in ring]

    return [
        {
            "type": "Feature",
            "properties": {"park_id": key},
            "geometry": {
                "type": "Polygon",
                "coordinates": [to_lon_lat(PARK_POLYGONS[key]["exterior"])]
                + [to_lon_lat(hole) for hole in PARK_POLYGONS[key]["holes"]],
            },
        }
        for key in sorted(PARK_POLYGONS)
    ]


def frozen_areas(features: List[Dict[str, Any]]) -> Dict[str, float]:
    """Areas of the written WGS84 polygons projected back to UTM 18N"""
    areas = {}
    for feature in features:
        rings = [[forward_kruger(lon, lat) for lon, lat in ring] for ring in feature["geometry"]["coordinates"]]
        key = feature["properties"]["park_id"]
        areas[key] = abs(shoelace(rings[0]) - sum(shoelace(hole) for hole in rings[1:]))
        polygon = PARK_POLYGONS[key]
        designed = shoelace(polygon["exterior"]) - sum(shoelace(h) for h in polygon["holes"])
        if abs(areas[key] - designed) > 1e-6 * designed:
            raise RuntimeError(f"{key}: written polygon area {areas[key]} drifted from {designed}")
    return areas


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

PARKS = [
    ["P001", "Willow Green", "120 Willow Street", "Brooklyn", "1.2", "2015-03-14"],
    ["P002", "Harbor View Park", "Pier 4, Harbor Road", "Queens", "3.4", "2015-06-30"],
    ["P003", "Cedar Commons", "88 Cedar Lane", "Bronx", "1.8", "2015-09-02"],
    ["P004", "Riverbend Park", "5 Riverside Terrace", "Manhattan", "0.71", "2017-12-05"],
    ["P005", "Sunset Terrace", "410 West End Walk", "Manhattan", "0.69", "2017-12-20"],
    ["P006", "Maple Square", "77 Maple Avenue", "Brooklyn", "0.9", "2016-04-11"],
]
PARKS_HEADER = "park_id,name,address,borough,acres,date_constructed"
PARKS_TYPES = ["Text", "Text", "Text", "Text", "Float", "Date"]

# (park, easting, northing) of each planted fountain
FOUNTAINS_UTM = [
    ("P001", 586015, 4505020), ("P001", 586045, 4505065),
    ("P002", 592010, 4512010), ("P002", 592060, 4512057), ("P002", 592110, 4512100),
    ("P004", 586725, 4514640),
    ("P005", 586760, 4514620), ("P005", 586785, 4514660),
    ("P006", 587020, 4503030), ("P006", 587050, 4503010),
]


def _quote(value: str) -> str:
    if any(ch in value for ch in '",\n\r'):
        return '"' + value.replace('"', '""') + '"'
    return value


def parks_csv() -> str:
    return PARKS_HEADER + "\n" + "\n".join(",".join(_quote(v) for v in row) for row in PARKS) + "\n"


def fountain_rows() -> List[List[str]]:
    rows = []
    for i, (park, easting, northing) in enumerate(FOUNTAINS_UTM, start=1):
        lon, lat = inverse_kruger(easting, northing)
        rows.append([f"F{i:03d}", park, f"{lon:.8f}", f"{lat:.8f}"])
    return rows


def planted_fountains(rows: List[List[str]]) -> Tuple[Dict[str, int], Dict[str, str]]:
    """Per-park counts by ray casting the written coordinates against the authored UTM polygons"""
    planted = {key: 0 for key in PARK_POLYGONS}
    containing = {}
    for fountain_id, park, lon, lat in rows:
        easting, northing = forward_kruger(float(lon), float(lat))
        hits = [key for key in sorted(PARK_POLYGONS) if in_polygon(easting, northing, PARK_POLYGONS[key])]
        if hits != [park]:
            raise RuntimeError(f"fountain {fountain_id} landed in {hits}, planted in {park}")
        planted[park] += 1
        containing[fountain_id] = park
    return planted, containing


# ---------------------------------------------------------------------------
# LiDAR surveys
# ---------------------------------------------------------------------------

GRID_WIDTH, GRID_HEIGHT = 48, 40  # 2 m cells
LULC_CLASSES = ["Vegetation", "Building", "Water", "BareGround", "Other"]
POINT_OFFSETS = [(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)]
LAS_HEADER = struct.Struct("<4sHH16sBB32s32sHHHIIBHI5I6d6d")
LAS_POINT = struct.Struct("<iiiHBBbBH")


def classes_2010(ci: int, cj: int) -> List[int]:
    if 2 * ci + 1 < 50:
        if (ci + cj) % 5 == 0:
            return [6, 6, 6, 6]
        if ci % 7 == 3:
            return [2, 2, 6, 6]
        if cj % 6 == 0:
            return [3, 5, 5, 3]
        return [2, 2, 2, 8]
    if cj % 4 < 2 and ci % 3 == 0:
        return [6, 6, 6, 2]
    if (ci * cj) % 11 == 1:
        return [7, 7, 1, 17]
    return [2, 8, 2, 8]


def classes_2020(ci: int, cj: int) -> List[int]:
    cx, cy = 2 * ci + 1, 2 * cj + 1
    if cx < 50:
        if ci % 10 == 0:
            return [6, 6, 6, 6]
        if cj % 9 == 0:
            return [2, 2, 3, 17]
        if (ci + cj) % 2 == 0:
            return [3, 3, 5, 5]
        return [4, 4, 4, 6]
    if 60 <= cx <= 86 and 14 <= cy <= 30:
        return [9, 9, 9, 2]
    if ci % 8 == 0 and cj % 8 == 0:
        return [6, 6, 6, 6]
    if (ci + 2 * cj) % 13 == 0:
        return [1, 1, 1, 9]
    return [5, 5, 3, 4]


def height_of(code: int, ci: int) -> float:
    if code == 6:
        return 12 + (ci % 3) * 0.5
    return {3: 0.5, 4: 2.0, 5: 8.25, 9: 0.0, 2: 0.25, 8: 0.25}.get(code, 1.0)


def land_cover_of(code: int) -> str:
    if code in (3, 4, 5):
        return "Vegetation"
    if code == 6:
        return "Building"
    if code == 9:
        return "Water"
    if code in (2, 8):
        return "BareGround"
    return "Other"


def survey_points(classes) -> List[Dict[str, int]]:
    points = []
    for cj in range(GRID_HEIGHT):
        for ci in range(GRID_WIDTH):
            codes = classes(ci, cj)
            for k, (dx, dy) in enumerate(POINT_OFFSETS):
                points.append(
                    {
                        "X": math.floor((2 * ci + dx) * 100 + 0.5),
                        "Y": math.floor((2 * cj + dy) * 100 + 0.5),
                        "Z": math.floor(height_of(codes[k], ci) * 100 + 0.5),
                        "I": (ci * 31 + cj * 17 + k * 7) % 4096,
                        "C": codes[k],
                    }
                )
    points.append({"X": 0, "Y": 0, "Z": 25, "I": 0, "C": 2})  # anchor at the survey origin
    return points


def las_bytes(points: List[Dict[str, int]], year: int) -> bytes:
    """LAS 1.2, point data record format 0, scale 0.01"""
    xs = [SITE_X + p["X"] * 0.01 for p in points]
    ys = [SITE_Y + p["Y"] * 0.01 for p in points]
    zs = [p["Z"] * 0.01 for p in points]
    header = LAS_HEADER.pack(
        b"LASF", 0, 0, bytes(16), 1, 2,
        b"PARKLENS FIXTURE", b"fixture-gen",
        1, year + 1, LAS_HEADER.size, LAS_HEADER.size, 0,
        0, LAS_POINT.size, len(points),
        len(points), 0, 0, 0, 0,
        0.01, 0.01, 0.01, SITE_X, SITE_Y, 0,
        max(xs), min(xs), max(ys), min(ys), max(zs), min(zs),
    )
    body = b"".join(LAS_POINT.pack(p["X"], p["Y"], p["Z"], p["I"], 0x09, p["C"], 0, 0, 1) for p in points)
    return header + body


def survey_reference(points: List[Dict[str, int]]) -> Dict[str, Any]:
    """Majority codes by per-point binning, then histogram and per-park counts by per-cell ray casting"""
    tallies = [[{} for _ in range(GRID_WIDTH)] for _ in range(GRID_HEIGHT)]
    for p in points:
        ci = min(p["X"] // 200, GRID_WIDTH - 1)
        cj = min(p["Y"] // 200, GRID_HEIGHT - 1)
        cell = tallies[cj][ci]
        cell[p["C"]] = cell.get(p["C"], 0) + 1

    def majority(cell: Dict[int, int]) -> int:
        best, best_count = -1, -1
        for code in sorted(cell):
            if cell[code] > best_count:
                best, best_count = code, cell[code]
        return best

    codes = [[majority(cell) for cell in row] for row in tallies]
    histogram = {name: 0 for name in LULC_CLASSES}
    for row in codes:
        for code in row:
            histogram[land_cover_of(code)] += 1

    per_park = {}
    for key in ("P004", "P005"):
        counts = {name: 0 for name in LULC_CLASSES}
        total = 0
        for cj in range(GRID_HEIGHT):
            for ci in range(GRID_WIDTH):
                if in_polygon(SITE_X + 2 * ci + 1, SITE_Y + 2 * cj + 1, PARK_POLYGONS[key]):
                    counts[land_cover_of(codes[cj][ci])] += 1
                    total += 1
        per_park[key] = {"classified_cell_count": total, "counts": counts}
    return {
        "point_count": len(points),
        "width": GRID_WIDTH,
        "height": GRID_HEIGHT,
        "histogram": histogram,
        "per_park": per_park,
    }


# ---------------------------------------------------------------------------
# Catalog id of the parks root
# ---------------------------------------------------------------------------


def _canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def parks_root_id(csv_text: str) -> str:
    schema = {"columns": [{"name": name, "type": kind} for name, kind in zip(PARKS_HEADER.split(","), PARKS_TYPES)]}
    fields = [
        "TABULAR",
        _canonical(schema),
        "null",
        "null",
        _canonical({"source": {"name": "parks", "uri": "parks.csv"}}),
        hashlib.sha256(csv_text.encode("utf-8")).hexdigest(),
    ]
    framed = b"".join(f"{len(f.encode('utf-8'))}:".encode("ascii") + f.encode("utf-8") for f in fields)
    return hashlib.sha256(framed).hexdigest()


# ---------------------------------------------------------------------------
# Questions
# ---------------------------------------------------------------------------

TOLERANCE = 0.01


def _number(value: float) -> Any:
    return int(value) if float(value).is_integer() else value


def question_set(planted: Dict[str, int], containing: Dict[str, str], sites: Dict[str, Any]) -> Dict[str, Any]:
    parks = [
        {"park_id": r[0], "name": r[1], "address": r[2], "borough": r[3], "acres": float(r[4]), "date": r[5]}
        for r in PARKS
    ]

    def names(rows):
        return sorted({r["name"] for r in rows})

    def in_december_2017(r):
        return "2017-12-01" <= r["date"] <= "2017-12-31"

    q1 = names(r for r in parks if r["date"].startswith("2015") and r["acres"] < 2)
    q2 = names(r for r in parks if r["borough"] == "Brooklyn")
    q3 = names(r for r in parks if in_december_2017(r))
    q4 = names(r for r in parks if int(r["date"][:4]) > 2016 or r["acres"] > 3)
    built_2015 = [r for r in parks if "2015-01-01" <= r["date"] <= "2015-12-31"]
    q5_counts = {r["name"]: planted[r["park_id"]] for r in built_2015}

    borough_counts: Dict[str, int] = {}
    by_id = {r["park_id"]: r for r in parks}
    for park, _, _ in FOUNTAINS_UTM:
        borough = by_id[park]["borough"]
        borough_counts[borough] = borough_counts.get(borough, 0) + 1
    q7 = names(r for r in parks if r["park_id"] in containing.values())

    def share(site: str, key: str, name: str) -> float:
        entry = sites[site]["per_park"][key]
        return entry["counts"][name] / entry["classified_cell_count"]

    december = [r for r in parks if in_december_2017(r)]
    q8 = {f"{r['name']}:{c}": _number(round(share("site_2010", r["park_id"], c), 6)) for r in december for c in LULC_CLASSES}
    sunset = next(r for r in parks if r["name"] == "Sunset Terrace")
    q9 = {f"{sunset['name']}:{c}": _number(round(share("site_2020", sunset["park_id"], c), 6)) for c in LULC_CLASSES}
    q10 = {
        f"{r['name']}:{c}": _number(
            round(share("site_2020", r["park_id"], c) - share("site_2010", r["park_id"], c), 6)
        )
        for r in december
        for c in LULC_CLASSES
    }

    questions = [
        {"id": "Q1", "level": "basic",
         "text": "Can you tell me the names of the parks constructed in 2015 that are smaller than 2 acres?",
         "expected": {"kind": "name_set", "names": q1}},
        {"id": "Q2", "level": "basic", "text": "Which parks are located in Brooklyn?",
         "expected": {"kind": "name_set", "names": q2}},
        {"id": "Q3", "level": "basic", "text": "What are the names of the parks constructed in December 2017?",
         "expected": {"kind": "name_set", "names": q3}},
        {"id": "Q4", "level": "basic", "text": "Which parks were constructed after 2016 or are larger than 3 acres?",
         "expected": {"kind": "name_set", "names": q4}},
        {"id": "Q5", "level": "qualitative",
         "text": "Please provide the names, addresses, and boroughs of the parks constructed in 2015, along with "
                 "the number and locations of drinking fountains inside the parks, if any.",
         "expected": [
             {"kind": "checklist", "entity_column": "name", "entities": [r["name"] for r in built_2015],
              "fields": ["address", "borough"]},
             {"kind": "numeric_map", "values": q5_counts, "tolerance": TOLERANCE},
         ]},
        {"id": "Q6", "level": "qualitative",
         "text": "For each borough, how many drinking fountains are there in the parks of that borough?",
         "expected": {"kind": "checklist", "entity_column": "borough", "entities": list(borough_counts),
                      "fields": ["count"]}},
        {"id": "Q7", "level": "qualitative",
         "text": "Using the fountain coordinates, which parks contain at least one drinking fountain?",
         "expected": {"kind": "name_set", "names": q7}},
        {"id": "Q8", "level": "quantitative",
         "text": "Please provide the names of the parks constructed in December 2017 and the land cover type "
                 "proportions of their sites as they were in 2010.",
         "expected": [{"kind": "name_set", "names": q3},
                      {"kind": "numeric_map", "values": q8, "tolerance": TOLERANCE}]},
        {"id": "Q9", "level": "quantitative",
         "text": "What were the land cover type proportions of the Sunset Terrace site in 2020?",
         "expected": {"kind": "numeric_map", "values": q9, "tolerance": TOLERANCE}},
        {"id": "Q10", "level": "quantitative",
         "text": "How did the land cover type proportions change between 2010 and 2020 for the parks constructed "
                 "in December 2017?",
         "expected": {"kind": "numeric_map", "values": q10, "tolerance": TOLERANCE}},
    ]
    return {"questions": questions}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

MANIFEST = {
    "datasets": [
        {"name": "parks", "path": "parks.csv", "modality": "TABULAR"},
        {"name": "fountains", "path": "fountains.csv", "modality": "TABULAR",
         "column_types": {"lon": "Longitude", "lat": "Latitude"}},
        {"name": "park_polygons", "path": "park_polygons.geojson", "modality": "VECTOR", "crs": "wgs84",
         "key_property": "park_id"},
        {"name": "site_2010", "path": "site_2010.las", "modality": "POINT_CLOUD", "crs": "utm:18N",
         "temporal_extent": {"start": "2010-04-01", "end": "2010-05-31"}},
        {"name": "site_2020", "path": "site_2020.las", "modality": "POINT_CLOUD", "crs": "utm:18N",
         "temporal_extent": {"start": "2020-04-01", "end": "2020-05-31"}},
    ]
}


def _write_json(path: Path, document: Any, indent: int = 2) -> None:
    path.write_bytes((json.dumps(document, indent=indent) + "\n").encode("utf-8"))


def generate(out_dir: Path) -> Dict[str, Any]:
    """Write every fixture and return the oracle document"""
    fixtures = Path(out_dir) / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)

    features = polygon_features()
    _write_json(fixtures / "park_polygons.geojson", {"type": "FeatureCollection", "features": features}, indent=1)

    csv_text = parks_csv()
    (fixtures / "parks.csv").write_bytes(csv_text.encode("utf-8"))
    fountains = fountain_rows()
    fountain_text = "fountain_id,park_id,lon,lat\n" + "\n".join(",".join(r) for r in fountains) + "\n"
    (fixtures / "fountains.csv").write_bytes(fountain_text.encode("utf-8"))
    planted, containing = planted_fountains(fountains)

    sites = {}
    for year, classes in ((2010, classes_2010), (2020, classes_2020)):
        points = survey_points(classes)
        (fixtures / f"site_{year}.las").write_bytes(las_bytes(points, year))
        sites[f"site_{year}"] = survey_reference(points)

    root_id = parks_root_id(csv_text)
    _write_json(fixtures / "manifest.json", MANIFEST)
    _write_json(
        fixtures / "lineage_manifest.json",
        {"roots": [{"name": "parks", "uri": "parks.csv", "modality": "TABULAR", "id": root_id}]},
    )
    _write_json(Path(out_dir) / "questions.json", question_set(planted, containing, sites))

    oracle = {
        "parks_root_id": root_id,
        "utm_points": utm_reference_points(),
        "polygon_area_m2": frozen_areas(features),
        "planted_fountains": planted,
        "fountain_containing_park": containing,
        "sites": sites,
        "fk_park_id_jaccard": 5 / 6,
    }
    _write_json(fixtures / "oracle.json", oracle)
    logger.info("Wrote fixtures and reference answers under %s", out_dir)
    return oracle


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="fixture_generator", description=__doc__.splitlines()[1])
    parser.add_argument("out_dir", nargs="?", default=str(PROJECT_ROOT / "data"))
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    generate(Path(args.out_dir))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
