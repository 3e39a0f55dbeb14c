#!/usr/bin/env python3
"""Regenerates the bundled street fixtures under data/. Output is deterministic."""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data"
LON0, LAT0 = 144.9631, -37.8136
M_PER_DEG_LAT = 111_000.0
M_PER_DEG_LON = 111_000.0 * math.cos(math.radians(LAT0))


def to_lonlat(x, y):
    return LON0 + x / M_PER_DEG_LON, LAT0 + y / M_PER_DEG_LAT


class Osm:
    def __init__(self):
        self.nodes = {}
        self.ways = []
        self.next_node = 1000
        self.next_way = 1

    def node(self, x, y):
        self.next_node += 1
        self.nodes[self.next_node] = to_lonlat(x, y)
        return self.next_node

    def way(self, refs, highway):
        self.ways.append((self.next_way, refs, highway))
        self.next_way += 1

    def xml(self):
        out = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="gen_fixtures">']
        for nid, (lon, lat) in sorted(self.nodes.items()):
            out.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
        for wid, refs, highway in self.ways:
            out.append(f'  <way id="{wid}">')
            out.extend(f'    <nd ref="{r}"/>' for r in refs)
            out.append(f'    <tag k="highway" v="{highway}"/>')
            out.append("  </way>")
        out.append("</osm>")
        return "\n".join(out) + "\n"

    def geojson(self):
        feats = []
        for wid, refs, highway in self.ways:
            feats.append({
                "type": "Feature",
                "properties": {"highway": highway, "osm_id": wid},
                "geometry": {"type": "LineString", "coordinates": [list(self.nodes[r]) for r in refs]},
            })
        return json.dumps({"type": "FeatureCollection", "features": feats}, indent=1) + "\n"


def grid(osm, rng, rows, cols, spacing, jitter, arterial_row=None, arterial_col=None):
    """Street grid with one shape vertex per block side."""
    pos = {}
    ids = {}
    for r in range(rows):
        for c in range(cols):
            x = c * spacing + rng.uniform(-jitter, jitter)
            y = r * spacing + rng.uniform(-jitter, jitter)
            pos[r, c] = (x, y)
            ids[r, c] = osm.node(x, y)

    def shape(a, b):
        (x0, y0), (x1, y1) = pos[a], pos[b]
        mx, my = (x0 + x1) / 2, (y0 + y1) / 2
        return osm.node(mx + rng.uniform(-jitter, jitter) / 2, my + rng.uniform(-jitter, jitter) / 2)

    for r in range(rows):
        refs = [ids[r, 0]]
        for c in range(1, cols):
            refs += [shape((r, c - 1), (r, c)), ids[r, c]]
        osm.way(refs, "secondary" if r == arterial_row else "residential")
    for c in range(cols):
        refs = [ids[0, c]]
        for r in range(1, rows):
            refs += [shape((r - 1, c), (r, c)), ids[r, c]]
        osm.way(refs, "secondary" if c == arterial_col else "residential")
    return pos, ids


def households(rng, osm, count, offset):
    """Address points scattered along random street segments."""
    segs = []
    for _, refs, highway in osm.ways:
        if highway in ("footway", "path", "cycleway"):
            continue
        for a, b in zip(refs, refs[1:]):
            segs.append((osm.nodes[a], osm.nodes[b]))
    feats = []
    for _ in range(count):
        (lon0, lat0), (lon1, lat1) = rng.choice(segs)
        t = rng.uniform(0.1, 0.9)
        x0, y0 = (lon0 - LON0) * M_PER_DEG_LON, (lat0 - LAT0) * M_PER_DEG_LAT
        x1, y1 = (lon1 - LON0) * M_PER_DEG_LON, (lat1 - LAT0) * M_PER_DEG_LAT
        dx, dy = x1 - x0, y1 - y0
        n = math.hypot(dx, dy)
        side = rng.choice((-1.0, 1.0)) * rng.uniform(*offset)
        x, y = x0 + t * dx - side * dy / n, y0 + t * dy + side * dx / n
        lon, lat = to_lonlat(x, y)
        feats.append({"type": "Feature", "properties": {},
                      "geometry": {"type": "Point", "coordinates": [round(lon, 7), round(lat, 7)]}})
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=1) + "\n"


def small():
    rng = random.Random(11)
    osm = Osm()
    pos, ids = grid(osm, rng, 2, 5, 100.0, 4.0)
    # A footpath across the block that ingestion must drop.
    osm.way([ids[0, 1], osm.node(150.0, 50.0), ids[1, 2]], "footway")
    out = ROOT / "small"
    out.mkdir(parents=True, exist_ok=True)
    (out / "streets.osm").write_text(osm.xml())
    (out / "streets.geojson").write_text(osm.geojson())
    (out / "households.geojson").write_text(households(rng, osm, 30, (8.0, 20.0)))


def desk():
    rng = random.Random(2024)
    osm = Osm()
    grid(osm, rng, 15, 15, 100.0, 8.0, arterial_row=7, arterial_col=7)
    # Pedestrian links and a motorway are excluded at ingestion.
    for k in range(4):
        x0, y0 = rng.uniform(100, 1200), rng.uniform(100, 1200)
        osm.way([osm.node(x0, y0), osm.node(x0 + 40, y0 + 35)], "footway")
    osm.way([osm.node(-300.0, -200.0), osm.node(1700.0, -200.0)], "motorway")
    out = ROOT / "desk"
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid15.osm").write_text(osm.xml())
    (out / "households.geojson").write_text(households(rng, osm, 360, (8.0, 25.0)))


if __name__ == "__main__":
    small()
    desk()
