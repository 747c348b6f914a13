#!/usr/bin/env python3
"""Reference XYZ tile indices evaluated with mpmath at 50 digits.

Writes tests/data/tile_oracle.json: random (lon, lat, zoom) points with the
expected tile x, y. Points whose fractional tile coordinate lies within 1e-7
of an integer are skipped so that double rounding cannot flip the answer.
"""

import json
import random
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50


def tile_of(lon, lat, zoom):
    n = mp.mpf(2) ** zoom
    fx = n * (mp.mpf(lon) + 180) / 360
    phi = mp.radians(mp.mpf(lat))
    fy = n * (1 - mp.log(mp.tan(phi) + mp.sec(phi)) / mp.pi) / 2
    return fx, fy


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "tile_oracle.json"
    rng = random.Random(7)
    rows = []
    fixed = [(-179.999, 85.05, 3), (0.0001, -0.0001, 1), (103.851, 1.2905, 18), (-73.98, 40.75, 20)]
    cand = fixed + [(rng.uniform(-180, 180), rng.uniform(-85.05, 85.05), rng.randint(0, 24)) for _ in range(400)]
    for lon, lat, zoom in cand:
        fx, fy = tile_of(lon, lat, zoom)
        if min(abs(fx - mp.nint(fx)), abs(fy - mp.nint(fy))) < mp.mpf("1e-7"):
            continue
        rows.append({"lon": lon, "lat": lat, "zoom": zoom, "x": int(mp.floor(fx)), "y": int(mp.floor(fy))})
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"points": rows}, indent=1) + "\n")
    print(f"wrote {len(rows)} points to {out}")


if __name__ == "__main__":
    main()
