"""Fabricates the 5-sample raw fixture tree. Run from this directory:

    python3 make_fixture.py

Regenerates tests/fixture/raw deterministically; sample 2 has no camera
file (exercises the presence-flag path).
"""

import csv
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).parent / "fixture" / "raw"


def build():
    rng = np.random.default_rng(42)
    (ROOT / "unit1" / "mmwave_power").mkdir(parents=True, exist_ok=True)
    for sub in ("camera", "lidar", "radar", "gps"):
        (ROOT / "unit1" / sub).mkdir(parents=True, exist_ok=True)

    rows = []
    for i in range(5):
        power = rng.uniform(0.01, 0.2, 64)
        power[rng.integers(0, 64)] = rng.uniform(0.8, 1.5)
        p_rel = f"unit1/mmwave_power/power_{i}.txt"
        np.savetxt(ROOT / p_rel, power[None, :], fmt="%.6e")

        cam_rel = ""
        if i != 2:
            cam_rel = f"unit1/camera/image_{i}.jpg"
            pixels = rng.integers(0, 255, (24, 32, 3), dtype=np.uint8)
            Image.fromarray(pixels, "RGB").save(ROOT / cam_rel, quality=90)

        lidar_rel = f"unit1/lidar/cloud_{i}.npy"
        cloud = np.stack(
            [rng.uniform(-50, 50, 60), rng.uniform(2, 35, 60), rng.uniform(0, 3, 60)], axis=1
        ).astype(np.float32)
        np.save(ROOT / lidar_rel, cloud)

        radar_rel = f"unit1/radar/cube_{i}.npy"
        cube = (rng.normal(size=(2, 8, 4)) + 1j * rng.normal(size=(2, 8, 4))).astype(np.complex64)
        np.save(ROOT / radar_rel, cube)

        gps_rel = f"unit1/gps/loc_{i}.txt"
        lat, lon = 40.0 + rng.uniform(-1e-4, 1e-4), -105.0 + rng.uniform(-1e-4, 1e-4)
        np.savetxt(ROOT / gps_rel, np.array([[lat, lon, rng.uniform(5, 15), 5.0]]), fmt="%.8f")

        rows.append(
            {
                "index": i,
                "unit1_pwr_60ghz": p_rel,
                "unit1_rgb": cam_rel,
                "unit1_lidar": lidar_rel,
                "unit1_radar": radar_rel,
                "unit1_loc": gps_rel,
            }
        )

    with open(ROOT / "scenario33.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"fixture written under {ROOT}")


if __name__ == "__main__":
    build()
