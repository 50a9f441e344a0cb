"""Raw tree layout and per-sample loaders.

Assumed layout (documented contract; the tool fails loudly on mismatch):

    raw_root/
      scenario33.csv        index CSV, one row per synchronized sample
      unit1/...             per-sample files, paths relative to raw_root

CSV columns: ``index`` plus one column per modality holding a relative
file path (empty cell = modality absent for that sample):

    unit1_pwr_60ghz   .txt, 64 whitespace-separated floats (required)
    unit1_rgb         .jpg/.png image
    unit1_lidar       .npy float array (N, 3) or (N, 4); XYZ kept
    unit1_radar       .npy complex array (A, S, C)
    unit1_loc         .txt, 4 floats: latitude longitude speed quality

The mmWave column is the alignment reference: a missing path or file is
fatal. Indices must be contiguous from 0 in row order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

INDEX_CSV = "scenario33.csv"
COLUMNS = {
    "mmwave": "unit1_pwr_60ghz",
    "camera": "unit1_rgb",
    "lidar": "unit1_lidar",
    "radar": "unit1_radar",
    "gps": "unit1_loc",
}


class RawLayoutError(RuntimeError):
    """The raw tree does not match the documented layout."""


class AlignmentError(RawLayoutError):
    """The mmWave reference sequence is broken (missing file or index gap)."""


@dataclass
class RawSampleIndex:
    index: int
    paths: dict  # modality -> absolute Path or None


def scan(raw_root) -> list:
    """Read the index CSV into per-sample path records."""
    raw_root = Path(raw_root)
    csv_path = raw_root / INDEX_CSV
    if not csv_path.exists():
        raise RawLayoutError(f"index CSV not found: {csv_path}")
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise RawLayoutError(f"{csv_path} has no samples")
    missing_cols = {"index", COLUMNS["mmwave"]} - set(rows[0])
    if missing_cols:
        raise RawLayoutError(f"{csv_path} missing columns {sorted(missing_cols)}")

    samples = []
    for pos, row in enumerate(rows):
        idx = int(row["index"])
        if idx != pos:
            raise AlignmentError(f"index gap: row {pos} has index {idx}")
        paths = {}
        for modality, col in COLUMNS.items():
            cell = (row.get(col) or "").strip()
            paths[modality] = raw_root / cell if cell else None
        if paths["mmwave"] is None or not paths["mmwave"].exists():
            raise AlignmentError(f"sample {idx}: mmWave power file missing ({paths['mmwave']})")
        samples.append(RawSampleIndex(index=idx, paths=paths))
    return samples


def load_power(path, num_beams: int) -> np.ndarray:
    values = np.loadtxt(path, dtype=np.float64).reshape(-1)
    if values.shape != (num_beams,):
        raise RawLayoutError(f"{path}: expected {num_beams} power values, got {values.shape}")
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise RawLayoutError(f"{path}: power values must be finite and >= 0")
    return values.astype(np.float32)


def load_image(path, out_h: int, out_w: int) -> np.ndarray:
    """Image file -> (3, H, W) float32 in [0, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((out_w, out_h), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    return np.transpose(arr, (2, 0, 1))


def load_cloud(path) -> np.ndarray:
    arr = np.load(path)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise RawLayoutError(f"{path}: expected (N, 3+) point array, got {arr.shape}")
    return arr[:, :3].astype(np.float64)


def load_radar_cube(path) -> np.ndarray:
    arr = np.load(path)
    if arr.ndim != 3 or not np.iscomplexobj(arr):
        raise RawLayoutError(f"{path}: expected complex (A, S, C) cube, got {arr.shape} {arr.dtype}")
    return arr


def load_gps(path) -> np.ndarray:
    values = np.loadtxt(path, dtype=np.float64).reshape(-1)
    if values.shape != (4,):
        raise RawLayoutError(
            f"{path}: expected 4 values (lat lon speed quality), got {values.shape}"
        )
    return values
