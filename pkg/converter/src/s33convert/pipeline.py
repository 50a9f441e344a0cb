"""Conversion pipeline: raw logs -> manifest.json + .bmt tensors.

Preprocessing mirrors the training pipeline's documented recipe, with all
constants (grid sizes, FOV, camera resolution) read from the same run
config the trainer uses:

  power   64-dim f32 vector per sample; labels = argmax
  lidar   XYZ points -> BEV occupancy counts (half-open bins) -> /max
  radar   2D FFT magnitude maps (RV over samples x chirps averaged over
          antennas, RA over samples x antennas averaged over chirps),
          log1p, min-max to [0,1], bilinear resize, stacked as 2 channels
  camera  decoded, resized, scaled to [0,1], CHW
  gps     lat/lon/speed/quality as f64 (normalization happens at training
          time, from the train split only)

Timestamps are never resampled or interpolated: per-index synchronization
of the raw tree is trusted as-is.
"""

from __future__ import annotations

import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import raw
from .bmtio import write_tensor

MODALITIES = ("camera", "lidar", "radar", "gps", "mmwave")


def load_run_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    scenario = cfg.get("scenario", {})
    sensors = scenario.get("sensors", {})
    return {
        "num_elements": scenario.get("num_elements", 16),
        "num_beams": scenario.get("num_beams", 64),
        "noise_var": scenario.get("noise_var", 0.0),
        "camera_h": sensors.get("camera_h", 64),
        "camera_w": sensors.get("camera_w", 64),
        "bev_h": sensors.get("bev_h", 32),
        "bev_w": sensors.get("bev_w", 32),
        "bev_fov": tuple(sensors.get("bev_fov", (-60.0, 60.0, 0.0, 40.0))),
        "radar_grid_h": sensors.get("radar_grid_h", 32),
        "radar_grid_w": sensors.get("radar_grid_w", 32),
    }


def make_split(n: int):
    if n < 3:
        raise ValueError(f"need at least 3 samples to split, got {n}")
    a = n * 70 // 100
    b = n * 85 // 100
    return {"train": [0, a], "val": [a, b], "test": [b, n]}


def bev_from_cloud(cloud: np.ndarray, grid_h: int, grid_w: int, fov) -> np.ndarray:
    x_min, x_max, y_min, y_max = fov
    counts = np.zeros((grid_h, grid_w), dtype=np.int64)
    x, y = cloud[:, 0], cloud[:, 1]
    keep = (x >= x_min) & (x < x_max) & (y >= y_min) & (y < y_max)
    if np.any(keep):
        rows = np.floor((y[keep] - y_min) / (y_max - y_min) * grid_h).astype(np.int64)
        cols = np.floor((x[keep] - x_min) / (x_max - x_min) * grid_w).astype(np.int64)
        np.add.at(counts, (rows, cols), 1)
    grid = counts.astype(np.float32)
    peak = grid.max()
    if peak > 0:
        grid /= peak
    return grid[None, :, :]


def _compress(mag: np.ndarray) -> np.ndarray:
    m = np.log1p(mag.astype(np.float64))
    lo, hi = m.min(), m.max()
    if hi - lo < 1e-12:
        return np.zeros_like(m, dtype=np.float32)
    return ((m - lo) / (hi - lo)).astype(np.float32)


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    img = img.astype(np.float64)
    h, w = img.shape
    ry = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    rx = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0, x0 = np.floor(ry).astype(int), np.floor(rx).astype(int)
    y1, x1 = np.minimum(y0 + 1, h - 1), np.minimum(x0 + 1, w - 1)
    wy, wx = (ry - y0)[:, None], (rx - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def radar_maps_from_cube(cube: np.ndarray, grid_h: int, grid_w: int) -> np.ndarray:
    rv = np.abs(np.fft.fft2(cube, axes=(1, 2))).mean(axis=0)
    ra = np.abs(np.fft.fftn(cube, axes=(1, 0))).mean(axis=2).T
    return np.stack(
        [_resize_bilinear(_compress(ra), grid_h, grid_w), _resize_bilinear(_compress(rv), grid_h, grid_w)],
        axis=0,
    )


def convert(raw_root, out_root, config_path) -> dict:
    """Convert a raw tree; returns the manifest dict."""
    cfg = load_run_config(config_path)
    samples = raw.scan(raw_root)
    n = len(samples)

    powers = np.zeros((n, cfg["num_beams"]), dtype=np.float32)
    columns = {m: [] for m in ("camera", "lidar", "radar", "gps")}
    presence = np.zeros((n, len(MODALITIES)), dtype=np.float32)
    mm_col = MODALITIES.index("mmwave")

    for s in samples:
        powers[s.index] = raw.load_power(s.paths["mmwave"], cfg["num_beams"])
        presence[s.index, mm_col] = 1.0
        for modality, loader in (
            ("camera", lambda p: raw.load_image(p, cfg["camera_h"], cfg["camera_w"])),
            ("lidar", lambda p: bev_from_cloud(raw.load_cloud(p), cfg["bev_h"], cfg["bev_w"], cfg["bev_fov"])),
            ("radar", lambda p: radar_maps_from_cube(raw.load_radar_cube(p), cfg["radar_grid_h"], cfg["radar_grid_w"])),
            ("gps", raw.load_gps),
        ):
            path = s.paths[modality]
            if path is None or not path.exists():
                warnings.warn(f"sample {s.index}: no {modality} payload, presence flag cleared")
                columns[modality].append(None)
                continue
            columns[modality].append(loader(path))
            presence[s.index, MODALITIES.index(modality)] = 1.0

    labels = np.argmax(powers, axis=1).astype(np.float32)
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    modalities_meta = {}

    def store(name, stack):
        dtype_name = {"float32": "f32", "float64": "f64"}[str(stack.dtype)]
        write_tensor(out_root / f"{name}.bmt", stack)
        modalities_meta[name] = {
            "file": f"{name}.bmt",
            "shape": list(stack.shape),
            "dtype": dtype_name,
        }

    store("mmwave", powers)
    for modality in ("camera", "lidar", "radar", "gps"):
        col = columns[modality]
        have = [c for c in col if c is not None]
        if not have:
            continue
        proto = have[0]
        stack = np.stack([c if c is not None else np.zeros_like(proto) for c in col], axis=0)
        store(modality, stack)

    write_tensor(out_root / "labels.bmt", labels)
    write_tensor(out_root / "presence.bmt", presence)
    manifest = {
        "version": 1,
        "num_samples": n,
        "codebook": {"num_elements": cfg["num_elements"], "num_beams": cfg["num_beams"]},
        "noise_var": cfg["noise_var"],
        "modalities": modalities_meta,
        "labels": {"file": "labels.bmt", "shape": [n], "dtype": "f32"},
        "presence": {"file": "presence.bmt", "order": list(MODALITIES)},
        "split": make_split(n),
        "assumptions": {"ordering": "single time-ordered sequence"},
    }
    with open(out_root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
