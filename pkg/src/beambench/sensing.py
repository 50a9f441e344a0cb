"""Modality synthesis and preprocessing.

Five payloads per sample: a camera-proxy raster, a LiDAR point cloud (and
its BEV occupancy raster), an FMCW radar cube (and its range-angle /
range-velocity maps), GPS features, and the mmWave power vector handled by
beamcore. All synthesizers are bitwise deterministic given
(global_seed, index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .scenario import (
    SceneState,
    ScenarioConfig,
    sample_rng,
    _STREAM_CAMERA,
    _STREAM_LIDAR,
    _STREAM_RADAR,
    _STREAM_GPS,
)

# geodetic anchor (the BS position); local equirectangular frame around it
EARTH_RADIUS_M = 6371000.0
ANCHOR_LAT = 40.0
ANCHOR_LON = -105.0

GPS_FIELD_NAMES = ("latitude", "longitude", "speed", "quality")


@dataclass
class GpsFeatures:
    latitude: float
    longitude: float
    speed: float
    quality: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0):
            raise InvalidArgumentError(f"gps latitude {self.latitude} outside [-90, 90]")
        if not (-180.0 <= self.longitude <= 180.0):
            raise InvalidArgumentError(f"gps longitude {self.longitude} outside [-180, 180]")
        if self.speed < 0:
            raise InvalidArgumentError("gps speed must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.latitude, self.longitude, self.speed, self.quality], dtype=np.float64)


@dataclass
class RadarMaps:
    """Nonnegative range-angle (S x A) and range-velocity (S x C) maps."""

    range_angle: np.ndarray
    range_velocity: np.ndarray


@dataclass
class BevRaster:
    grid: np.ndarray  # (H, W), values in [0, 1]
    fov: tuple  # (x_min, x_max, y_min, y_max) m


def local_to_gps(x: float, y: float) -> tuple:
    """Local meters around the BS anchor -> (lat, lon) degrees."""
    lat = ANCHOR_LAT + math.degrees(y / EARTH_RADIUS_M)
    lon = ANCHOR_LON + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(ANCHOR_LAT))))
    return lat, lon


def gps_to_local(lat: float, lon: float) -> tuple:
    """Inverse of local_to_gps."""
    y = math.radians(lat - ANCHOR_LAT) * EARTH_RADIUS_M
    x = math.radians(lon - ANCHOR_LON) * EARTH_RADIUS_M * math.cos(math.radians(ANCHOR_LAT))
    return x, y


def _render_camera(scene: SceneState, config: ScenarioConfig, rng) -> np.ndarray:
    """Camera proxy: sky + road band + vehicle blob + occluder when blocked."""
    s = config.sensors
    h, w = s.camera_h, s.camera_w
    frame = np.full((h, w, 3), 0.12, dtype=np.float32)
    frame[: int(0.55 * h), :, 2] = 0.35  # sky tint
    road_top, road_bot = int(0.62 * h), int(0.88 * h)
    frame[road_top:road_bot, :, :] = 0.35  # road band

    x, _ = scene.position
    extent = config.road_extent_m
    col = int((x + extent / 2.0) / extent * (w - 1))
    visible = not scene.blocked
    if visible:
        r0 = int(0.68 * h)
        r1 = min(r0 + max(3, h // 12), road_bot)
        c0 = max(0, col - max(2, w // 20))
        c1 = min(w, col + max(2, w // 20))
        frame[r0:r1, c0:c1] = np.array([0.8, 0.2, 0.15], dtype=np.float32)
    else:
        # occluder slab in front of the lane
        c0 = max(0, col - w // 8)
        c1 = min(w, col + w // 8)
        frame[road_top - h // 10 : road_bot, c0:c1] = 0.08

    if s.camera_noise > 0:
        frame = frame + rng.normal(0.0, s.camera_noise, frame.shape).astype(np.float32)
    return np.clip(frame, 0.0, 1.0).astype(np.float32)


def _render_lidar(scene: SceneState, config: ScenarioConfig, rng) -> np.ndarray:
    """Roadside clutter points plus a vehicle cluster when in range."""
    s = config.sensors
    x_min, x_max, y_min, y_max = s.bev_fov
    n_cl = s.lidar_clutter_points
    clutter = np.stack(
        [
            rng.uniform(x_min, x_max, n_cl),
            rng.uniform(max(y_min, 1.0), y_max, n_cl),
            rng.uniform(0.0, 3.0, n_cl),
        ],
        axis=1,
    )
    points = [clutter]
    x, y = scene.position
    if scene.range_m <= s.lidar_range_m and not scene.blocked:
        n_v = s.lidar_vehicle_points
        veh = np.stack(
            [
                x + rng.uniform(-2.0, 2.0, n_v),
                y + rng.uniform(-1.0, 1.0, n_v),
                rng.uniform(0.0, 1.6, n_v),
            ],
            axis=1,
        )
        if s.lidar_noise_m > 0:
            veh = veh + rng.normal(0.0, s.lidar_noise_m, veh.shape)
        points.append(veh)
    return np.concatenate(points, axis=0).astype(np.float32)


def _render_radar(scene: SceneState, config: ScenarioConfig, rng) -> np.ndarray:
    """Complex cube (A, S, C): one vehicle echo tone plus noise.

    The tone frequencies encode range (sample axis), radial speed (chirp
    axis), and LoS angle (antenna axis).
    """
    s = config.sensors
    a = np.arange(s.radar_a).reshape(-1, 1, 1)
    samp = np.arange(s.radar_s).reshape(1, -1, 1)
    c = np.arange(s.radar_c).reshape(1, 1, -1)

    f_r = scene.range_m / s.radar_range_max_m * (s.radar_s / 2.0)
    f_v = scene.radial_speed / s.radar_vel_max_ms * (s.radar_c / 2.0)
    f_a = s.radar_a * math.sin(scene.los_angle) / 2.0
    amp = config.blockage_attenuation if scene.blocked else 1.0

    phase = 2.0 * np.pi * (f_r * samp / s.radar_s + f_v * c / s.radar_c + f_a * a / s.radar_a)
    cube = amp * np.exp(1j * phase)
    if s.radar_noise > 0:
        scale = s.radar_noise / math.sqrt(2.0)
        cube = cube + rng.normal(0.0, scale, cube.shape) + 1j * rng.normal(0.0, scale, cube.shape)
    return cube.astype(np.complex64)


def _render_gps(scene: SceneState, config: ScenarioConfig, rng) -> GpsFeatures:
    s = config.sensors
    x, y = scene.position
    if s.gps_noise_m > 0:
        x = x + rng.normal(0.0, s.gps_noise_m)
        y = y + rng.normal(0.0, s.gps_noise_m)
    lat, lon = local_to_gps(x, y)
    speed = max(0.0, scene.speed + rng.normal(0.0, 0.1) * (s.gps_noise_m > 0))
    quality = 4.0 if scene.blocked else 5.0
    return GpsFeatures(latitude=lat, longitude=lon, speed=speed, quality=quality)


def synth_modalities(scene: SceneState, config: ScenarioConfig, index: int):
    """All four exteroceptive payloads for one sample.

    Returns (camera frame HxWx3 in [0,1], point cloud Nx3, radar cube
    AxSxC complex, GpsFeatures).
    """
    seed = config.global_seed
    camera = _render_camera(scene, config, sample_rng(seed, index, _STREAM_CAMERA))
    cloud = _render_lidar(scene, config, sample_rng(seed, index, _STREAM_LIDAR))
    cube = _render_radar(scene, config, sample_rng(seed, index, _STREAM_RADAR))
    gps = _render_gps(scene, config, sample_rng(seed, index, _STREAM_GPS))
    return camera, cloud, cube, gps


def bin_points(cloud: np.ndarray, grid_h: int, grid_w: int, fov: tuple) -> np.ndarray:
    """Integer per-cell counts of in-FOV points (half-open bins).

    Rows follow y, columns follow x. A point is in FOV when
    x_min <= x < x_max and y_min <= y < y_max.
    """
    if grid_h < 1 or grid_w < 1:
        raise InvalidArgumentError("bin_points: grid dims must be positive")
    x_min, x_max, y_min, y_max = fov
    if not (x_max > x_min and y_max > y_min):
        raise InvalidArgumentError(f"bin_points: degenerate fov {fov}")
    counts = np.zeros((grid_h, grid_w), dtype=np.int64)
    cloud = np.asarray(cloud)
    if cloud.size == 0:
        return counts
    x, y = cloud[:, 0], cloud[:, 1]
    keep = (x >= x_min) & (x < x_max) & (y >= y_min) & (y < y_max)
    if not np.any(keep):
        return counts
    rows = np.floor((y[keep] - y_min) / (y_max - y_min) * grid_h).astype(np.int64)
    cols = np.floor((x[keep] - x_min) / (x_max - x_min) * grid_w).astype(np.int64)
    np.add.at(counts, (rows, cols), 1)
    return counts


def lidar_to_bev(cloud: np.ndarray, grid_h: int, grid_w: int, fov: tuple) -> BevRaster:
    """BEV occupancy raster: per-cell counts, max-normalized to [0, 1]."""
    counts = bin_points(cloud, grid_h, grid_w, fov)
    peak = counts.max()
    grid = counts.astype(np.float32)
    if peak > 0:
        grid /= peak
    return BevRaster(grid=grid, fov=tuple(fov))


def radar_magnitude_maps(cube: np.ndarray):
    """Raw magnitude maps before compression.

    RV: |2D DFT over (samples, chirps)| averaged over antennas -> (S, C).
    RA: |2D DFT over (samples, antennas)| averaged over chirps -> (S, A).
    """
    cube = np.asarray(cube)
    if cube.ndim != 3 or min(cube.shape) < 1:
        raise InvalidArgumentError(f"radar_magnitude_maps: expected (A,S,C) cube, got {cube.shape}")
    rv = np.abs(np.fft.fft2(cube, axes=(1, 2))).mean(axis=0)
    ra = np.abs(np.fft.fftn(cube, axes=(1, 0))).mean(axis=2).T
    return ra, rv


def compress_map(mag: np.ndarray) -> np.ndarray:
    """log1p compression then min-max normalization; zero map stays zero."""
    m = np.log1p(np.asarray(mag, dtype=np.float64))
    lo, hi = m.min(), m.max()
    if hi - lo < 1e-12:
        return np.zeros_like(m, dtype=np.float32)
    return ((m - lo) / (hi - lo)).astype(np.float32)


def radar_maps(cube: np.ndarray) -> RadarMaps:
    """Compressed, normalized RA/RV maps of a radar cube."""
    ra, rv = radar_magnitude_maps(cube)
    return RadarMaps(range_angle=compress_map(ra), range_velocity=compress_map(rv))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resize of a 2D map (half-pixel centers)."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError("resize_bilinear: output dims must be positive")
    ry = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    rx = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ry).astype(int)
    x0 = np.floor(rx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ry - y0)[:, None]
    wx = (rx - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def radar_input(maps: RadarMaps, grid_h: int, grid_w: int) -> np.ndarray:
    """Stack RA and RV as a 2-channel image on a common grid."""
    ra = resize_bilinear(maps.range_angle, grid_h, grid_w)
    rv = resize_bilinear(maps.range_velocity, grid_h, grid_w)
    return np.stack([ra, rv], axis=0)


@dataclass
class GpsStats:
    """Per-field mean/std computed on the training split only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_training(cls, values: np.ndarray, indices, train_range: tuple) -> "GpsStats":
        """Compute stats over ``indices``; rejects any index outside train."""
        indices = np.asarray(indices)
        lo, hi = train_range
        if indices.size == 0:
            raise InvalidArgumentError("gps stats: no indices given")
        if np.any((indices < lo) | (indices >= hi)):
            raise InvalidArgumentError(
                "gps stats: normalization statistics must use training indices only"
            )
        sel = np.asarray(values, dtype=np.float64)[indices]
        return cls(mean=sel.mean(axis=0), std=sel.std(axis=0))


def normalize_gps(values: np.ndarray, stats: GpsStats) -> np.ndarray:
    """(value - mean)/std per field; constant fields map to 0."""
    values = np.asarray(values, dtype=np.float64)
    std = np.where(stats.std < 1e-12, 1.0, stats.std)
    out = (values - stats.mean) / std
    out = np.where(stats.std < 1e-12, 0.0, out)
    return out.astype(np.float32)
