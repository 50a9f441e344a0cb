"""Synthetic V2I scene generator.

A vehicle drives past a fixed base station along a straight road; each
sample index yields a geometric multipath channel (LoS plus specular
reflections, optional blockage) from which the beam sweep derives the
power vector. Everything is deterministic in (global_seed, index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamcore import Codebook, steering_vector, sweep_powers
from .errors import ConfigError, InvalidArgumentError

MODALITIES = ("camera", "lidar", "radar", "gps", "mmwave")

# rng stream ids, one per consumer of per-sample randomness
_STREAM_SCENE = 0
_STREAM_SWEEP_NOISE = 1
_STREAM_CAMERA = 2
_STREAM_LIDAR = 3
_STREAM_RADAR = 4
_STREAM_GPS = 5


def sample_rng(global_seed: int, index: int, stream: int) -> np.random.Generator:
    """Per-(sample, purpose) generator; bit-reproducible across runs."""
    return np.random.default_rng([int(global_seed), int(index), int(stream)])


def sample_seed(global_seed: int, index: int, stream: int) -> int:
    return int(
        np.random.SeedSequence([int(global_seed), int(index), int(stream)]).generate_state(1)[0]
    )


@dataclass
class SensorConfig:
    """Desk-scale knobs for the modality synthesizers and preprocessors."""

    camera_h: int = 64
    camera_w: int = 64
    camera_noise: float = 0.02
    lidar_range_m: float = 100.0
    lidar_clutter_points: int = 40
    lidar_vehicle_points: int = 60
    lidar_noise_m: float = 0.05
    bev_h: int = 32
    bev_w: int = 32
    bev_fov: tuple = (-60.0, 60.0, 0.0, 40.0)  # x_min, x_max, y_min, y_max (m)
    radar_a: int = 4
    radar_s: int = 64
    radar_c: int = 16
    radar_noise: float = 0.05
    radar_grid_h: int = 32
    radar_grid_w: int = 32
    radar_range_max_m: float = 150.0
    radar_vel_max_ms: float = 30.0
    gps_noise_m: float = 0.5


@dataclass
class ScenarioConfig:
    num_samples: int = 200
    num_elements: int = 16
    num_beams: int = 64
    noise_var: float = 0.0
    bs_offset_m: float = 10.0
    road_extent_m: float = 120.0
    # back-and-forth traversals of the extent within one sequence; > 1 makes
    # every road segment (hence every in-band beam) appear in the train range
    # of the contiguous split
    num_passes: int = 4
    speed_min: float = 8.0
    speed_max: float = 15.0
    num_paths: int = 3
    path_gain_decay: float = 0.3
    blockage_prob: float = 0.0
    blockage_attenuation: float = 0.05
    global_seed: int = 0
    modalities: tuple = MODALITIES
    sensors: SensorConfig = field(default_factory=SensorConfig)

    def __post_init__(self):
        if self.num_samples < 1:
            raise ConfigError("scenario.num_samples: must be >= 1")
        if self.num_elements < 1 or self.num_beams < 1:
            raise ConfigError("scenario.num_elements/num_beams: must be >= 1")
        if self.noise_var < 0:
            raise ConfigError("scenario.noise_var: must be >= 0")
        if not (0.0 <= self.blockage_prob <= 1.0):
            raise ConfigError("scenario.blockage_prob: must be in [0, 1]")
        if self.speed_min <= 0 or self.speed_max < self.speed_min:
            raise ConfigError("scenario.speed_min/speed_max: need 0 < min <= max")
        if self.num_paths < 1:
            raise ConfigError("scenario.num_paths: must be >= 1")
        if self.num_passes < 1:
            raise ConfigError("scenario.num_passes: must be >= 1")
        if self.bs_offset_m <= 0 or self.road_extent_m <= 0:
            raise ConfigError("scenario.bs_offset_m/road_extent_m: must be > 0")
        unknown = set(self.modalities) - set(MODALITIES)
        if unknown:
            raise ConfigError(f"scenario.modalities: unknown {sorted(unknown)}")
        if "mmwave" not in self.modalities:
            raise ConfigError("scenario.modalities: mmwave is the label source and is required")


@dataclass
class SceneState:
    """Ground truth for one sample; feeds every modality synthesizer."""

    position: tuple  # (x, y) m, BS at origin, road parallel to x at y = bs_offset
    velocity_x: float  # signed m/s along the road
    path_angles: np.ndarray  # radians, entry 0 is LoS
    path_gains: np.ndarray  # complex, entry 0 is LoS
    blocked: bool

    @property
    def speed(self) -> float:
        return abs(self.velocity_x)

    @property
    def los_angle(self) -> float:
        return float(self.path_angles[0])

    @property
    def range_m(self) -> float:
        x, y = self.position
        return math.hypot(x, y)

    @property
    def radial_speed(self) -> float:
        """Range rate toward/away from the BS (positive = receding)."""
        x, y = self.position
        r = self.range_m
        return self.velocity_x * x / r if r > 0 else 0.0


def generate_scene(config: ScenarioConfig, index: int) -> SceneState:
    """Deterministic scene for one sample index."""
    if not (0 <= index < config.num_samples):
        raise InvalidArgumentError(
            f"generate_scene: index {index} outside [0, {config.num_samples})"
        )
    rng = sample_rng(config.global_seed, index, _STREAM_SCENE)

    # piecewise-linear traversal: num_passes back-and-forth sweeps of the
    # extent over the sequence, with small per-sample jitter
    extent = config.road_extent_m
    if config.num_samples > 1:
        progress = index / (config.num_samples - 1) * config.num_passes
    else:
        progress = 0.5
    pass_idx = min(int(progress), config.num_passes - 1)
    t = progress - pass_idx
    outbound = pass_idx % 2 == 0
    frac = t if outbound else 1.0 - t
    jitter = rng.normal(0.0, extent * config.num_passes / (8.0 * config.num_samples))
    x = -extent / 2.0 + frac * extent + jitter
    x = float(np.clip(x, -extent / 2.0, extent / 2.0))
    y = config.bs_offset_m
    speed = float(rng.uniform(config.speed_min, config.speed_max))
    velocity_x = speed if outbound else -speed
    blocked = bool(rng.random() < config.blockage_prob)

    los_angle = math.atan2(x, y)
    angles = [los_angle]
    gains = [np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))]
    if blocked:
        gains[0] = gains[0] * config.blockage_attenuation
    for k in range(1, config.num_paths):
        angles.append(float(rng.uniform(-0.95 * math.pi / 2, 0.95 * math.pi / 2)))
        mag = config.path_gain_decay**k
        gains.append(mag * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi)))

    return SceneState(
        position=(x, y),
        velocity_x=velocity_x,
        path_angles=np.array(angles),
        path_gains=np.array(gains, dtype=np.complex128),
        blocked=blocked,
    )


def scene_to_channel(scene: SceneState, num_elements: int) -> np.ndarray:
    """h = sum over paths of gain_k * steering_vector(N, angle_k)."""
    if num_elements < 1:
        raise InvalidArgumentError("scene_to_channel: num_elements must be >= 1")
    h = np.zeros(num_elements, dtype=np.complex128)
    for gain, angle in zip(scene.path_gains, scene.path_angles):
        h += gain * steering_vector(num_elements, float(angle))
    return h


def scene_powers(config: ScenarioConfig, scene: SceneState, codebook: Codebook, index: int) -> np.ndarray:
    """Beam-sweep power vector for a scene, with per-sample seeded noise."""
    h = scene_to_channel(scene, config.num_elements)
    seed = sample_seed(config.global_seed, index, _STREAM_SWEEP_NOISE)
    return sweep_powers(h, codebook, config.noise_var, seed)
