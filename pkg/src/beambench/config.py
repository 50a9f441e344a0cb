"""Run configuration: one JSON file drives simulate/train/eval/report.

Sections: scenario, model, train, latency, eval. Every command echoes the
full parsed config into its output directory for reproducibility.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .evaluator import LatencyProfile
from .model import ModelConfig
from .scenario import MODALITIES, ScenarioConfig, SensorConfig
from .trainer import TrainConfig


@dataclass
class EvalConfig:
    split: str = "test"
    noise_var: float = 0.01
    batch_size: int = 64
    modality_sets: list = field(default_factory=lambda: [["mmwave"]])

    def __post_init__(self):
        if self.split not in ("train", "val", "test"):
            raise ConfigError(f"eval.split: unknown '{self.split}'")
        if self.noise_var <= 0:
            raise ConfigError("eval.noise_var: must be > 0 (it is the metric sigma^2)")
        if self.batch_size < 1:
            raise ConfigError("eval.batch_size: must be >= 1")
        for mset in self.modality_sets:
            unknown = set(mset) - set(MODALITIES)
            if unknown or not mset:
                raise ConfigError(f"eval.modality_sets: bad entry {mset}")


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    model: ModelConfig
    train: TrainConfig
    latency: LatencyProfile
    eval: EvalConfig
    inference_ms_pin: float | None = None
    raw: dict = field(default_factory=dict)


def _build(cls, section: dict, path: str, coerce_tuples=()):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    kwargs = dict(section)
    for key in coerce_tuples:
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config_dict(cfg: dict) -> RunConfig:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    scenario_d = dict(cfg.get("scenario", {}))
    sensors_d = scenario_d.pop("sensors", {})
    sensors = _build(SensorConfig, sensors_d, "scenario.sensors", coerce_tuples=("bev_fov",))
    scenario = _build(
        ScenarioConfig,
        {**scenario_d, "sensors": sensors},
        "scenario",
        coerce_tuples=("modalities",),
    )
    model = _build(
        ModelConfig, cfg.get("model", {}), "model", coerce_tuples=("conv_widths", "pool_hw", "gps_fields")
    )
    if model.num_beams != scenario.num_beams:
        raise ConfigError("model.num_beams: must equal scenario.num_beams")
    train = _build(TrainConfig, cfg.get("train", {}), "train", coerce_tuples=("modalities",))

    latency_d = dict(cfg.get("latency", {}))
    combiner = latency_d.pop("combiner", "max")
    inference_pin = latency_d.pop("inference_ms", None)
    for name, ms in latency_d.items():
        if not isinstance(ms, (int, float)):
            raise ConfigError(f"latency.{name}: must be a number")
    latency = LatencyProfile(sensor_ms=latency_d, combiner=combiner)

    eval_cfg = _build(EvalConfig, cfg.get("eval", {}), "eval")
    for mset in eval_cfg.modality_sets:
        for m in mset:
            if m not in scenario.modalities:
                raise ConfigError(f"eval.modality_sets: '{m}' not synthesized by the scenario")
    return RunConfig(
        scenario=scenario,
        model=model,
        train=train,
        latency=latency,
        eval=eval_cfg,
        inference_ms_pin=inference_pin,
        raw=cfg,
    )


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    return parse_config_dict(cfg)


def echo_config(run_cfg: RunConfig, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config_echo.json", "w") as fh:
        json.dump(run_cfg.raw, fh, indent=2, sort_keys=True)
        fh.write("\n")
