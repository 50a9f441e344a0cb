"""Canonical on-disk dataset: manifest.json plus one .bmt tensor per
modality, a contiguous 70/15/15 split, and the index-aligned loader.

All modalities are aligned by sample index with the mmWave power sequence
as the reference; oracle labels are stored explicitly and re-derived on
open as a corruption check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bmt
from .beamcore import build_dft_codebook, oracle_beam
from .errors import InvalidArgumentError, MissingArtifactError, MissingModalityError
from .scenario import MODALITIES, ScenarioConfig, generate_scene, scene_powers
from .sensing import lidar_to_bev, radar_input, radar_maps, synth_modalities

MANIFEST_NAME = "manifest.json"
_REQUIRED_KEYS = ("version", "num_samples", "codebook", "noise_var", "modalities", "split", "labels")

_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64", np.dtype(np.complex64): "c64"}


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous [start, end) ranges jointly covering [0, n)."""

    train: tuple
    val: tuple
    test: tuple

    def indices(self, name: str) -> np.ndarray:
        lo, hi = getattr(self, name)
        return np.arange(lo, hi)

    def as_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}


def make_split(n: int) -> SplitSpec:
    """70/15/15 contiguous partition with floor rounding.

    Boundaries are floor(0.70*n) and floor(0.85*n), computed in integer
    arithmetic so binary rounding of 0.70*n can never shift them.
    """
    if n < 3:
        raise InvalidArgumentError(f"make_split: need n >= 3, got {n}")
    a = n * 70 // 100
    b = n * 85 // 100
    return SplitSpec(train=(0, a), val=(a, b), test=(b, n))


@dataclass
class SampleRecord:
    """One synchronized sample; payload arrays are model-input shaped."""

    index: int
    power: np.ndarray  # (B,) f32
    oracle: int
    camera: np.ndarray | None = None  # (3, H, W) f32
    bev: np.ndarray | None = None  # (1, Hb, Wb) f32
    radar: np.ndarray | None = None  # (2, Hr, Wr) f32
    gps: np.ndarray | None = None  # (4,) f64
    presence: dict = field(default_factory=dict)

    def payload(self, modality: str):
        return {
            "camera": self.camera,
            "lidar": self.bev,
            "radar": self.radar,
            "gps": self.gps,
            "mmwave": self.power,
        }[modality]


def synthesize_records(config: ScenarioConfig) -> list:
    """Generate the full synthetic sample sequence for a scenario."""
    codebook = build_dft_codebook(config.num_elements, config.num_beams)
    s = config.sensors
    records = []
    for index in range(config.num_samples):
        scene = generate_scene(config, index)
        power = scene_powers(config, scene, codebook, index).astype(np.float32)
        rec = SampleRecord(index=index, power=power, oracle=oracle_beam(power))
        want = set(config.modalities)
        if want - {"mmwave"}:
            camera, cloud, cube, gps = synth_modalities(scene, config, index)
            if "camera" in want:
                rec.camera = np.transpose(camera, (2, 0, 1)).astype(np.float32)
            if "lidar" in want:
                bev = lidar_to_bev(cloud, s.bev_h, s.bev_w, s.bev_fov)
                rec.bev = bev.grid[None, :, :].astype(np.float32)
            if "radar" in want:
                rec.radar = radar_input(radar_maps(cube), s.radar_grid_h, s.radar_grid_w)
            if "gps" in want:
                rec.gps = gps.as_array()
        rec.presence = {m: (rec.payload(m) is not None) for m in MODALITIES}
        records.append(rec)
    return records


def write_dataset(records, root, num_elements: int, num_beams: int, noise_var: float) -> dict:
    """Write records to ``root``; returns the manifest dict.

    Round-trips bit-exactly: every array is stored little-endian in the
    .bmt container and the manifest is serialized with sorted keys.
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("write_dataset: empty sample list")
    for pos, rec in enumerate(records):
        if rec.index != pos:
            raise InvalidArgumentError(
                f"write_dataset: indices must be contiguous from 0, got {rec.index} at {pos}"
            )
        if rec.oracle != oracle_beam(rec.power):
            raise InvalidArgumentError(f"write_dataset: sample {pos} oracle != argmax(power)")
    n = len(records)
    split = make_split(n)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    modalities = {}
    stored = {}
    for modality in MODALITIES:
        payloads = [rec.payload(modality) for rec in records]
        have = [p is not None for p in payloads]
        if not any(have):
            continue
        proto = payloads[have.index(True)]
        stack = np.stack(
            [p if p is not None else np.zeros_like(proto) for p in payloads], axis=0
        )
        stored[modality] = stack
        modalities[modality] = {
            "file": f"{modality}.bmt",
            "shape": list(stack.shape),
            "dtype": _DTYPE_NAMES[stack.dtype],
        }
        bmt.write_tensor(root / f"{modality}.bmt", stack)

    labels = np.array([rec.oracle for rec in records], dtype=np.float32)
    bmt.write_tensor(root / "labels.bmt", labels)
    presence = np.array(
        [[1.0 if rec.presence.get(m, False) else 0.0 for m in MODALITIES] for rec in records],
        dtype=np.float32,
    )
    bmt.write_tensor(root / "presence.bmt", presence)

    manifest = {
        "version": 1,
        "num_samples": n,
        "codebook": {"num_elements": num_elements, "num_beams": num_beams},
        "noise_var": noise_var,
        "modalities": modalities,
        "labels": {"file": "labels.bmt", "shape": [n], "dtype": "f32"},
        "presence": {"file": "presence.bmt", "order": list(MODALITIES)},
        "split": split.as_dict(),
        "assumptions": {"ordering": "single time-ordered sequence"},
    }
    with open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


@dataclass
class Batch:
    inputs: dict  # modality name -> stacked array
    labels: np.ndarray  # (n,) int64 oracle indices
    powers: np.ndarray  # (n, B) f32, always present for the evaluator


class DatasetReader:
    """Loads a written dataset into memory and serves aligned batches.

    Validates on open: manifest schema, per-modality shapes against the
    manifest, split partitioning, and stored labels == argmax(power).
    Keeps an access log of (purpose, indices) for leakage auditing.
    """

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.exists():
            raise MissingArtifactError(f"dataset manifest not found: {manifest_path}")
        with open(manifest_path) as fh:
            self.manifest = json.load(fh)
        for key in _REQUIRED_KEYS:
            if key not in self.manifest:
                raise InvalidArgumentError(f"manifest: missing required key '{key}'")
        n = int(self.manifest["num_samples"])
        sp = self.manifest["split"]
        self.split = SplitSpec(tuple(sp["train"]), tuple(sp["val"]), tuple(sp["test"]))
        if (
            self.split.train[0] != 0
            or self.split.train[1] != self.split.val[0]
            or self.split.val[1] != self.split.test[0]
            or self.split.test[1] != n
        ):
            raise InvalidArgumentError("manifest: split ranges do not partition [0, n)")

        self.arrays = {}
        for name, meta in self.manifest["modalities"].items():
            arr = bmt.read_tensor(self.root / meta["file"])
            if list(arr.shape) != list(meta["shape"]):
                raise InvalidArgumentError(
                    f"manifest: {name} shape {list(arr.shape)} disagrees with manifest {meta['shape']}"
                )
            if arr.shape[0] != n:
                raise InvalidArgumentError(f"manifest: {name} sample count != num_samples")
            self.arrays[name] = arr
        if "mmwave" not in self.arrays:
            raise InvalidArgumentError("manifest: mmwave power modality is required")

        labels = bmt.read_tensor(self.root / self.manifest["labels"]["file"])
        self.labels = labels.astype(np.int64)
        if self.labels.shape != (n,):
            raise InvalidArgumentError("manifest: labels shape mismatch")
        rederived = np.argmax(self.arrays["mmwave"], axis=1)
        if not np.array_equal(rederived, self.labels):
            raise InvalidArgumentError("dataset: stored labels disagree with argmax(power)")

        if "presence" in self.manifest:
            pres = bmt.read_tensor(self.root / self.manifest["presence"]["file"])
            order = self.manifest["presence"]["order"]
            self.presence = {m: pres[:, k] > 0.5 for k, m in enumerate(order)}
        else:
            self.presence = {m: np.ones(n, dtype=bool) for m in self.arrays}
        self.num_samples = n
        self.num_beams = int(self.manifest["codebook"]["num_beams"])
        self.access_log = []

    def batch(self, indices, active_modalities, log_as: str = "read") -> Batch:
        """Aligned tensors for ``indices`` restricted to ``active_modalities``.

        Oracle labels and raw power vectors ride along regardless of the
        active set (the evaluator needs them even when mmWave is not an
        input).
        """
        indices = np.asarray(indices, dtype=np.int64)
        active = list(active_modalities)
        if not active:
            raise InvalidArgumentError("batch: active_modalities must be nonempty")
        if indices.size == 0:
            raise InvalidArgumentError("batch: empty index list")
        if np.any((indices < 0) | (indices >= self.num_samples)):
            raise InvalidArgumentError("batch: index out of range")
        inputs = {}
        for name in active:
            if name not in self.arrays:
                raise MissingModalityError(f"modality '{name}' not stored in this dataset")
            missing = indices[~self.presence[name][indices]]
            if missing.size:
                raise MissingModalityError(
                    f"sample {int(missing[0])} has no '{name}' payload"
                )
            inputs[name] = self.arrays[name][indices]
        self.access_log.append((log_as, tuple(int(i) for i in indices)))
        return Batch(inputs=inputs, labels=self.labels[indices], powers=self.arrays["mmwave"][indices])

    def gps_values(self) -> np.ndarray:
        if "gps" not in self.arrays:
            raise MissingModalityError("modality 'gps' not stored in this dataset")
        return self.arrays["gps"]

    def grad_indices_served(self):
        """All indices handed out for gradient updates (purpose 'grad')."""
        out = []
        for purpose, idx in self.access_log:
            if purpose == "grad":
                out.extend(idx)
        return out


def prepare_model_inputs(batch: Batch, gps_stats=None, gps_fields=None) -> dict:
    """Batch arrays -> model-ready float32 inputs.

    GPS is normalized with train-split stats and optionally masked down to
    ``gps_fields`` (a subset of the four stored fields, keeping order).
    """
    from .sensing import GPS_FIELD_NAMES, normalize_gps

    inputs = {}
    for name, arr in batch.inputs.items():
        if name == "gps":
            if gps_stats is None:
                raise InvalidArgumentError("gps is active but no normalization stats were given")
            arr = normalize_gps(arr, gps_stats)
            if gps_fields is not None:
                cols = [GPS_FIELD_NAMES.index(f) for f in gps_fields]
                arr = arr[:, cols]
            inputs[name] = arr
        else:
            inputs[name] = arr.astype(np.float32, copy=False)
    return inputs
