"""Model checkpoints: one .bmt per parameter plus a manifest carrying the
model config, so shapes are validated on load."""

from __future__ import annotations

import json
from pathlib import Path

from . import bmt
from .errors import InvalidArgumentError, MissingArtifactError
from .model import FusionModel, ModelConfig

MANIFEST_NAME = "checkpoint.json"


def save_checkpoint(model: FusionModel, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    tensors = {}
    for i, (name, tensor) in enumerate(sorted(model.params().items())):
        fname = f"t{i:04d}.bmt"
        bmt.write_tensor(root / fname, tensor.data)
        tensors[name] = {"file": fname, "shape": list(tensor.shape), "dtype": str(tensor.dtype)}
    manifest = {"model_config": model.config.as_dict(), "tensors": tensors}
    with open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(root) -> FusionModel:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingArtifactError(f"checkpoint not found: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    config = ModelConfig.from_dict(manifest["model_config"])
    model = FusionModel(config, seed=0)
    params = model.params()
    stored = manifest["tensors"]
    if set(stored) != set(params):
        raise InvalidArgumentError("checkpoint: parameter names disagree with model config")
    for name, meta in stored.items():
        arr = bmt.read_tensor(root / meta["file"])
        if tuple(arr.shape) != params[name].shape:
            raise InvalidArgumentError(
                f"checkpoint: '{name}' shape {arr.shape} != expected {params[name].shape}"
            )
        params[name].data = arr.astype(params[name].dtype, copy=False)
    return model
