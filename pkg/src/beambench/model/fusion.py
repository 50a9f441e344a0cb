"""Token-based transformer fusion over any nonempty modality subset.

A learnable CLS token is prepended to the present-modality embeddings;
positional embeddings are keyed by modality identity (not sequence
position), so each sensor's token receives the same positional vector no
matter which subset is active. The classifier head reads the transformed
CLS token and emits a softmax posterior over beams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InvalidArgumentError, ShapeError
from ..scenario import MODALITIES
from ..tensor import (
    Tensor,
    embedding_lookup,
    relu,
    reshape,
    scaled_dot_product_attention,
    select,
    softmax,
    tensor_mean,
)
from ..tensor.nn import LayerNorm, Linear, token_init
from .encoders import ConvEncoder, MlpEncoder

# positional-embedding row per token identity; row 0 is the CLS token
POS_INDEX = {name: i + 1 for i, name in enumerate(MODALITIES)}


GPS_FIELDS = ("latitude", "longitude", "speed", "quality")


@dataclass
class ModelConfig:
    embed_dim: int = 64
    num_beams: int = 64
    fusion_layers: int = 2
    num_heads: int = 4
    # which stored GPS fields feed the encoder; the dataset always stores
    # all four
    gps_fields: tuple = GPS_FIELDS
    conv_widths: tuple = (8, 16, 32)
    pool_hw: tuple = (2, 2)
    readout: str = "cls"  # "cls" | "mean"
    gps_stats: dict | None = field(default=None)

    def __post_init__(self):
        if self.num_beams < 2:
            raise ConfigError("model.num_beams: must be >= 2")
        if self.embed_dim % self.num_heads != 0:
            raise ConfigError("model.embed_dim: must be divisible by num_heads")
        if self.readout not in ("cls", "mean"):
            raise ConfigError(f"model.readout: unknown '{self.readout}'")
        if not self.gps_fields or set(self.gps_fields) - set(GPS_FIELDS):
            raise ConfigError(f"model.gps_fields: must be a nonempty subset of {GPS_FIELDS}")

    def as_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "num_beams": self.num_beams,
            "fusion_layers": self.fusion_layers,
            "num_heads": self.num_heads,
            "gps_fields": list(self.gps_fields),
            "conv_widths": list(self.conv_widths),
            "pool_hw": list(self.pool_hw),
            "readout": self.readout,
            "gps_stats": self.gps_stats,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        for key in ("conv_widths", "pool_hw", "gps_fields"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class TransformerLayer:
    """Pre-norm encoder block: attention then a 4d feed-forward."""

    def __init__(self, dim: int, num_heads: int, rng):
        self.num_heads = num_heads
        self.ln1 = LayerNorm(dim)
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)
        self.ln2 = LayerNorm(dim)
        self.ff1 = Linear(dim, 4 * dim, rng)
        self.ff2 = Linear(4 * dim, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.ln1(x)
        attn = scaled_dot_product_attention(self.wq(h), self.wk(h), self.wv(h), self.num_heads)
        x = x + self.wo(attn)
        h = self.ln2(x)
        return x + self.ff2(relu(self.ff1(h)))

    def params(self, prefix: str):
        out = []
        for name in ("ln1", "wq", "wk", "wv", "wo", "ln2", "ff1", "ff2"):
            out += getattr(self, name).params(f"{prefix}.{name}")
        return out


class FusionModel:
    """Five encoders plus the transformer fusion head."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        d = config.embed_dim
        self.encoders = {
            "camera": ConvEncoder(3, d, rng, config.conv_widths, config.pool_hw),
            "lidar": ConvEncoder(1, d, rng, config.conv_widths, config.pool_hw),
            "radar": ConvEncoder(2, d, rng, config.conv_widths, config.pool_hw),
            "gps": MlpEncoder(len(config.gps_fields), d, rng),
            "mmwave": MlpEncoder(config.num_beams, d, rng),
        }
        self.cls_token = Tensor(token_init(rng, (1, 1, d)), requires_grad=True)
        self.pos_table = Tensor(token_init(rng, (1 + len(MODALITIES), d)), requires_grad=True)
        self.layers = [TransformerLayer(d, config.num_heads, rng) for _ in range(config.fusion_layers)]
        self.final_ln = LayerNorm(d)
        self.head = Linear(d, config.num_beams, rng)

    # -- token assembly ---------------------------------------------------
    def assemble_tokens(self, embeddings: dict):
        """[CLS] + present-modality tokens, plus identity-keyed positions.

        Returns (tokens Tensor (N, T, d), pos_ids used). Exposed so tests
        can check that a modality's positional row is subset-invariant.
        """
        present = [m for m in MODALITIES if m in embeddings]
        if not present:
            raise InvalidArgumentError("fuse: empty modality set")
        n = embeddings[present[0]].shape[0]
        d = self.config.embed_dim
        parts = [self.cls_token + Tensor(np.zeros((n, 1, d), dtype=np.float32))]
        for m in present:
            emb = embeddings[m]
            if emb.shape != (n, d):
                raise ShapeError(f"fuse: embedding for '{m}' has shape {emb.shape}, want ({n}, {d})")
            parts.append(reshape(emb, (n, 1, d)))
        from ..tensor import concat

        tokens = concat(parts, axis=1)
        pos_ids = np.array([0] + [POS_INDEX[m] for m in present])
        pos = embedding_lookup(self.pos_table, pos_ids)  # (T, d)
        return tokens + reshape(pos, (1, len(pos_ids), d)), pos_ids

    def encode(self, inputs: dict) -> dict:
        embeddings = {}
        for name in MODALITIES:
            if name in inputs:
                x = inputs[name]
                embeddings[name] = self.encoders[name](x if isinstance(x, Tensor) else Tensor(x))
        return embeddings

    def forward(self, inputs: dict) -> Tensor:
        """Beam posterior (N, B) from any nonempty modality subset."""
        if not inputs:
            raise InvalidArgumentError("fuse: empty modality set")
        tokens, _ = self.assemble_tokens(self.encode(inputs))
        for layer in self.layers:
            tokens = layer(tokens)
        tokens = self.final_ln(tokens)
        if self.config.readout == "cls":
            pooled = select(tokens, 1, 0)
        else:
            pooled = tensor_mean(tokens, axis=1)
        return softmax(self.head(pooled), axis=-1)

    __call__ = forward

    def params(self) -> dict:
        out = {"cls_token": self.cls_token, "pos_table": self.pos_table}
        for name, enc in self.encoders.items():
            out.update(dict(enc.params(f"enc.{name}")))
        for i, layer in enumerate(self.layers):
            out.update(dict(layer.params(f"fusion.{i}")))
        out.update(dict(self.final_ln.params("final_ln")))
        out.update(dict(self.head.params("head")))
        return out


def predict_beam(posterior) -> int:
    """argmax of one posterior row; ties break to the lowest index."""
    probs = posterior.data if isinstance(posterior, Tensor) else np.asarray(posterior)
    if probs.size == 0:
        raise InvalidArgumentError("predict_beam: empty posterior")
    return int(np.argmax(probs))


def predict_beams(posteriors) -> np.ndarray:
    probs = posteriors.data if isinstance(posteriors, Tensor) else np.asarray(posteriors)
    return np.argmax(probs, axis=-1)
