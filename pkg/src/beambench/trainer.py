"""Training loop for the beam classifier.

The optimized objective is batch-mean CE + lambda_gap * soft SNR gap,
where the soft gap is the posterior-expected per-beam gap (the hard
argmax gap has zero gradient almost everywhere and stays an evaluation
metric). The latency weight lambda_tau is constant w.r.t. the parameters
for a fixed sensor set, so it enters only the evaluation-time ranking
score, never the gradients.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .beamcore import POWER_FLOOR
from .dataset import DatasetReader, prepare_model_inputs
from .errors import ConfigError, InvalidArgumentError, TrainingDivergenceError
from .evaluator import topk_accuracy
from .model import FusionModel, ModelConfig
from .scenario import MODALITIES
from .sensing import GpsStats
from .tensor import Adam, Tensor, gather_rows, log, no_grad, tensor_mean, tensor_sum

EPS_NUM = 1e-12


@dataclass
class TrainConfig:
    lambda_gap: float = 0.1
    lambda_tau: float = 0.0
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    modalities: tuple = ("mmwave",)
    power_floor: float = POWER_FLOOR

    def __post_init__(self):
        if self.lambda_gap < 0 or self.lambda_tau < 0:
            raise ConfigError("train.lambda_gap/lambda_tau: must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("train.batch_size/epochs: must be >= 1")
        if not self.modalities:
            raise ConfigError("train.modalities: must be nonempty")
        unknown = set(self.modalities) - set(MODALITIES)
        if unknown:
            raise ConfigError(f"train.modalities: unknown {sorted(unknown)}")


@dataclass
class TrainLog:
    """Per-epoch metrics plus wall-clock timing.

    The metric rows serialize to a (epoch, split, metric, value) CSV; the
    wall-clock column is machine entropy and goes to a separate timing
    CSV so the metrics file is byte-reproducible under a fixed seed.
    """

    rows: list = field(default_factory=list)
    wall_clock_s: list = field(default_factory=list)

    def add(self, epoch: int, split: str, metric: str, value: float):
        self.rows.append((epoch, split, metric, float(value)))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epoch,split,metric,value\n")
            for epoch, split, metric, value in self.rows:
                fh.write(f"{epoch},{split},{metric},{value:.10g}\n")

    def timing_to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epoch,wall_clock_s\n")
            for epoch, seconds in enumerate(self.wall_clock_s):
                fh.write(f"{epoch},{seconds:.6f}\n")

    def series(self, split: str, metric: str):
        return [v for e, s, m, v in self.rows if s == split and m == metric]


@dataclass
class TrainResult:
    model: FusionModel
    log: TrainLog
    best_epoch: int
    best_val_top1: float
    gps_stats: GpsStats | None


def cross_entropy(posterior: Tensor, labels) -> Tensor:
    """Batch-mean -ln(probs[label] + eps)."""
    labels = np.asarray(labels)
    num_beams = posterior.shape[-1]
    if labels.size and (labels.min() < 0 or labels.max() >= num_beams):
        raise InvalidArgumentError(f"cross_entropy: label out of range [0, {num_beams})")
    picked = gather_rows(posterior, labels)
    return tensor_mean(log(picked + EPS_NUM)) * -1.0


def gap_matrix(powers: np.ndarray, floor: float = POWER_FLOOR) -> np.ndarray:
    """Per-beam SNR gap (dB) to each sample's oracle beam; all entries >= 0."""
    p = np.maximum(np.asarray(powers, dtype=np.float64), floor)
    p_opt = p.max(axis=1, keepdims=True)
    return 10.0 * (np.log10(p_opt) - np.log10(p))


def soft_snr_gap(posterior: Tensor, powers: np.ndarray, floor: float = POWER_FLOOR) -> Tensor:
    """Posterior-expected SNR gap in dB, batch mean; zero iff the posterior
    is one-hot on each sample's oracle beam."""
    gaps = Tensor(gap_matrix(powers, floor).astype(np.float32))
    per_sample = tensor_sum(posterior * gaps, axis=1)
    return tensor_mean(per_sample)


def _batched_posteriors(model, reader, indices, modalities, gps_stats, batch_size, log_as):
    chunks = []
    fields = model.config.gps_fields
    for lo in range(0, len(indices), batch_size):
        batch = reader.batch(indices[lo : lo + batch_size], modalities, log_as=log_as)
        with no_grad():
            post = model.forward(prepare_model_inputs(batch, gps_stats, fields))
        chunks.append(post.data)
    return np.concatenate(chunks, axis=0)


def train(train_cfg: TrainConfig, model_cfg: ModelConfig, reader: DatasetReader) -> TrainResult:
    """Train on the contiguous train split; keep the best-val-Top-1 weights.

    Fully seeded: two runs with identical inputs produce identical logs
    and parameters. Gradient batches are drawn exclusively from the train
    split (the reader's access log makes this auditable).
    """
    split = reader.split
    train_idx = split.indices("train")
    val_idx = split.indices("val")
    modalities = list(train_cfg.modalities)

    # train-split-only normalization stats; computed whenever the dataset
    # stores gps so the checkpoint can later evaluate any modality subset
    gps_stats = None
    if "gps" in reader.arrays:
        gps_stats = GpsStats.from_training(reader.gps_values(), train_idx, split.train)
        model_cfg.gps_stats = {"mean": gps_stats.mean.tolist(), "std": gps_stats.std.tolist()}

    model = FusionModel(model_cfg, seed=train_cfg.seed)
    params = model.params()
    opt = Adam(params.values(), lr=train_cfg.lr)
    log_ = TrainLog()

    best_epoch, best_top1 = -1, -1.0
    best_state = None
    for epoch in range(train_cfg.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([train_cfg.seed, epoch]).permutation(train_idx)
        ce_sum = gap_sum = loss_sum = 0.0
        for lo in range(0, len(order), train_cfg.batch_size):
            idx = order[lo : lo + train_cfg.batch_size]
            batch = reader.batch(idx, modalities, log_as="grad")
            posterior = model.forward(prepare_model_inputs(batch, gps_stats, model_cfg.gps_fields))
            ce = cross_entropy(posterior, batch.labels)
            gap = soft_snr_gap(posterior, batch.powers, train_cfg.power_floor)
            loss = ce + gap * train_cfg.lambda_gap
            if not np.isfinite(loss.item()):
                raise TrainingDivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {lo // train_cfg.batch_size}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            w = len(idx)
            ce_sum += ce.item() * w
            gap_sum += gap.item() * w
            loss_sum += loss.item() * w

        n_train = len(order)
        log_.add(epoch, "train", "ce", ce_sum / n_train)
        log_.add(epoch, "train", "soft_snr_gap_db", gap_sum / n_train)
        log_.add(epoch, "train", "loss", loss_sum / n_train)

        val_post = _batched_posteriors(
            model, reader, val_idx, modalities, gps_stats, train_cfg.batch_size, "eval"
        )
        val_labels = reader.labels[val_idx]
        val_powers = reader.arrays["mmwave"][val_idx]
        val_ce = float(np.mean(-np.log(val_post[np.arange(len(val_idx)), val_labels] + EPS_NUM)))
        val_gap = float(np.mean(np.sum(val_post * gap_matrix(val_powers, train_cfg.power_floor), axis=1)))
        log_.add(epoch, "val", "ce", val_ce)
        log_.add(epoch, "val", "soft_snr_gap_db", val_gap)
        log_.add(epoch, "val", "loss", val_ce + train_cfg.lambda_gap * val_gap)
        for k in (1, 3, 5):
            log_.add(epoch, "val", f"top{k}", topk_accuracy(val_post, val_labels, k))
        top1 = log_.series("val", "top1")[-1]
        if top1 > best_top1:
            best_top1, best_epoch = top1, epoch
            best_state = {name: t.data.copy() for name, t in params.items()}
        log_.wall_clock_s.append(time.perf_counter() - t0)

    for name, tensor in params.items():
        tensor.data = best_state[name]
    return TrainResult(
        model=model, log=log_, best_epoch=best_epoch, best_val_top1=best_top1, gps_stats=gps_stats
    )
