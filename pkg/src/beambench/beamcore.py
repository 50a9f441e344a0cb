"""Codebook receiver math: steering vectors, DFT codebook, beam sweep,
oracle beam selection, and the pointwise SNR/rate/gap formulas.

All powers are linear; rates are bits/s/Hz; gaps are dB. Every function is
pure (randomness only through an explicit seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericError

# Linear power floor applied before any log or ratio; avoids -inf dB on
# deep fades.
POWER_FLOOR = 1e-12


def _check_finite(vec: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(vec)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class Codebook:
    """Receive codebook: ``beams`` is (num_beams, num_elements) complex."""

    num_elements: int
    beams: np.ndarray

    def __post_init__(self):
        if self.num_elements < 1:
            raise InvalidArgumentError("codebook: num_elements must be >= 1")
        if self.beams.ndim != 2 or self.beams.shape[0] < 1:
            raise InvalidArgumentError("codebook: needs at least one beam")
        if self.beams.shape[1] != self.num_elements:
            raise InvalidArgumentError(
                f"codebook: beam length {self.beams.shape[1]} != num_elements {self.num_elements}"
            )
        _check_finite(self.beams, "codebook beams")
        norms = np.linalg.norm(self.beams, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise InvalidArgumentError("codebook: beams must have unit L2 norm")

    @property
    def num_beams(self) -> int:
        return self.beams.shape[0]


@dataclass(frozen=True)
class LinkMetrics:
    snr: float
    rate: float


def build_dft_codebook(num_elements: int, num_beams: int) -> Codebook:
    """B-point oversampled DFT codebook over an N-element array.

    Beam i, element n: (1/sqrt(N)) * exp(j*2*pi*n*i/B). Every beam is
    unit-norm; the square (B == N) case is orthonormal.
    """
    if num_elements < 1 or num_beams < 1:
        raise InvalidArgumentError(
            f"build_dft_codebook: sizes must be positive, got ({num_elements}, {num_beams})"
        )
    n = np.arange(num_elements)
    i = np.arange(num_beams)
    phase = 2.0 * np.pi * np.outer(i, n) / num_beams
    beams = np.exp(1j * phase) / math.sqrt(num_elements)
    return Codebook(num_elements=num_elements, beams=beams)


def beam_angles(num_beams: int) -> np.ndarray:
    """Steering angle (radians) of each DFT beam.

    Beam i points at spatial frequency u = 2i/B, wrapped to [-1, 1);
    the angle is arcsin(u).
    """
    u = 2.0 * np.arange(num_beams) / num_beams
    u = (u + 1.0) % 2.0 - 1.0
    return np.arcsin(u)


def steering_vector(num_elements: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response: element n = exp(j*pi*n*sin(angle))."""
    if num_elements < 1:
        raise InvalidArgumentError("steering_vector: num_elements must be >= 1")
    if not math.isfinite(angle) or abs(angle) > math.pi / 2:
        raise InvalidArgumentError(
            f"steering_vector: angle {angle} outside [-pi/2, pi/2]"
        )
    n = np.arange(num_elements)
    return np.exp(1j * np.pi * n * math.sin(angle))


def sweep_powers(
    channel: np.ndarray,
    codebook: Codebook,
    noise_var: float = 0.0,
    rng_seed: int = 0,
) -> np.ndarray:
    """Per-beam receive powers p_i = |w_i^H (h + n)|^2 for a unit symbol.

    Noise is i.i.d. circular complex Gaussian with variance ``noise_var``
    per element; noise_var = 0 gives the deterministic |w_i^H h|^2.
    """
    channel = np.asarray(channel, dtype=np.complex128)
    if channel.ndim != 1 or channel.shape[0] != codebook.num_elements:
        raise InvalidArgumentError(
            f"sweep_powers: channel length {channel.shape} != codebook elements "
            f"{codebook.num_elements}"
        )
    _check_finite(channel, "channel")
    if noise_var < 0:
        raise InvalidArgumentError("sweep_powers: noise_var must be >= 0")
    y = channel
    if noise_var > 0:
        rng = np.random.default_rng(rng_seed)
        scale = math.sqrt(noise_var / 2.0)
        n = rng.normal(0.0, scale, channel.shape) + 1j * rng.normal(
            0.0, scale, channel.shape
        )
        y = channel + n
    z = codebook.beams.conj() @ y
    return np.abs(z) ** 2


def oracle_beam(powers: np.ndarray) -> int:
    """Index of the maximum power; ties broken by lowest index."""
    powers = np.asarray(powers)
    if powers.size == 0:
        raise InvalidArgumentError("oracle_beam: empty power vector")
    _check_finite(powers, "powers")
    return int(np.argmax(powers))


def link_metrics(power: float, noise_var: float) -> LinkMetrics:
    """Post-beamforming SNR and rate: snr = p/sigma^2, rate = log2(1+snr)."""
    if noise_var <= 0:
        raise InvalidArgumentError(f"link_metrics: noise_var must be > 0, got {noise_var}")
    if power < 0 or not math.isfinite(power):
        raise InvalidArgumentError(f"link_metrics: power must be finite and >= 0, got {power}")
    snr = power / noise_var
    return LinkMetrics(snr=snr, rate=math.log2(1.0 + snr))


def _floored(power: float, name: str) -> float:
    if not math.isfinite(power) or power < 0:
        raise NumericError(f"{name} must be finite and >= 0, got {power}")
    return max(power, POWER_FLOOR)


def snr_gap_db(p_opt: float, p_pred: float) -> float:
    """10*log10(p_opt / p_pred), both floored at POWER_FLOOR."""
    po = _floored(p_opt, "p_opt")
    pp = _floored(p_pred, "p_pred")
    return 10.0 * math.log10(po / pp)


def rate_loss(p_opt: float, p_pred: float, noise_var: float) -> float:
    """Rate under the oracle beam minus rate under the predicted beam.

    Computed as the literal difference of two link_metrics rates so the
    compositional identity holds exactly.
    """
    return link_metrics(p_opt, noise_var).rate - link_metrics(p_pred, noise_var).rate
