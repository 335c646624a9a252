"""Signal-quality metrics and the per-clip accept/reject gate.

Found recordings come with no clean reference, so SNR is estimated
blind: frame energies are split into speech and noise classes by an
energy threshold, and the speech-class power is corrected by the noise
power before taking the ratio. The primary threshold is three times the
30th energy percentile; when that fails to separate the classes (low
SNR pushes both below it) the split falls back to the geometric
midpoint of the 10th and 90th percentiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audiocore import AudioBuffer, frame_energies
from .errors import SnrUndefinedError

SNR_CLAMP_DB = (-10.0, 60.0)
MIN_SNR_DURATION = 0.5
SILENCE_REL_THRESHOLD = 1e-5
SILENCE_ABS_FLOOR = 1e-10


@dataclass(frozen=True)
class QualityGateConfig:
    min_snr_db: float = 12.0
    max_silence_ratio: float = 0.4
    # defaults track the segmenter bounds: [target - 2*tol, target + tol + pad]
    min_duration: float = 4.0
    max_duration: float = 10.25

    def __post_init__(self):
        if self.min_duration >= self.max_duration:
            raise ValueError(
                f"min_duration {self.min_duration} must be below "
                f"max_duration {self.max_duration}"
            )


@dataclass(frozen=True)
class QualityReport:
    snr_db: float | None
    silence_ratio: float
    duration: float
    passed: bool
    reasons: tuple[str, ...] = field(default=())


def _split_frames(energies: np.ndarray) -> np.ndarray:
    """Boolean speech mask over frames, or raise when no split exists."""
    if energies.size == 0 or not np.any(energies > 0):
        raise SnrUndefinedError("SNR undefined: signal carries no energy")
    threshold = 3.0 * np.percentile(energies, 30)
    mask = energies > threshold
    if mask.all() or not mask.any():
        low, high = np.percentile(energies, [10, 90])
        if low <= 0 or high <= 0 or low == high:
            raise SnrUndefinedError(
                "SNR undefined: frame energies do not separate into speech and noise"
            )
        threshold = math.sqrt(low * high)
        mask = energies > threshold
        if mask.all() or not mask.any():
            raise SnrUndefinedError(
                "SNR undefined: frame energies do not separate into speech and noise"
            )
    return mask


def estimate_snr(buf: AudioBuffer) -> float:
    """Blind SNR estimate in dB, clamped to [-10, 60].

    Speech-class frame power minus noise-class power over noise power;
    scale-invariant by construction.
    """
    if buf.duration < MIN_SNR_DURATION:
        raise ValueError(
            f"estimate_snr needs at least {MIN_SNR_DURATION}s, got {buf.duration:.3f}s"
        )
    energies = frame_energies(buf).energies
    mask = _split_frames(energies)
    speech = float(energies[mask].mean())
    noise = float(energies[~mask].mean())
    if noise <= 0 or speech <= noise:
        raise SnrUndefinedError("SNR undefined: speech power does not exceed noise power")
    snr = 10.0 * math.log10((speech - noise) / noise)
    return float(min(max(snr, SNR_CLAMP_DB[0]), SNR_CLAMP_DB[1]))


def silence_ratio(buf: AudioBuffer) -> float:
    """Fraction of frames below 1e-5 of the loudest frame (absolute floor 1e-10).

    Partial tail frames count as zero-padded, so appending silence can
    only ever raise the ratio.
    """
    energies = frame_energies(buf, include_partial=True).energies
    if energies.size == 0:
        return 1.0
    threshold = max(SILENCE_REL_THRESHOLD * float(energies.max()), SILENCE_ABS_FLOOR)
    return float(np.count_nonzero(energies < threshold) / energies.size)


def quality_gate(buf: AudioBuffer, cfg: QualityGateConfig) -> QualityReport:
    """Evaluate every criterion (no short-circuit) and collect failures."""
    reasons: list[str] = []
    duration = buf.duration

    snr: float | None = None
    try:
        snr = estimate_snr(buf)
        if snr < cfg.min_snr_db:
            reasons.append("snr_below_min")
    except (SnrUndefinedError, ValueError):
        reasons.append("unmeasurable")

    ratio = silence_ratio(buf)
    if ratio > cfg.max_silence_ratio:
        reasons.append("silence_above_max")

    if duration < cfg.min_duration:
        reasons.append("too_short")
    if duration > cfg.max_duration:
        reasons.append("too_long")

    return QualityReport(
        snr_db=snr,
        silence_ratio=ratio,
        duration=duration,
        passed=not reasons,
        reasons=tuple(reasons),
    )
