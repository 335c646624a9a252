"""Sample-accurate audio primitives.

WAV decode/encode, polyphase resampling, start-time trimming, silence
padding, and framewise energy analysis. All processing runs on float64
PCM in [-1, 1]; files are read and written as canonical RIFF/WAVE.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DecodeError

TARGET_RATE = 16000
DEFAULT_FRAME_LENGTH = 0.025
DEFAULT_HOP = 0.010

_TAPS_PER_PHASE = 64
_KAISER_BETA = 8.0


@dataclass(frozen=True)
class AudioBuffer:
    """PCM audio: float64 samples, shape (n,) mono or (n, channels)."""

    samples: np.ndarray
    sample_rate: int

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate

    def normalize(self) -> "AudioBuffer":
        """Downmix to mono (mean of channels) and resample to 16 kHz."""
        buf = downmix(self) if self.channels > 1 else self
        return resample(buf, TARGET_RATE)


@dataclass(frozen=True)
class FrameEnergies:
    """Per-frame mean-square energies over a sliding window."""

    frame_length: float
    hop: float
    energies: np.ndarray


def downmix(buf: AudioBuffer) -> AudioBuffer:
    if buf.channels == 1:
        return buf
    return AudioBuffer(buf.samples.mean(axis=1), buf.sample_rate)


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode a RIFF/WAVE container (16-bit PCM or 32-bit float).

    Samples are scaled to [-1, 1]; multi-channel stays interleaved as a
    2-D array until normalize().
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DecodeError("not a RIFF/WAVE container")

    fmt = None
    pcm = None
    for cid, body in _iter_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise DecodeError('truncated "fmt " chunk')
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == 0xFFFE and len(body) >= 26:
                # WAVE_FORMAT_EXTENSIBLE: real codec sits in the GUID
                sub = struct.unpack_from("<H", body, 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            pcm = body
            break
    if pcm is None:
        raise DecodeError("missing data chunk")
    if fmt is None:
        raise DecodeError('missing "fmt " chunk')

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels < 1 or sample_rate < 1:
        raise DecodeError('invalid "fmt " chunk: bad channel count or rate')
    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(pcm[: len(pcm) - len(pcm) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(pcm[: len(pcm) - len(pcm) % 4], dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise DecodeError(
            f'unsupported codec in "fmt " chunk: format={audio_format} bits={bits}'
        )

    n_frames = len(samples) // n_channels
    samples = samples[: n_frames * n_channels]
    if n_channels > 1:
        samples = samples.reshape(n_frames, n_channels)
    return AudioBuffer(samples, int(sample_rate))


def encode_wav(buf: AudioBuffer) -> bytes:
    """Encode as 16-bit PCM WAV. Samples are clipped to full scale."""
    samples = buf.samples
    if samples.ndim == 1:
        samples = samples[:, None]
    n_frames, n_channels = samples.shape
    ints = np.clip(np.rint(samples * 32768.0), -32768, 32767).astype("<i2")
    pcm = ints.tobytes()
    block_align = 2 * n_channels
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(pcm),
        b"WAVE",
        b"fmt ",
        16,
        1,
        n_channels,
        buf.sample_rate,
        buf.sample_rate * block_align,
        block_align,
        16,
        b"data",
        len(pcm),
    )
    return header + pcm


def read_wav(path: str | Path) -> AudioBuffer:
    return decode_wav(Path(path).read_bytes())


def write_wav(path: str | Path, buf: AudioBuffer) -> None:
    Path(path).write_bytes(encode_wav(buf))


def _design_kernel(up: int, down: int) -> np.ndarray:
    """Windowed-sinc lowpass for polyphase rate conversion.

    64 taps per output sample, Kaiser window beta=8, cutoff at the
    narrower of the two Nyquist limits. Each phase is normalized to
    unit DC gain so constant signals pass through unchanged.
    """
    n_taps = _TAPS_PER_PHASE * up
    t = (np.arange(n_taps) - (n_taps - 1) / 2) / up
    cutoff = min(1.0, up / down)
    kernel = cutoff * np.sinc(cutoff * t) * np.kaiser(n_taps, _KAISER_BETA)
    for phase in range(up):
        gain = kernel[phase::up].sum()
        if gain != 0.0:
            kernel[phase::up] /= gain
    return kernel


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited resampling of a mono buffer (windowed-sinc polyphase).

    Identity rates return a bit-exact copy; otherwise output duration is
    within one sample period of the input duration.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if buf.channels != 1:
        raise ValueError("resample requires a mono buffer; call normalize/downmix first")
    if buf.sample_rate == target_rate:
        return AudioBuffer(buf.samples.copy(), buf.sample_rate)

    x = buf.samples
    g = math.gcd(buf.sample_rate, target_rate)
    up = target_rate // g
    down = buf.sample_rate // g
    n_out = -(-len(x) * up // down)
    if n_out == 0:
        return AudioBuffer(np.zeros(0), target_rate)

    kernel = _design_kernel(up, down)
    # taps_rev[p, q] = kernel[p + (P-1-q)*up]: per-phase taps, time order
    taps_rev = kernel.reshape(_TAPS_PER_PHASE, up).T[:, ::-1]
    padded = np.concatenate([np.zeros(_TAPS_PER_PHASE - 1), x, np.zeros(1)])

    out = np.empty(n_out)
    block = 1 << 16
    offsets = np.arange(_TAPS_PER_PHASE)
    for lo in range(0, n_out, block):
        hi = min(lo + block, n_out)
        m = np.arange(lo, hi, dtype=np.int64) * down
        base = m // up
        phase = m % up
        out[lo:hi] = np.einsum(
            "ij,ij->i", padded[base[:, None] + offsets], taps_rev[phase]
        )
    return AudioBuffer(out, target_rate)


def trim_from(buf: AudioBuffer, start_time: float) -> AudioBuffer:
    """Drop everything before start_time (seconds)."""
    if start_time < 0:
        raise ValueError(f"start_time must be >= 0, got {start_time}")
    if start_time > buf.duration:
        raise ValueError(
            f"start_time {start_time} beyond buffer duration {buf.duration:.3f}"
        )
    idx = int(round(start_time * buf.sample_rate))
    return AudioBuffer(buf.samples[idx:], buf.sample_rate)


def pad_silence(buf: AudioBuffer, tail: float) -> AudioBuffer:
    """Append tail seconds of zeros."""
    if tail < 0:
        raise ValueError(f"tail must be >= 0, got {tail}")
    n = int(round(tail * buf.sample_rate))
    if n == 0:
        return buf
    if buf.samples.ndim == 1:
        zeros = np.zeros(n)
    else:
        zeros = np.zeros((n, buf.samples.shape[1]))
    return AudioBuffer(np.concatenate([buf.samples, zeros]), buf.sample_rate)


def frame_energies(
    buf: AudioBuffer,
    frame_length: float = DEFAULT_FRAME_LENGTH,
    hop: float = DEFAULT_HOP,
    include_partial: bool = False,
) -> FrameEnergies:
    """Mean-square energy per frame.

    With include_partial=False only complete frames count:
    floor((duration - frame_length)/hop) + 1 of them. With
    include_partial=True a frame starts at every hop before the buffer
    ends and the tail is treated as zero-padded, which keeps the frame
    set stable when silence is appended.
    """
    if buf.channels != 1:
        raise ValueError("frame_energies requires a mono buffer")
    rate = buf.sample_rate
    frame_n = int(round(frame_length * rate))
    hop_n = int(round(hop * rate))
    if frame_n < 1 or hop_n < 1:
        raise ValueError("frame_length and hop must cover at least one sample")
    x = buf.samples
    if not include_partial and len(x) < frame_n:
        raise ValueError(
            f"buffer of {buf.duration:.4f}s shorter than one {frame_length}s frame"
        )

    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    if include_partial:
        starts = np.arange(0, len(x), hop_n)
    else:
        starts = np.arange(0, len(x) - frame_n + 1, hop_n)
    ends = np.minimum(starts + frame_n, len(x))
    energies = np.maximum(csum[ends] - csum[starts], 0.0) / frame_n
    return FrameEnergies(frame_length=frame_length, hop=hop, energies=energies)
