"""Segmentation strategies over word-level transcripts.

Three strategies: transcription-based (sentence-aware, the default),
pause-based (split at long timestamp gaps), and fixed-interval windows.
Plus sample-accurate extraction of segment audio.

The transcription-based builder consumes words in order. Once a segment
spans at least `target_duration - tolerance` seconds it looks for the
first word with a trailing punctuation mark that closes the segment
within `[target - tolerance, target + 1]` seconds; failing that it
extends the segment up to `target + tolerance` seconds and marks it for
trailing silence padding. A final partial segment shorter than
`target - 2*tolerance` is dropped, and when the segment count exceeds
`utterance_duration/target - 10` the newest non-sentence-final segments
are dropped until it no longer does.
"""

from __future__ import annotations

from dataclasses import dataclass

from .audiocore import AudioBuffer, pad_silence
from .transcripts import Transcript, Word

DEFAULT_PUNCTUATION = frozenset({".", "!", "?", ",", ";"})


@dataclass(frozen=True)
class SegmentationParams:
    target_duration: float = 8.0
    tolerance: float = 2.0
    punctuation: frozenset[str] = DEFAULT_PUNCTUATION
    trailing_pad: float = 0.25
    pause_threshold: float = 0.5
    fixed_interval: float = 6.0

    def __post_init__(self):
        if isinstance(self.punctuation, str):
            object.__setattr__(self, "punctuation", frozenset(self.punctuation))
        if not 0 < self.tolerance < self.target_duration:
            raise ValueError(
                f"tolerance must satisfy 0 < tolerance < target_duration, "
                f"got tolerance={self.tolerance} target_duration={self.target_duration}"
            )
        if self.trailing_pad < 0:
            raise ValueError(f"trailing_pad must be >= 0, got {self.trailing_pad}")
        if self.pause_threshold <= 0:
            raise ValueError(f"pause_threshold must be > 0, got {self.pause_threshold}")
        if self.fixed_interval <= 0:
            raise ValueError(f"fixed_interval must be > 0, got {self.fixed_interval}")


@dataclass(frozen=True)
class Segment:
    words: tuple[Word, ...]
    start: float
    end: float
    text: str
    ends_at_punctuation: bool
    padded: bool

    @property
    def duration(self) -> float:
        return self.end - self.start


def _make_segment(words, ends_at_punctuation: bool, padded: bool) -> Segment:
    words = tuple(words)
    return Segment(
        words=words,
        start=words[0].start,
        end=words[-1].end,
        text=" ".join(w.text for w in words),
        ends_at_punctuation=ends_at_punctuation,
        padded=padded,
    )


def _make_partial(words, params: SegmentationParams) -> Segment:
    # Partial segments (stream ran out, or an unbridgeable gap) keep the
    # sentence-final flag their last word earns; only incomplete ones pad.
    sentence_final = words[-1].trailing_char in params.punctuation
    return _make_segment(words, ends_at_punctuation=sentence_final, padded=not sentence_final)


def segment_by_transcript(t: Transcript, params: SegmentationParams) -> list[Segment]:
    words = t.words
    n = len(words)
    target = params.target_duration
    tol = params.tolerance
    reach = target - tol          # duration at which punctuation search opens
    search_limit = target + 1.0   # punctuation search window upper bound
    extend_limit = target + tol   # hard extension bound without punctuation
    keep_floor = target - 2 * tol # partial segments below this are dropped

    raw: list[Segment] = []
    i = 0
    while i < n:
        seg_start = words[i].start

        # first word at which the segment reaches the search-opening duration
        reach_at = None
        for k in range(i, n):
            if words[k].end - seg_start >= reach:
                reach_at = k
                break

        # first sentence-closing word inside [reach, search_limit]
        punct_at = None
        for k in range(i, n):
            duration = words[k].end - seg_start
            if duration > search_limit:
                break
            if duration >= reach and words[k].trailing_char in params.punctuation:
                punct_at = k
                break

        if punct_at is not None:
            raw.append(_make_segment(words[i : punct_at + 1], True, False))
            i = punct_at + 1
            continue

        if reach_at is None:
            # stream ended first: final partial segment, dropped when short
            if words[-1].end - seg_start >= keep_floor:
                raw.append(_make_partial(words[i:], params))
            break

        if words[reach_at].end - seg_start > extend_limit:
            # the word that first reaches the window already overshoots the
            # extension bound (long gap or oversize word): flush any prefix
            # and restart at the overshooting word's own start
            if reach_at > i:
                if words[reach_at - 1].end - seg_start >= keep_floor:
                    raw.append(_make_partial(words[i:reach_at], params))
                i = reach_at
            else:
                i += 1  # a single word wider than the bound can never fit
            continue

        # no punctuation in the window: extend while words fit
        k = reach_at
        while k + 1 < n and words[k + 1].end - seg_start <= extend_limit:
            k += 1
        raw.append(_make_segment(words[i : k + 1], False, True))
        i = k + 1

    # over-segmentation cap: drop newest non-sentence-final segments while
    # the count exceeds utterance_duration/target - 10 (disabled when <= 0)
    cap = t.utterance_duration / target - 10.0
    if cap > 0:
        idx = len(raw) - 1
        while len(raw) > cap and idx >= 0:
            if not raw[idx].ends_at_punctuation:
                raw.pop(idx)
            idx -= 1
    return raw


def segment_by_pause(t: Transcript, params: SegmentationParams) -> list[Segment]:
    """Split wherever the gap between consecutive words exceeds the pause threshold."""
    if not t.words:
        return []
    runs: list[list[Word]] = [[t.words[0]]]
    for word in t.words[1:]:
        if word.start - runs[-1][-1].end > params.pause_threshold:
            runs.append([word])
        else:
            runs[-1].append(word)
    return [
        _make_segment(run, run[-1].trailing_char in params.punctuation, False)
        for run in runs
    ]


def segment_fixed(t: Transcript, params: SegmentationParams) -> list[Segment]:
    """Assign words to fixed windows of `fixed_interval` seconds by start time."""
    if not t.words:
        return []
    runs: list[list[Word]] = []
    current_window = None
    for word in t.words:
        window = int(word.start // params.fixed_interval)
        if window != current_window:
            runs.append([])
            current_window = window
        runs[-1].append(word)
    return [
        _make_segment(run, run[-1].trailing_char in params.punctuation, False)
        for run in runs
    ]


def extract_segment_audio(
    buf: AudioBuffer, segment: Segment, params: SegmentationParams
) -> AudioBuffer:
    """Slice the segment's span out of the utterance audio.

    Segments marked `padded` get `trailing_pad` seconds of silence
    appended to mask the abrupt, non-sentence-final cut.
    """
    rate = buf.sample_rate
    start_idx = int(round(segment.start * rate))
    end_idx = int(round(segment.end * rate))
    if start_idx < 0 or end_idx > buf.samples.shape[0]:
        raise ValueError(
            f"segment [{segment.start:.3f}, {segment.end:.3f}]s outside "
            f"buffer of {buf.duration:.3f}s"
        )
    clip = AudioBuffer(buf.samples[start_idx:end_idx], rate)
    if segment.padded:
        clip = pad_silence(clip, params.trailing_pad)
    return clip
