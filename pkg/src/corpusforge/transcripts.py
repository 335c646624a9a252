"""Word-level timestamped transcripts and diarization intervals.

Interchange format is JSON: transcripts carry `utterance_duration` plus a
`words` array of {text, start, end, speaker?}; diarization documents carry
an `intervals` array of {speaker, start, end}. Provider adapters (ASR,
diarization services) must emit this schema; nothing here calls a model.
"""

from __future__ import annotations

import bisect
import json
import logging
from dataclasses import dataclass, field

from .errors import ParseError

log = logging.getLogger(__name__)

# Real ASR timestamps jitter; rejecting every overlap would discard usable data.
OVERLAP_TOLERANCE = 0.010


@dataclass(frozen=True)
class Word:
    text: str
    start: float
    end: float
    speaker: str | None = None

    @property
    def trailing_char(self) -> str:
        stripped = self.text.rstrip()
        return stripped[-1] if stripped else ""


@dataclass(frozen=True)
class Transcript:
    words: tuple[Word, ...]
    utterance_duration: float

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class DiarizationInterval:
    speaker: str
    start: float
    end: float


@dataclass(frozen=True)
class RejectedWord:
    index: int
    reason: str


@dataclass
class ParsedTranscript:
    transcript: Transcript
    rejected: list[RejectedWord] = field(default_factory=list)


def _require_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def parse_transcript_document(document: str) -> ParsedTranscript:
    """Parse the JSON interchange document, reporting dropped words.

    Schema violations (bad types, end < start, empty text) are fatal with
    the offending field path. Words whose timestamps run backwards beyond
    the 10 ms jitter tolerance are dropped and reported by position.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"transcript is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top level: expected an object")
    if "utterance_duration" not in doc:
        raise ParseError("utterance_duration: missing")
    duration = _require_number(doc["utterance_duration"], "utterance_duration")
    if duration < 0:
        raise ParseError(f"utterance_duration: must be >= 0, got {duration}")
    raw_words = doc.get("words")
    if not isinstance(raw_words, list):
        raise ParseError("words: expected an array")

    words: list[Word] = []
    rejected: list[RejectedWord] = []
    for i, item in enumerate(raw_words):
        path = f"words[{i}]"
        if not isinstance(item, dict):
            raise ParseError(f"{path}: expected an object")
        text = item.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ParseError(f"{path}.text: expected non-empty text")
        start = _require_number(item.get("start"), f"{path}.start")
        end = _require_number(item.get("end"), f"{path}.end")
        if start < 0:
            raise ParseError(f"{path}.start: must be >= 0, got {start}")
        if end <= start:
            raise ParseError(f"{path}.end: end {end} not after start {start}")
        speaker = item.get("speaker")
        if speaker is not None and not isinstance(speaker, str):
            raise ParseError(f"{path}.speaker: expected a string label")
        word = Word(text=text, start=start, end=end, speaker=speaker)
        if words:
            prev = words[-1]
            if word.start < prev.start or word.start < prev.end - OVERLAP_TOLERANCE:
                rejected.append(
                    RejectedWord(i, f"timestamps overlap previous word by more than {OVERLAP_TOLERANCE}s")
                )
                continue
        words.append(word)

    if words and duration < words[-1].end - 1e-9:
        raise ParseError(
            f"utterance_duration: {duration} is before last word end {words[-1].end}"
        )
    transcript = Transcript(words=tuple(words), utterance_duration=duration)
    return ParsedTranscript(transcript=transcript, rejected=rejected)


def parse_transcript(document: str) -> Transcript:
    return parse_transcript_document(document).transcript


def transcript_to_document(t: Transcript) -> str:
    doc = {
        "utterance_duration": t.utterance_duration,
        "words": [
            {
                "text": w.text,
                "start": w.start,
                "end": w.end,
                **({"speaker": w.speaker} if w.speaker is not None else {}),
            }
            for w in t.words
        ],
    }
    return json.dumps(doc, sort_keys=True)


def parse_diarization(document: str) -> list[DiarizationInterval]:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"diarization is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("intervals"), list):
        raise ParseError("intervals: expected an array")
    intervals = []
    for i, item in enumerate(doc["intervals"]):
        path = f"intervals[{i}]"
        if not isinstance(item, dict):
            raise ParseError(f"{path}: expected an object")
        speaker = item.get("speaker")
        if not isinstance(speaker, str) or not speaker:
            raise ParseError(f"{path}.speaker: expected non-empty label")
        start = _require_number(item.get("start"), f"{path}.start")
        end = _require_number(item.get("end"), f"{path}.end")
        if end <= start:
            raise ParseError(f"{path}.end: end {end} not after start {start}")
        intervals.append(DiarizationInterval(speaker=speaker, start=start, end=end))
    return intervals


def earliest_speaker(intervals: list[DiarizationInterval]) -> str | None:
    """Label of the interval that starts first (ties broken by label).

    Source clips are trimmed so the target speaker talks first, which
    makes the earliest diarization label the target by construction.
    """
    if not intervals:
        return None
    return min(intervals, key=lambda iv: (iv.start, iv.speaker)).speaker


def filter_target_speaker(
    t: Transcript, intervals: list[DiarizationInterval], target: str
) -> Transcript:
    """Keep only words fully contained in an interval labeled `target`.

    Containment, not overlap: a word straddling an interval edge is
    dropped so no cross-talk leaks into the output. The utterance
    duration is unchanged.
    """
    spans = sorted(
        (iv.start, iv.end) for iv in intervals if iv.speaker == target
    )
    if not spans:
        log.warning("no diarization intervals labeled %r; transcript emptied", target)
        return Transcript(words=(), utterance_duration=t.utterance_duration)
    starts = [s for s, _ in spans]
    kept = []
    for word in t.words:
        pos = bisect.bisect_right(starts, word.start) - 1
        if pos >= 0 and word.end <= spans[pos][1]:
            kept.append(word)
    return Transcript(words=tuple(kept), utterance_duration=t.utterance_duration)


def punctuation_density(t: Transcript, punctuation: frozenset[str]) -> float:
    """Fraction of words carrying a trailing punctuation character.

    Surfaced as a statistic only; low-punctuation providers produce
    transcripts the segmenter cannot split well, but no threshold is
    enforced here.
    """
    if not t.words:
        return 0.0
    hits = sum(1 for w in t.words if w.trailing_char in punctuation)
    return hits / len(t.words)
