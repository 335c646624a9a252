"""Straight-line reference for transcription-based segmentation.

Written as a literal, unoptimized transcription of the segmentation
rules, kept deliberately independent of the production implementation:
it consumes plain (text, start, end) tuples, repeatedly slices the
remaining word list, and re-scans from scratch at each step. Used as
the equivalence oracle.
"""

from __future__ import annotations

import math

PUNCTUATION = frozenset({".", "!", "?", ",", ";"})


def _trailing(text: str) -> str:
    stripped = text.rstrip()
    return stripped[-1] if stripped else ""


def reference_segments(
    words: list[tuple[str, float, float]],
    utterance_duration: float,
    target: float = 8.0,
    tolerance: float = 2.0,
    punctuation: frozenset = PUNCTUATION,
):
    """Returns (final, before_cap); each segment is a dict with keys
    words (list of the consumed tuples), ends_at_punctuation, padded."""

    def emit(chunk, flag, padded):
        segments.append(
            {"words": list(chunk), "ends_at_punctuation": flag, "padded": padded}
        )

    segments: list[dict] = []
    remaining = list(words)
    while remaining:
        seg_start = remaining[0][1]

        # Rule 1: while the running duration stays within target + 1,
        # the first word that both reaches target - tolerance and carries
        # trailing punctuation closes the segment.
        punct_index = None
        k = 0
        while k < len(remaining):
            duration = remaining[k][2] - seg_start
            if duration > target + 1.0:
                break
            if duration >= target - tolerance and _trailing(remaining[k][0]) in punctuation:
                punct_index = k
                break
            k += 1
        if punct_index is not None:
            emit(remaining[: punct_index + 1], True, False)
            remaining = remaining[punct_index + 1 :]
            continue

        # Rule 2: find where the stream first reaches target - tolerance.
        reach_index = None
        for k in range(len(remaining)):
            if remaining[k][2] - seg_start >= target - tolerance:
                reach_index = k
                break

        if reach_index is None:
            # Final partial segment: keep only if it spans at least
            # target - 2 * tolerance.
            span = remaining[-1][2] - seg_start
            if span >= target - 2.0 * tolerance:
                flag = _trailing(remaining[-1][0]) in punctuation
                emit(remaining, flag, not flag)
            remaining = []
            continue

        if remaining[reach_index][2] - seg_start > target + tolerance:
            # The word that first reaches the window already overshoots the
            # extension bound (an oversize word or an unbridgeable gap).
            if reach_index == 0:
                remaining = remaining[1:]
            else:
                span = remaining[reach_index - 1][2] - seg_start
                if span >= target - 2.0 * tolerance:
                    flag = _trailing(remaining[reach_index - 1][0]) in punctuation
                    emit(remaining[:reach_index], flag, not flag)
                remaining = remaining[reach_index:]
            continue

        # Rule 3: no punctuation in the window: extend while the next word
        # still fits within target + tolerance.
        k = reach_index
        while k + 1 < len(remaining) and remaining[k + 1][2] - seg_start <= target + tolerance:
            k += 1
        emit(remaining[: k + 1], False, True)
        remaining = remaining[k + 1 :]

    before_cap = [dict(s, words=list(s["words"])) for s in segments]

    # Cap rule: while the count exceeds utterance_duration/target - 10,
    # delete the latest segment not ending at punctuation.
    cap = utterance_duration / target - 10.0
    if cap > 0:
        while len(segments) > cap:
            victim = None
            for i in range(len(segments) - 1, -1, -1):
                if not segments[i]["ends_at_punctuation"]:
                    victim = i
                    break
            if victim is None:
                break
            del segments[victim]

    return segments, before_cap


def reference_pause_boundaries(
    words: list[tuple[str, float, float]], pause_threshold: float
) -> set[int]:
    """Indices i such that a boundary falls between word i and i+1."""
    boundaries = set()
    for i in range(len(words) - 1):
        gap = words[i + 1][1] - words[i][2]
        if gap > pause_threshold:
            boundaries.add(i)
    return boundaries


def reference_fixed_windows(
    words: list[tuple[str, float, float]], interval: float
) -> list[list[tuple[str, float, float]]]:
    buckets: dict[int, list] = {}
    for word in words:
        buckets.setdefault(math.floor(word[1] / interval), []).append(word)
    return [buckets[k] for k in sorted(buckets)]
