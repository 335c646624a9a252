import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusforge.errors import ParseError
from corpusforge.transcripts import (
    DiarizationInterval,
    Transcript,
    Word,
    earliest_speaker,
    filter_target_speaker,
    parse_diarization,
    parse_transcript,
    parse_transcript_document,
    punctuation_density,
    transcript_to_document,
)


def doc(words, duration=None):
    if duration is None:
        duration = max((w["end"] for w in words), default=0.0)
    return json.dumps({"utterance_duration": duration, "words": words})


class TestParseTranscript:
    def test_empty(self):
        t = parse_transcript(doc([], duration=5.0))
        assert len(t) == 0
        assert t.utterance_duration == 5.0

    def test_well_formed(self):
        t = parse_transcript(
            doc(
                [
                    {"text": "a", "start": 0.0, "end": 0.4},
                    {"text": "b", "start": 0.5, "end": 0.9},
                    {"text": "c.", "start": 1.0, "end": 1.6},
                ]
            )
        )
        assert [w.text for w in t.words] == ["a", "b", "c."]
        assert t.utterance_duration >= 1.6

    def test_end_before_start_names_index(self):
        with pytest.raises(ParseError, match=r"words\[1\]"):
            parse_transcript(
                doc(
                    [
                        {"text": "a", "start": 0.0, "end": 0.4},
                        {"text": "b", "start": 0.9, "end": 0.5},
                    ]
                )
            )

    def test_overlapping_words_rejected_with_position(self):
        parsed = parse_transcript_document(
            doc(
                [
                    {"text": "a", "start": 0.0, "end": 1.0},
                    {"text": "b", "start": 0.2, "end": 1.2},  # 0.8 s overlap
                    {"text": "c", "start": 1.0, "end": 1.5},
                ],
                duration=2.0,
            )
        )
        assert [w.text for w in parsed.transcript.words] == ["a", "c"]
        assert [r.index for r in parsed.rejected] == [1]

    def test_jitter_tolerated(self):
        t = parse_transcript(
            doc(
                [
                    {"text": "a", "start": 0.0, "end": 1.0},
                    {"text": "b", "start": 0.995, "end": 1.5},  # 5 ms jitter
                ],
                duration=2.0,
            )
        )
        assert len(t) == 2

    def test_duration_before_last_word(self):
        with pytest.raises(ParseError, match="utterance_duration"):
            parse_transcript(doc([{"text": "a", "start": 0.0, "end": 2.0}], duration=1.0))

    def test_empty_text_fatal(self):
        with pytest.raises(ParseError, match=r"words\[0\]\.text"):
            parse_transcript(doc([{"text": "  ", "start": 0.0, "end": 1.0}]))

    def test_not_json(self):
        with pytest.raises(ParseError, match="JSON"):
            parse_transcript("utterance_duration: 3")

    def test_roundtrip_document(self):
        t = Transcript(
            words=(Word("hi", 0.0, 0.5, "A"), Word("there.", 0.6, 1.0)),
            utterance_duration=2.0,
        )
        assert parse_transcript(transcript_to_document(t)) == t


class TestDiarization:
    def test_parse(self):
        ivs = parse_diarization(
            json.dumps({"intervals": [{"speaker": "A", "start": 0.0, "end": 2.5}]})
        )
        assert ivs == [DiarizationInterval("A", 0.0, 2.5)]

    def test_bad_interval(self):
        with pytest.raises(ParseError, match=r"intervals\[0\]"):
            parse_diarization(
                json.dumps({"intervals": [{"speaker": "A", "start": 3.0, "end": 2.5}]})
            )

    def test_earliest_speaker(self):
        ivs = [
            DiarizationInterval("B", 5.0, 9.0),
            DiarizationInterval("A", 0.5, 4.0),
        ]
        assert earliest_speaker(ivs) == "A"
        assert earliest_speaker([]) is None


def random_intervals(rng, n_max=15):
    """Sorted, globally non-overlapping intervals with random labels."""
    intervals = []
    t = rng.uniform(0.0, 3.0)
    for _ in range(rng.randint(0, n_max)):
        end = t + rng.uniform(0.3, 15.0)
        intervals.append(DiarizationInterval(rng.choice("ABC"), t, end))
        t = end + rng.uniform(0.0, 5.0)
    return intervals


def brute_force_filter(t, intervals, target):
    kept = []
    for w in t.words:
        for iv in intervals:
            if iv.speaker == target and iv.start <= w.start and w.end <= iv.end:
                kept.append(w)
                break
    return tuple(kept)


class TestFilterTargetSpeaker:
    def test_identity_when_covered(self):
        t = parse_transcript(
            doc([{"text": f"w{i}", "start": i * 1.0, "end": i + 0.8} for i in range(5)])
        )
        ivs = [DiarizationInterval("A", 0.0, 10.0)]
        assert filter_target_speaker(t, ivs, "A") == t

    def test_boundary_spanning_word_dropped(self):
        words = [
            {"text": "in", "start": 0.0, "end": 1.0},
            {"text": "span", "start": 1.5, "end": 2.5},  # straddles 2.0 boundary
            {"text": "out", "start": 3.0, "end": 4.0},
        ]
        t = parse_transcript(doc(words, duration=5.0))
        ivs = [
            DiarizationInterval("A", 0.0, 2.0),
            DiarizationInterval("B", 2.0, 5.0),
        ]
        out = filter_target_speaker(t, ivs, "A")
        assert [w.text for w in out.words] == ["in"]

    def test_unknown_target_empties(self):
        t = parse_transcript(doc([{"text": "a", "start": 0.0, "end": 1.0}]))
        out = filter_target_speaker(t, [DiarizationInterval("A", 0.0, 2.0)], "Z")
        assert out.words == ()
        assert out.utterance_duration == t.utterance_duration

    def test_idempotent(self):
        rng = random.Random(5)
        from conftest import random_transcript

        t = random_transcript(rng, max_words=80)
        ivs = random_intervals(rng)
        once = filter_target_speaker(t, ivs, "A")
        twice = filter_target_speaker(once, ivs, "A")
        assert once == twice

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, seed):
        rng = random.Random(seed)
        from conftest import random_transcript

        t = random_transcript(rng, max_words=60)
        intervals = random_intervals(rng)
        out = filter_target_speaker(t, intervals, "A")
        assert out.words == brute_force_filter(t, intervals, "A")
        assert set(out.words) <= set(t.words)


def test_punctuation_density():
    t = parse_transcript(
        doc(
            [
                {"text": "a.", "start": 0.0, "end": 0.5},
                {"text": "b", "start": 0.6, "end": 1.0},
                {"text": "c!", "start": 1.1, "end": 1.5},
                {"text": "d", "start": 1.6, "end": 2.0},
            ]
        )
    )
    assert punctuation_density(t, frozenset(".!?,;")) == 0.5
    empty = Transcript(words=(), utterance_duration=0.0)
    assert punctuation_density(empty, frozenset(".")) == 0.0
