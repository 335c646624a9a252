"""Shared fixtures: random transcript corpus, signal builders, toy corpus."""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import numpy as np
import pytest

from corpusforge.audiocore import AudioBuffer, write_wav
from corpusforge.pipeline import _utt_id
from corpusforge.transcripts import Transcript, Word

RATE = 16000
PUNCT_CHARS = ".!?,;"


def random_transcript(rng: random.Random, max_words: int = 200) -> Transcript:
    """Random word stream with realistic durations, gaps, and punctuation,
    plus rare oversize words and unbridgeable gaps to hit edge paths."""
    n = rng.randint(0, max_words)
    words = []
    t = rng.uniform(0.0, 2.0)
    for i in range(n):
        if rng.random() < 0.01:
            dur = rng.uniform(8.0, 12.0)
        else:
            dur = rng.uniform(0.05, 1.2)
        text = f"w{i}"
        if rng.random() < 0.12:
            text += rng.choice(PUNCT_CHARS)
        words.append(Word(text=text, start=t, end=t + dur))
        roll = rng.random()
        if roll < 0.75:
            gap = rng.uniform(0.0, 0.3)
        elif roll < 0.95:
            gap = rng.uniform(0.3, 2.0)
        else:
            gap = rng.uniform(5.0, 40.0)
        t += dur + gap
    last_end = words[-1].end if words else 0.0
    return Transcript(
        words=tuple(words), utterance_duration=last_end + rng.uniform(0.0, 4.0)
    )


def tone(freq: float, duration: float, amplitude: float = 0.8) -> np.ndarray:
    t = np.arange(int(round(duration * RATE))) / RATE
    return amplitude * np.sin(2 * np.pi * freq * t)


def tone_noise_mixture(
    true_snr_db: float, seed: int, noise_power: float = 1e-5, duration: float = 4.0
) -> AudioBuffer:
    """White noise floor with tone bursts added over [0.5,1.5] and [2.5,3.5];
    burst power sits true_snr_db above the floor."""
    rng = np.random.default_rng(seed)
    n = int(duration * RATE)
    samples = rng.normal(0.0, np.sqrt(noise_power), n)
    tone_power = noise_power * 10 ** (true_snr_db / 10)
    t = np.arange(n) / RATE
    burst = np.sqrt(2 * tone_power) * np.sin(2 * np.pi * 440 * t)
    for a, b in ((0.5, 1.5), (2.5, 3.5)):
        lo, hi = int(a * RATE), int(b * RATE)
        samples[lo:hi] += burst[lo:hi]
    return AudioBuffer(samples, RATE)


WORDS_PER_SENTENCE = 16
WORD_STEP = 0.5
WORD_DUR = 0.35
PREAMBLE_S = 2.0


def toy_utterance(speaker_idx: int, utt_idx: int, sentences: int):
    """Synthetic utterance: tone 'words' on a 0.5 s cadence over a quiet
    noise floor, one trailing period per 16 words, preceded by a 2 s
    preamble tone standing in for another speaker."""
    n_words = WORDS_PER_SENTENCE * sentences
    content_s = n_words * WORD_STEP
    rng = np.random.default_rng(100000 + speaker_idx * 1000 + utt_idx)
    content = rng.normal(0.0, 1e-3, int(content_s * RATE))
    words = []
    for w in range(n_words):
        start = w * WORD_STEP
        freq = 300.0 + 20.0 * ((speaker_idx * 7 + utt_idx * 3 + w) % 25)
        lo = int(start * RATE)
        hi = lo + int(WORD_DUR * RATE)
        content[lo:hi] += tone(freq, WORD_DUR, amplitude=0.35)
        text = f"tok{w}"
        if (w + 1) % WORDS_PER_SENTENCE == 0:
            text += "."
        words.append({"text": text, "start": start, "end": start + WORD_DUR, "speaker": "A"})
    preamble = tone(220.0, PREAMBLE_S, amplitude=0.3)
    audio = AudioBuffer(np.concatenate([preamble, content]), RATE)
    transcript_doc = {"utterance_duration": content_s, "words": words}
    diarization_doc = {"intervals": [{"speaker": "A", "start": 0.0, "end": content_s}]}
    return audio, transcript_doc, diarization_doc


def build_toy_corpus(
    root: Path,
    n_speakers: int = 2,
    n_utterances: int = 2,
    sentences: int = 2,
    n_engines: int = 2,
    parallelism: int = 2,
    seed: int = 0,
) -> Path:
    """Write sources.csv, media WAVs, provider documents, and config.yaml
    under root; returns the config path."""
    media = root / "media"
    providers = root / "providers"
    media.mkdir(parents=True, exist_ok=True)
    providers.mkdir(parents=True, exist_ok=True)

    rows = ["speaker_id,media_ref,start_time,content_type,publication_date"]
    for s in range(n_speakers):
        speaker = f"spk{s:02d}"
        for u in range(n_utterances):
            audio, t_doc, d_doc = toy_utterance(s, u, sentences)
            ref = f"media/{speaker}_u{u}.wav"
            write_wav(root / ref, audio)
            rows.append(f"{speaker},{ref},{PREAMBLE_S},speech,2020-06-15")
            utt = _utt_id(speaker, ref, PREAMBLE_S)
            (providers / f"{utt}.transcript.json").write_text(json.dumps(t_doc))
            (providers / f"{utt}.diarization.json").write_text(json.dumps(d_doc))
    (root / "sources.csv").write_text("\n".join(rows) + "\n")

    stub = (
        f"{sys.executable} -m corpusforge.stubengine "
        "--text {text} --reference {reference_audio} --output {output_path}"
    )
    engines = "\n".join(
        f'  - engine_id: stub{i:02d}\n    regime: zero_shot\n    command: "{stub}"'
        for i in range(n_engines)
    )
    config = f"""\
workdir: work
source_manifest: sources.csv
providers_dir: providers
strategy: transcript
parallelism: {parallelism}
seed: {seed}
engines:
{engines}
serve:
  datasets:
    - dataset_id: toy
      manifest: manifests/dataset_full.csv
      audio_root: .
"""
    config_path = root / "config.yaml"
    config_path.write_text(config)
    return config_path


@pytest.fixture
def toy_corpus(tmp_path):
    return build_toy_corpus(tmp_path)
