"""Dataset statistics, naturalness-score ingestion, and listening tests.

The listening test presents each participant two clips per dataset (one
real, one fake, order shuffled); fake miss-rate is the share of answered
fake trials judged real. Rates are reported to one decimal, naturalness
means to two, and unanswered trials never enter any denominator.
"""

from __future__ import annotations

import csv
import io
import logging
import random
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, ConflictError, NotFoundError
from .manifest import DatasetEntry, RejectedRow

log = logging.getLogger(__name__)

SCORE_RANGE = (1.0, 5.0)


@dataclass(frozen=True)
class SpeakerStats:
    bonafide_count: int
    synthetic_count: int
    duration_hours: float


@dataclass(frozen=True)
class DatasetStats:
    speaker_count: int
    bonafide_count: int
    synthetic_count: int
    total_duration_hours: float
    per_speaker: dict[str, SpeakerStats]

    def to_dict(self) -> dict:
        return {
            "speaker_count": self.speaker_count,
            "bonafide_count": self.bonafide_count,
            "synthetic_count": self.synthetic_count,
            "total_duration_hours": self.total_duration_hours,
            "per_speaker": {
                s: {
                    "bonafide_count": st.bonafide_count,
                    "synthetic_count": st.synthetic_count,
                    "duration_hours": st.duration_hours,
                }
                for s, st in sorted(self.per_speaker.items())
            },
        }


def compute_stats(entries: Sequence[DatasetEntry]) -> DatasetStats:
    speakers: dict[str, list[DatasetEntry]] = {}
    for entry in entries:
        speakers.setdefault(entry.speaker_id, []).append(entry)
    per_speaker = {
        speaker: SpeakerStats(
            bonafide_count=sum(1 for e in group if e.label == "bonafide"),
            synthetic_count=sum(1 for e in group if e.label == "synthetic"),
            duration_hours=sum(e.duration for e in group) / 3600.0,
        )
        for speaker, group in speakers.items()
    }
    return DatasetStats(
        speaker_count=len(speakers),
        bonafide_count=sum(s.bonafide_count for s in per_speaker.values()),
        synthetic_count=sum(s.synthetic_count for s in per_speaker.values()),
        total_duration_hours=sum(e.duration for e in entries) / 3600.0,
        per_speaker=per_speaker,
    )


@dataclass
class NaturalnessReport:
    per_dataset: dict[str, float]
    rejected: list[RejectedRow]


def ingest_naturalness(
    raw: str, datasets: Mapping[str, Sequence[DatasetEntry]]
) -> NaturalnessReport:
    """Average (clip_id, score) rows per dataset; 2-decimal reporting.

    Rows with unknown clip ids or scores outside [1, 5] are rejected
    with a warning, not fatal.
    """
    clip_to_dataset: dict[str, str] = {}
    for dataset_id, entries in datasets.items():
        for entry in entries:
            clip_to_dataset[entry.clip_id] = dataset_id

    reader = csv.DictReader(io.StringIO(raw))
    if reader.fieldnames is None or not {"clip_id", "score"} <= set(reader.fieldnames):
        raise ConfigError("naturalness file needs a clip_id,score header")
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    rejected: list[RejectedRow] = []
    for row_number, row in enumerate(reader, start=2):
        clip_id = (row.get("clip_id") or "").strip()
        dataset_id = clip_to_dataset.get(clip_id)
        if dataset_id is None:
            rejected.append(RejectedRow(row_number, f"unknown clip_id {clip_id!r}"))
            log.warning("naturalness row %d: unknown clip_id %r", row_number, clip_id)
            continue
        try:
            score = float(row["score"])
        except (TypeError, ValueError):
            rejected.append(RejectedRow(row_number, f"unparseable score {row.get('score')!r}"))
            continue
        if not SCORE_RANGE[0] <= score <= SCORE_RANGE[1]:
            rejected.append(RejectedRow(row_number, f"score {score} outside [1, 5]"))
            continue
        sums[dataset_id] = sums.get(dataset_id, 0.0) + score
        counts[dataset_id] = counts.get(dataset_id, 0) + 1
    means = {d: round(sums[d] / counts[d], 2) for d in sums}
    return NaturalnessReport(per_dataset=means, rejected=rejected)


@dataclass
class Trial:
    trial_id: str
    dataset_id: str
    clip_id: str
    truth: str  # real | fake
    response: str | None = None
    responded_at: float | None = None


@dataclass
class TrialSession:
    session_id: str
    participant_id: str
    trials: list[Trial]

    @property
    def complete(self) -> bool:
        return all(t.response is not None for t in self.trials)


def new_session(
    participant_id: str,
    datasets: Sequence[tuple[str, Sequence[DatasetEntry]]],
    seed: int | None = None,
) -> TrialSession:
    """Two trials per dataset (one real, one fake), uniformly drawn, order
    shuffled. A fixed seed reproduces the session exactly."""
    rng = random.Random(seed)
    session_id = f"s{rng.getrandbits(48):012x}"
    picks: list[tuple[str, str, str]] = []
    for dataset_id, entries in datasets:
        real = sorted(e.clip_id for e in entries if e.label == "bonafide")
        fake = sorted(e.clip_id for e in entries if e.label == "synthetic")
        if not real or not fake:
            raise ConfigError(
                f"dataset {dataset_id!r} needs at least one bonafide and one synthetic clip"
            )
        picks.append((dataset_id, rng.choice(real), "real"))
        picks.append((dataset_id, rng.choice(fake), "fake"))
    rng.shuffle(picks)
    trials = [
        Trial(
            trial_id=f"{session_id}-t{i:02d}",
            dataset_id=dataset_id,
            clip_id=clip_id,
            truth=truth,
        )
        for i, (dataset_id, clip_id, truth) in enumerate(picks)
    ]
    return TrialSession(session_id=session_id, participant_id=participant_id, trials=trials)


def record_response(
    session: TrialSession, trial_id: str, response: str, now: float | None = None
) -> Trial:
    """Store a judgment; double answers conflict instead of overwriting."""
    if response not in ("real", "fake"):
        raise ValueError(f"response must be 'real' or 'fake', got {response!r}")
    trial = next((t for t in session.trials if t.trial_id == trial_id), None)
    if trial is None:
        raise NotFoundError(f"no trial {trial_id!r} in session {session.session_id!r}")
    if trial.response is not None:
        raise ConflictError(f"trial {trial_id!r} already answered")
    trial.response = response
    trial.responded_at = time.time() if now is None else now
    return trial


@dataclass(frozen=True)
class DatasetMissRates:
    fake_miss_rate: float | None
    real_miss_rate: float | None
    fake_answered: int
    real_answered: int


@dataclass(frozen=True)
class MissRateReport:
    per_dataset: dict[str, DatasetMissRates]
    n_participants: int

    def to_dict(self) -> dict:
        return {
            "n_participants": self.n_participants,
            "per_dataset": {
                d: {
                    "fake_miss_rate": r.fake_miss_rate,
                    "real_miss_rate": r.real_miss_rate,
                    "fake_answered": r.fake_answered,
                    "real_answered": r.real_answered,
                }
                for d, r in sorted(self.per_dataset.items())
            },
        }


def compute_miss_rates(sessions: Iterable[TrialSession]) -> MissRateReport:
    """Per-dataset miss rates over answered trials only, one decimal."""
    answered: dict[str, dict[str, list[int]]] = {}
    participants = set()
    for session in sessions:
        participants.add(session.participant_id)
        for trial in session.trials:
            if trial.response is None:
                continue
            cell = answered.setdefault(trial.dataset_id, {"real": [0, 0], "fake": [0, 0]})
            missed = trial.response != trial.truth
            cell[trial.truth][0] += 1
            cell[trial.truth][1] += int(missed)

    per_dataset = {}
    for dataset_id, cell in answered.items():
        fake_n, fake_miss = cell["fake"]
        real_n, real_miss = cell["real"]
        per_dataset[dataset_id] = DatasetMissRates(
            fake_miss_rate=round(100.0 * fake_miss / fake_n, 1) if fake_n else None,
            real_miss_rate=round(100.0 * real_miss / real_n, 1) if real_n else None,
            fake_answered=fake_n,
            real_answered=real_n,
        )
    return MissRateReport(per_dataset=per_dataset, n_participants=len(participants))
