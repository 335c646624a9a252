"""Synthesis-job construction, execution, validation, and dataset assembly.

TTS engines are external processes described by command templates; the
toolkit builds one job per (bonafide segment, engine), enforces the
per-regime data-sufficiency rules, sanity-checks returned audio, and
pairs accepted synthetic clips with their bonafide sources.
"""

from __future__ import annotations

import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .audiocore import AudioBuffer, downmix, read_wav
from .errors import ManifestError
from .manifest import DatasetEntry
from .quality import silence_ratio

REGIMES = ("speaker_specific", "few_shot", "zero_shot")
SPEAKER_SPECIFIC_MIN_S = 24 * 3600.0
FEW_SHOT_MIN_S = 3600.0
FEW_SHOT_CAP_S = 3 * 3600.0
WORDS_PER_MINUTE = 150.0
DURATION_RATIO_BOUNDS = (0.3, 3.0)
MAX_SILENCE_RATIO = 0.9
ZERO_SHOT_REF_DURATION = (6.0, 10.0)


@dataclass(frozen=True)
class EngineSpec:
    engine_id: str
    regime: str
    command_template: str

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"{self.engine_id}: unknown regime {self.regime!r}")
        required = ["{text}", "{output_path}"]
        if self.regime == "zero_shot":
            required.append("{reference_audio}")
        for placeholder in required:
            if placeholder not in self.command_template:
                raise ValueError(
                    f"{self.engine_id}: command template missing {placeholder}"
                )


@dataclass(frozen=True)
class SynthesisJob:
    job_id: str
    engine_id: str
    speaker_id: str
    text: str
    reference_clip_ids: tuple[str, ...]
    output_path: str
    source_clip_id: str


@dataclass(frozen=True)
class SynthesisResult:
    job_id: str
    status: str  # ok | engine_failed | rejected
    duration: float
    reject_reasons: tuple[str, ...] = ()


@dataclass(frozen=True)
class EngineSkip:
    engine_id: str
    reason: str


@dataclass
class JobBuildResult:
    jobs: list[SynthesisJob]
    skipped: list[EngineSkip] = field(default_factory=list)


def _snr_of(entry: DatasetEntry, snr_by_clip: Mapping[str, float] | None) -> float:
    if snr_by_clip is None:
        return 0.0
    return snr_by_clip.get(entry.clip_id, float("-inf"))


def _few_shot_references(
    entries: list[DatasetEntry], snr_by_clip: Mapping[str, float] | None
) -> tuple[str, ...]:
    # highest-SNR clips first until one hour is covered, never past three
    ranked = sorted(entries, key=lambda e: (-_snr_of(e, snr_by_clip), e.clip_id))
    refs: list[str] = []
    total = 0.0
    for entry in ranked:
        if total >= FEW_SHOT_MIN_S:
            break
        if total + entry.duration > FEW_SHOT_CAP_S:
            break
        refs.append(entry.clip_id)
        total += entry.duration
    return tuple(refs)


def _zero_shot_reference(
    entries: list[DatasetEntry], snr_by_clip: Mapping[str, float] | None
) -> tuple[str, ...]:
    # one clean, sentence-complete reference; relax the filters only when
    # the corpus has no clip matching them
    lo, hi = ZERO_SHOT_REF_DURATION
    sentence_final = [
        e
        for e in entries
        if e.transcript_text.rstrip().endswith((".", "!", "?", ",", ";"))
        and lo <= e.duration <= hi
    ]
    pool = sentence_final or [e for e in entries if lo <= e.duration <= hi] or entries
    best = min(pool, key=lambda e: (-_snr_of(e, snr_by_clip), e.clip_id))
    return (best.clip_id,)


def build_jobs(
    bonafide: list[DatasetEntry],
    engines: Sequence[EngineSpec],
    speaker_id: str,
    snr_by_clip: Mapping[str, float] | None = None,
    output_dir: str = "synth",
) -> JobBuildResult:
    """One job per (segment, engine); engines without enough reference
    data for their regime are skipped with a recorded reason."""
    if not engines:
        raise ValueError("build_jobs requires at least one engine")
    ids = [e.engine_id for e in engines]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate engine_id among {ids}")
    for entry in bonafide:
        if entry.label != "bonafide" or entry.speaker_id != speaker_id:
            raise ValueError(
                f"{entry.clip_id}: build_jobs expects bonafide entries of {speaker_id!r}"
            )

    entries = sorted(bonafide, key=lambda e: e.clip_id)
    total_s = sum(e.duration for e in entries)
    result = JobBuildResult(jobs=[])
    for engine in engines:
        if engine.regime == "speaker_specific":
            if total_s < SPEAKER_SPECIFIC_MIN_S:
                result.skipped.append(
                    EngineSkip(engine.engine_id, "insufficient data: need >= 24h")
                )
                continue
            references = tuple(e.clip_id for e in entries)
        elif engine.regime == "few_shot":
            if total_s < FEW_SHOT_MIN_S:
                result.skipped.append(
                    EngineSkip(engine.engine_id, "insufficient data: need >= 1h")
                )
                continue
            references = _few_shot_references(entries, snr_by_clip)
        else:
            if not entries:
                result.skipped.append(
                    EngineSkip(engine.engine_id, "insufficient data: need >= 1 reference clip")
                )
                continue
            references = _zero_shot_reference(entries, snr_by_clip)

        for entry in entries:
            job_id = f"{entry.clip_id}__{engine.engine_id}"
            result.jobs.append(
                SynthesisJob(
                    job_id=job_id,
                    engine_id=engine.engine_id,
                    speaker_id=speaker_id,
                    text=entry.transcript_text,
                    reference_clip_ids=references,
                    output_path=f"{output_dir}/{engine.engine_id}/{job_id}.wav",
                    source_clip_id=entry.clip_id,
                )
            )
    return result


def validate_result(job: SynthesisJob, audio: AudioBuffer) -> SynthesisResult:
    """Sanity-check engine output: sample rate, plausible duration for the
    text at a 150 wpm speaking rate, and non-silence."""
    reasons: list[str] = []
    if audio.sample_rate != 16000:
        reasons.append("sample_rate_mismatch")
    mono = downmix(audio)
    duration = mono.duration
    words = max(len(job.text.split()), 1)
    estimate = words / WORDS_PER_MINUTE * 60.0
    if not DURATION_RATIO_BOUNDS[0] * estimate <= duration <= DURATION_RATIO_BOUNDS[1] * estimate:
        reasons.append("duration_implausible")
    try:
        if silence_ratio(mono) >= MAX_SILENCE_RATIO:
            reasons.append("silent_output")
    except ValueError:
        reasons.append("silent_output")
    status = "ok" if not reasons else "rejected"
    return SynthesisResult(
        job_id=job.job_id, status=status, duration=duration, reject_reasons=tuple(reasons)
    )


def assemble_dataset(
    bonafide: list[DatasetEntry],
    results: list[tuple[SynthesisJob, SynthesisResult]],
) -> list[DatasetEntry]:
    """Bonafide entries plus one synthetic entry per successful job."""
    by_clip = {e.clip_id: e for e in bonafide}
    entries = list(bonafide)
    for job, result in results:
        if result.job_id != job.job_id:
            raise ManifestError(
                f"result {result.job_id!r} does not match job {job.job_id!r}"
            )
        if job.source_clip_id not in by_clip:
            raise ManifestError(
                f"job {job.job_id!r} references unknown source clip {job.source_clip_id!r}"
            )
        if result.status != "ok":
            continue
        source = by_clip[job.source_clip_id]
        entries.append(
            DatasetEntry(
                clip_id=job.job_id,
                speaker_id=job.speaker_id,
                label="synthetic",
                method=job.engine_id,
                transcript_text=source.transcript_text,
                duration=result.duration,
                file_path=job.output_path,
                source_clip_id=source.clip_id,
            )
        )
    return entries


def render_command(
    job: SynthesisJob,
    template: str,
    output_root: Path,
    reference_paths: Mapping[str, str],
) -> list[str]:
    """Split the template and substitute placeholders token-wise, so text
    containing spaces or quotes never goes through a shell."""
    refs = [str(reference_paths[c]) for c in job.reference_clip_ids]
    argv: list[str] = []
    for token in shlex.split(template):
        if token == "{reference_audio}":
            argv.extend(refs)
            continue
        token = token.replace("{text}", job.text)
        token = token.replace("{output_path}", str(output_root / job.output_path))
        if refs:
            token = token.replace("{reference_audio}", refs[0])
        argv.append(token)
    return argv


def run_jobs(
    jobs: Sequence[SynthesisJob],
    engines: Sequence[EngineSpec],
    output_root: Path,
    reference_paths: Mapping[str, str],
    parallelism: int = 1,
    timeout_s: float = 300.0,
) -> list[tuple[SynthesisJob, SynthesisResult]]:
    """Execute jobs concurrently; results come back in job order."""
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    by_engine = {e.engine_id: e for e in engines}

    def run_one(job: SynthesisJob) -> SynthesisResult:
        engine = by_engine[job.engine_id]
        out_path = output_root / job.output_path
        out_path.parent.mkdir(parents=True, exist_ok=True)
        argv = render_command(job, engine.command_template, output_root, reference_paths)
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout_s)
        except (OSError, subprocess.TimeoutExpired):
            return SynthesisResult(job.job_id, "engine_failed", 0.0)
        if proc.returncode != 0 or not out_path.exists():
            return SynthesisResult(job.job_id, "engine_failed", 0.0)
        try:
            audio = read_wav(out_path)
        except Exception:
            return SynthesisResult(job.job_id, "engine_failed", 0.0)
        return validate_result(job, audio)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        results = list(pool.map(run_one, jobs))
    return list(zip(jobs, results))
