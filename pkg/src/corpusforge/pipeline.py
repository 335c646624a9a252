"""Resumable pipeline stages over a work directory.

Each stage digests its direct inputs plus the config slice it depends
on; a matching stamp with all outputs still on disk makes the rerun a
no-op. Reports are deterministic JSON (timings go to the log, never
into report files, so identical runs stay byte-identical).
"""

from __future__ import annotations

import hashlib
import json
import logging
import shlex
import subprocess
import time
from pathlib import Path

from . import audiocore
from .config import PipelineConfig
from .errors import CorpusError, ParseError
from .manifest import (
    DatasetEntry,
    parse_source_manifest,
    read_dataset_manifest,
    write_dataset_manifest,
)
from .quality import quality_gate
from .segmenter import (
    extract_segment_audio,
    segment_by_pause,
    segment_by_transcript,
    segment_fixed,
)
from .synthesis import SynthesisJob, assemble_dataset, build_jobs, run_jobs
from .transcripts import (
    earliest_speaker,
    filter_target_speaker,
    parse_diarization,
    parse_transcript_document,
    punctuation_density,
    transcript_to_document,
)

log = logging.getLogger(__name__)

STAGES = ("acquire", "diarize-filter", "segment", "gate", "jobs", "assemble", "stats")

_STRATEGY_FNS = {
    "transcript": segment_by_transcript,
    "pause": segment_by_pause,
    "fixed": segment_fixed,
}


def _file_sha(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage_digest(stage: str, cfg_view: dict, inputs: list[tuple[str, Path]]) -> str:
    h = hashlib.sha256()
    h.update(stage.encode())
    h.update(json.dumps(cfg_view, sort_keys=True, default=str).encode())
    for label, path in sorted(inputs):
        h.update(label.encode())
        h.update(_file_sha(path).encode())
    return h.hexdigest()


def _stamp_path(cfg: PipelineConfig, stage: str) -> Path:
    return cfg.workdir / "stamps" / f"{stage}.json"


def _check_stamp(cfg: PipelineConfig, stage: str, digest: str) -> dict | None:
    stamp = _stamp_path(cfg, stage)
    if not stamp.exists():
        return None
    data = json.loads(stamp.read_text(encoding="utf-8"))
    if data.get("digest") != digest:
        return None
    if not all((cfg.workdir / rel).exists() for rel in data.get("outputs", [])):
        return None
    log.info("stage %s: inputs unchanged, skipping", stage)
    return {"stage": stage, "skipped": True, "new_outputs": 0}


def _write_stamp(cfg: PipelineConfig, stage: str, digest: str, outputs: list[str]) -> None:
    stamp = _stamp_path(cfg, stage)
    stamp.parent.mkdir(parents=True, exist_ok=True)
    stamp.write_text(
        json.dumps({"digest": digest, "outputs": sorted(outputs)}, sort_keys=True, indent=2)
        + "\n",
        encoding="utf-8",
    )


def _write_report(cfg: PipelineConfig, stage: str, report: dict) -> None:
    path = cfg.workdir / "reports" / f"{stage}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise CorpusError(f"missing upstream artifact for {what}: {path}")
    return path


def _utt_id(speaker_id: str, media_ref: str, start_time: float) -> str:
    digest = hashlib.sha1(f"{media_ref}|{start_time}".encode("utf-8")).hexdigest()[:10]
    return f"{speaker_id}_{digest}"


def _seg_cfg_view(cfg: PipelineConfig) -> dict:
    p = cfg.segmentation
    return {
        "strategy": cfg.strategy,
        "target_duration": p.target_duration,
        "tolerance": p.tolerance,
        "punctuation": "".join(sorted(p.punctuation)),
        "trailing_pad": p.trailing_pad,
        "pause_threshold": p.pause_threshold,
        "fixed_interval": p.fixed_interval,
    }


def _engines_view(cfg: PipelineConfig) -> list:
    return [[e.engine_id, e.regime, e.command_template] for e in cfg.engines]


def _fetch_media(cfg: PipelineConfig, media_ref: str, utt_id: str) -> bytes:
    local = Path(media_ref)
    if not local.is_absolute():
        local = cfg.source_manifest.parent / local
    if local.exists():
        return local.read_bytes()
    # remote reference: hand it to the configured downloader command
    tmp = cfg.workdir / "tmp" / f"{utt_id}.download.wav"
    tmp.parent.mkdir(parents=True, exist_ok=True)
    argv = [
        token.replace("{url}", media_ref).replace("{output}", str(tmp))
        for token in shlex.split(cfg.downloader)
    ]
    proc = subprocess.run(argv, capture_output=True)
    if proc.returncode != 0 or not tmp.exists():
        raise CorpusError(
            f"downloader failed for {media_ref!r}: {proc.stderr.decode(errors='replace')[:200]}"
        )
    data = tmp.read_bytes()
    tmp.unlink()
    return data


def stage_acquire(cfg: PipelineConfig) -> dict:
    src = _require(cfg.source_manifest, "acquire")
    cfg_view = {
        "downloader": cfg.downloader,
        "roster": sorted(cfg.roster) if cfg.roster else None,
        "date_range": [str(d) for d in cfg.date_range],
    }
    digest = _stage_digest("acquire", cfg_view, [("source_manifest", src)])
    skipped = _check_stamp(cfg, "acquire", digest)
    if skipped:
        return skipped

    parsed = parse_source_manifest(
        src.read_text(encoding="utf-8"), roster=cfg.roster, date_range=cfg.date_range
    )
    raw_dir = cfg.workdir / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    index = []
    failures = []
    outputs = []
    for record in parsed.records:
        utt_id = _utt_id(record.speaker_id, record.media_ref, record.start_time)
        out_rel = f"raw/{utt_id}.wav"
        out_path = cfg.workdir / out_rel
        try:
            buf = audiocore.decode_wav(_fetch_media(cfg, record.media_ref, utt_id))
            buf = audiocore.downmix(buf)
            buf = audiocore.trim_from(buf, record.start_time)
            buf = audiocore.resample(buf, audiocore.TARGET_RATE)
            audiocore.write_wav(out_path, buf)
        except (CorpusError, ValueError, OSError) as exc:
            failures.append({"utt_id": utt_id, "error": str(exc)})
            continue
        index.append(
            {
                "utt_id": utt_id,
                "speaker_id": record.speaker_id,
                "media_ref": record.media_ref,
                "start_time": record.start_time,
                "content_type": record.content_type,
                "publication_date": record.publication_date.isoformat(),
                "min_resolution_ok": record.min_resolution_ok,
            }
        )
        outputs.append(out_rel)
    index.sort(key=lambda r: r["utt_id"])
    index_path = cfg.workdir / "raw" / "index.json"
    index_path.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    outputs.append("raw/index.json")

    report = {
        "stage": "acquire",
        "rows": len(parsed.records) + len(parsed.rejects),
        "accepted": len(parsed.records),
        "rejects": [{"row": r.row_number, "reason": r.reason} for r in parsed.rejects],
        "failures": sorted(failures, key=lambda f: f["utt_id"]),
        "new_outputs": len(outputs),
    }
    _write_report(cfg, "acquire", report)
    _write_stamp(cfg, "acquire", digest, outputs)
    return report


def _load_index(cfg: PipelineConfig) -> list[dict]:
    index_path = _require(cfg.workdir / "raw" / "index.json", "this stage")
    return json.loads(index_path.read_text(encoding="utf-8"))


def _provider_file(cfg: PipelineConfig, utt_id: str, kind: str, template: str | None) -> Path:
    path = cfg.providers_dir / f"{utt_id}.{kind}.json"
    if path.exists():
        return path
    if template is None:
        raise CorpusError(f"missing upstream artifact for diarize-filter: {path}")
    audio = cfg.workdir / "raw" / f"{utt_id}.wav"
    path.parent.mkdir(parents=True, exist_ok=True)
    argv = [
        token.replace("{audio}", str(audio)).replace("{output}", str(path))
        for token in shlex.split(template)
    ]
    proc = subprocess.run(argv, capture_output=True)
    if proc.returncode != 0 or not path.exists():
        raise CorpusError(f"{kind} provider failed for {utt_id}")
    return path


def stage_diarize_filter(cfg: PipelineConfig) -> dict:
    index = _load_index(cfg)
    inputs: list[tuple[str, Path]] = [("index", cfg.workdir / "raw" / "index.json")]
    provider_files: dict[str, tuple[Path, Path]] = {}
    failures = []
    for row in index:
        utt_id = row["utt_id"]
        try:
            t_path = _provider_file(cfg, utt_id, "transcript", cfg.transcriber)
            d_path = _provider_file(cfg, utt_id, "diarization", cfg.diarizer)
        except CorpusError as exc:
            failures.append({"utt_id": utt_id, "error": str(exc)})
            continue
        provider_files[utt_id] = (t_path, d_path)
        inputs.append((f"{utt_id}.transcript", t_path))
        inputs.append((f"{utt_id}.diarization", d_path))

    cfg_view = {"target_speaker_labels": cfg.target_speaker_labels}
    digest = _stage_digest("diarize-filter", cfg_view, inputs)
    skipped = _check_stamp(cfg, "diarize-filter", digest)
    if skipped:
        return skipped

    out_dir = cfg.workdir / "filtered"
    out_dir.mkdir(parents=True, exist_ok=True)
    utterances = []
    outputs = []
    for row in index:
        utt_id = row["utt_id"]
        if utt_id not in provider_files:
            continue
        t_path, d_path = provider_files[utt_id]
        try:
            parsed = parse_transcript_document(t_path.read_text(encoding="utf-8"))
            intervals = parse_diarization(d_path.read_text(encoding="utf-8"))
        except ParseError as exc:
            failures.append({"utt_id": utt_id, "error": str(exc)})
            continue
        target = cfg.target_speaker_labels.get(utt_id) or earliest_speaker(intervals)
        if target is None:
            failures.append({"utt_id": utt_id, "error": "diarization has no intervals"})
            continue
        filtered = filter_target_speaker(parsed.transcript, intervals, target)
        rel = f"filtered/{utt_id}.json"
        (cfg.workdir / rel).write_text(
            transcript_to_document(filtered) + "\n", encoding="utf-8"
        )
        outputs.append(rel)
        utterances.append(
            {
                "utt_id": utt_id,
                "target_label": target,
                "words_in": len(parsed.transcript.words),
                "words_kept": len(filtered.words),
                "words_rejected_at_parse": len(parsed.rejected),
                "punctuation_density": round(
                    punctuation_density(filtered, cfg.segmentation.punctuation), 4
                ),
            }
        )

    report = {
        "stage": "diarize-filter",
        "utterances": sorted(utterances, key=lambda u: u["utt_id"]),
        "failures": sorted(failures, key=lambda f: f["utt_id"]),
        "new_outputs": len(outputs),
    }
    _write_report(cfg, "diarize-filter", report)
    _write_stamp(cfg, "diarize-filter", digest, outputs)
    return report


def stage_segment(cfg: PipelineConfig) -> dict:
    index = _load_index(cfg)
    inputs: list[tuple[str, Path]] = []
    ready = []
    failures = []
    for row in index:
        utt_id = row["utt_id"]
        f_path = cfg.workdir / "filtered" / f"{utt_id}.json"
        a_path = cfg.workdir / "raw" / f"{utt_id}.wav"
        if not f_path.exists():
            failures.append({"utt_id": utt_id, "error": f"missing filtered transcript {f_path}"})
            continue
        if not a_path.exists():
            failures.append({"utt_id": utt_id, "error": f"missing audio {a_path}"})
            continue
        ready.append((row, f_path, a_path))
        inputs.append((f"{utt_id}.filtered", f_path))
        inputs.append((f"{utt_id}.wav", a_path))
    if index and not ready:
        raise CorpusError(f"missing upstream artifact for segment: {cfg.workdir / 'filtered'}")

    digest = _stage_digest("segment", _seg_cfg_view(cfg), inputs)
    skipped = _check_stamp(cfg, "segment", digest)
    if skipped:
        return skipped

    strategy = _STRATEGY_FNS[cfg.strategy]
    seg_dir = cfg.workdir / "segments"
    seg_dir.mkdir(parents=True, exist_ok=True)
    entries: list[DatasetEntry] = []
    per_utt = []
    outputs = []
    for row, f_path, a_path in ready:
        utt_id = row["utt_id"]
        transcript = parse_transcript_document(f_path.read_text(encoding="utf-8")).transcript
        segments = strategy(transcript, cfg.segmentation)
        audio = audiocore.read_wav(a_path)
        n_written = 0
        for i, segment in enumerate(segments):
            clip_id = f"{utt_id}_s{i:04d}"
            rel = f"segments/{clip_id}.wav"
            try:
                clip = extract_segment_audio(audio, segment, cfg.segmentation)
            except ValueError as exc:
                failures.append({"utt_id": utt_id, "error": f"{clip_id}: {exc}"})
                continue
            audiocore.write_wav(cfg.workdir / rel, clip)
            outputs.append(rel)
            n_written += 1
            entries.append(
                DatasetEntry(
                    clip_id=clip_id,
                    speaker_id=row["speaker_id"],
                    label="bonafide",
                    method=None,
                    transcript_text=segment.text,
                    duration=clip.duration,
                    file_path=rel,
                    source_clip_id=None,
                    extra={
                        "ends_at_punctuation": str(segment.ends_at_punctuation).lower(),
                        "padded": str(segment.padded).lower(),
                    },
                )
            )
        per_utt.append({"utt_id": utt_id, "segments": n_written})

    manifest_rel = "manifests/bonafide_segmented.csv"
    write_dataset_manifest(entries, cfg.workdir / manifest_rel)
    outputs.append(manifest_rel)

    report = {
        "stage": "segment",
        "strategy": cfg.strategy,
        "utterances": sorted(per_utt, key=lambda u: u["utt_id"]),
        "segments": len(entries),
        "failures": sorted(failures, key=lambda f: f["utt_id"]),
        "new_outputs": len(outputs),
    }
    _write_report(cfg, "segment", report)
    _write_stamp(cfg, "segment", digest, outputs)
    return report


def stage_gate(cfg: PipelineConfig) -> dict:
    manifest_path = _require(cfg.workdir / "manifests" / "bonafide_segmented.csv", "gate")
    entries = read_dataset_manifest(manifest_path)
    inputs = [("manifest", manifest_path)] + [
        (e.clip_id, cfg.workdir / e.file_path) for e in entries
    ]
    cfg_view = {
        "min_snr_db": cfg.quality.min_snr_db,
        "max_silence_ratio": cfg.quality.max_silence_ratio,
        "min_duration": cfg.quality.min_duration,
        "max_duration": cfg.quality.max_duration,
    }
    digest = _stage_digest("gate", cfg_view, inputs)
    skipped = _check_stamp(cfg, "gate", digest)
    if skipped:
        return skipped

    rows = []
    kept: list[DatasetEntry] = []
    for entry in sorted(entries, key=lambda e: e.clip_id):
        buf = audiocore.read_wav(cfg.workdir / entry.file_path)
        report = quality_gate(buf, cfg.quality)
        rows.append(
            {
                "clip_id": entry.clip_id,
                "snr_db": None if report.snr_db is None else round(report.snr_db, 3),
                "silence_ratio": round(report.silence_ratio, 4),
                "duration": round(report.duration, 4),
                "passed": report.passed,
                "reasons": list(report.reasons),
            }
        )
        if report.passed:
            kept.append(entry)

    manifest_rel = "manifests/bonafide.csv"
    write_dataset_manifest(kept, cfg.workdir / manifest_rel)
    quality_rel = "manifests/quality.csv"
    quality_lines = ["clip_id,snr_db,silence_ratio,duration,passed,reasons"]
    for row in rows:
        snr = "" if row["snr_db"] is None else row["snr_db"]
        quality_lines.append(
            f"{row['clip_id']},{snr},{row['silence_ratio']},{row['duration']},"
            f"{str(row['passed']).lower()},{'|'.join(row['reasons'])}"
        )
    (cfg.workdir / quality_rel).write_text("\n".join(quality_lines) + "\n", encoding="utf-8")

    report = {
        "stage": "gate",
        "clips": rows,
        "kept": len(kept),
        "rejected": len(rows) - len(kept),
        "new_outputs": 2,
    }
    _write_report(cfg, "gate", report)
    _write_stamp(cfg, "gate", digest, [manifest_rel, quality_rel])
    return report


def _snr_by_clip(cfg: PipelineConfig) -> dict[str, float]:
    gate_report = cfg.workdir / "reports" / "gate.json"
    if not gate_report.exists():
        return {}
    data = json.loads(gate_report.read_text(encoding="utf-8"))
    return {
        row["clip_id"]: row["snr_db"]
        for row in data.get("clips", [])
        if row.get("snr_db") is not None
    }


def stage_jobs(cfg: PipelineConfig) -> dict:
    manifest_path = _require(cfg.workdir / "manifests" / "bonafide.csv", "jobs")
    entries = read_dataset_manifest(manifest_path)
    cfg_view = {"engines": _engines_view(cfg)}
    digest = _stage_digest("jobs", cfg_view, [("manifest", manifest_path)])
    skipped = _check_stamp(cfg, "jobs", digest)
    if skipped:
        return skipped
    if not cfg.engines:
        raise CorpusError("jobs stage needs at least one engine in the config")

    snr_map = _snr_by_clip(cfg)
    by_speaker: dict[str, list[DatasetEntry]] = {}
    for entry in entries:
        by_speaker.setdefault(entry.speaker_id, []).append(entry)

    jobs: list[SynthesisJob] = []
    skips = []
    for speaker in sorted(by_speaker):
        result = build_jobs(
            by_speaker[speaker], list(cfg.engines), speaker, snr_by_clip=snr_map
        )
        jobs.extend(result.jobs)
        skips.extend(
            {"speaker_id": speaker, "engine_id": s.engine_id, "reason": s.reason}
            for s in result.skipped
        )
    jobs.sort(key=lambda j: j.job_id)

    jobs_rel = "manifests/jobs.jsonl"
    path = cfg.workdir / jobs_rel
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for job in jobs:
            fh.write(
                json.dumps(
                    {
                        "job_id": job.job_id,
                        "engine_id": job.engine_id,
                        "speaker_id": job.speaker_id,
                        "text": job.text,
                        "reference_clip_ids": list(job.reference_clip_ids),
                        "output_path": job.output_path,
                        "source_clip_id": job.source_clip_id,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    report = {
        "stage": "jobs",
        "jobs": len(jobs),
        "skips": sorted(skips, key=lambda s: (s["speaker_id"], s["engine_id"])),
        "new_outputs": 1,
    }
    _write_report(cfg, "jobs", report)
    _write_stamp(cfg, "jobs", digest, [jobs_rel])
    return report


def read_jobs_manifest(path: Path) -> list[SynthesisJob]:
    jobs = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        jobs.append(
            SynthesisJob(
                job_id=data["job_id"],
                engine_id=data["engine_id"],
                speaker_id=data["speaker_id"],
                text=data["text"],
                reference_clip_ids=tuple(data["reference_clip_ids"]),
                output_path=data["output_path"],
                source_clip_id=data["source_clip_id"],
            )
        )
    return jobs


def stage_assemble(cfg: PipelineConfig) -> dict:
    jobs_path = _require(cfg.workdir / "manifests" / "jobs.jsonl", "assemble")
    bonafide_path = _require(cfg.workdir / "manifests" / "bonafide.csv", "assemble")
    cfg_view = {"engines": _engines_view(cfg)}
    digest = _stage_digest(
        "assemble", cfg_view, [("jobs", jobs_path), ("bonafide", bonafide_path)]
    )
    skipped = _check_stamp(cfg, "assemble", digest)
    if skipped:
        return skipped

    jobs = read_jobs_manifest(jobs_path)
    bonafide = read_dataset_manifest(bonafide_path)
    reference_paths = {e.clip_id: str(cfg.workdir / e.file_path) for e in bonafide}
    started = time.monotonic()
    results = run_jobs(
        jobs,
        list(cfg.engines),
        output_root=cfg.workdir,
        reference_paths=reference_paths,
        parallelism=cfg.parallelism,
    )
    log.info("assemble: %d jobs in %.1fs", len(jobs), time.monotonic() - started)

    results_rel = "manifests/results.jsonl"
    with (cfg.workdir / results_rel).open("w", encoding="utf-8") as fh:
        for _, result in results:
            fh.write(
                json.dumps(
                    {
                        "job_id": result.job_id,
                        "status": result.status,
                        "duration": result.duration,
                        "reject_reasons": list(result.reject_reasons),
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    entries = assemble_dataset(bonafide, results)
    manifest_rel = "manifests/dataset_full.csv"
    write_dataset_manifest(entries, cfg.workdir / manifest_rel)

    by_status: dict[str, int] = {}
    for _, result in results:
        by_status[result.status] = by_status.get(result.status, 0) + 1
    outputs = [results_rel, manifest_rel] + [
        job.output_path for job, result in results if result.status == "ok"
    ]
    report = {
        "stage": "assemble",
        "jobs": len(jobs),
        "by_status": dict(sorted(by_status.items())),
        "entries_total": len(entries),
        "new_outputs": len(outputs),
    }
    _write_report(cfg, "assemble", report)
    _write_stamp(cfg, "assemble", digest, outputs)
    return report


def stage_stats(cfg: PipelineConfig) -> dict:
    from .evaluation import compute_stats

    manifest_path = cfg.workdir / "manifests" / "dataset_full.csv"
    if not manifest_path.exists():
        manifest_path = cfg.workdir / "manifests" / "bonafide.csv"
    _require(manifest_path, "stats")
    digest = _stage_digest("stats", {}, [("manifest", manifest_path)])
    skipped = _check_stamp(cfg, "stats", digest)
    if skipped:
        return skipped

    entries = read_dataset_manifest(manifest_path)
    stats = compute_stats(entries).to_dict()
    report = {"stage": "stats", "manifest": manifest_path.name, "new_outputs": 1, **stats}
    _write_report(cfg, "stats", report)
    _write_stamp(cfg, "stats", digest, ["reports/stats.json"])
    return report


def run_verify(cfg: PipelineConfig) -> dict:
    """Cross-check manifest entries against files on disk, both ways."""
    manifest_path = cfg.workdir / "manifests" / "dataset_full.csv"
    if not manifest_path.exists():
        manifest_path = cfg.workdir / "manifests" / "bonafide.csv"
    _require(manifest_path, "verify")
    entries = read_dataset_manifest(manifest_path)
    listed = {e.file_path for e in entries}
    missing = sorted(p for p in listed if not (cfg.workdir / p).exists())
    on_disk = set()
    for sub in ("segments", "synth"):
        root = cfg.workdir / sub
        if root.exists():
            on_disk.update(str(p.relative_to(cfg.workdir)) for p in root.rglob("*.wav"))
    orphans = sorted(on_disk - listed)
    return {
        "stage": "verify",
        "manifest": manifest_path.name,
        "entries": len(entries),
        "missing_files": missing,
        "orphan_files": orphans,
        "ok": not missing and not orphans,
    }


_STAGE_FNS = {
    "acquire": stage_acquire,
    "diarize-filter": stage_diarize_filter,
    "segment": stage_segment,
    "gate": stage_gate,
    "jobs": stage_jobs,
    "assemble": stage_assemble,
    "stats": stage_stats,
}


def run_stage(stage: str, cfg: PipelineConfig) -> dict:
    if stage not in _STAGE_FNS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    report = _STAGE_FNS[stage](cfg)
    log.info("stage %s finished in %.2fs", stage, time.monotonic() - started)
    return report
