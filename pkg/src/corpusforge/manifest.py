"""Source and dataset manifests: comma-separated, quoted, fixed headers.

The source manifest names the curated recordings to ingest; the dataset
manifest names every bonafide and synthetic clip the pipeline produced.
Unknown extra columns round-trip verbatim. Rows that violate invariants
are rejected individually; only a malformed header is fatal.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable

from .errors import ManifestError, ParseError

SOURCE_COLUMNS = ("speaker_id", "media_ref", "start_time", "content_type", "publication_date")
DATASET_COLUMNS = (
    "clip_id",
    "speaker_id",
    "label",
    "method",
    "transcript_text",
    "duration",
    "file_path",
    "source_clip_id",
)
CONTENT_TYPES = frozenset({"speech", "interview", "statement", "other"})
DEFAULT_DATE_RANGE = (date(2018, 1, 1), date(2024, 12, 31))
_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


@dataclass(frozen=True)
class SourceRecord:
    speaker_id: str
    media_ref: str
    start_time: float
    content_type: str
    publication_date: date
    min_resolution_ok: bool = True
    extra: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetEntry:
    clip_id: str
    speaker_id: str
    label: str
    method: str | None
    transcript_text: str
    duration: float
    file_path: str
    source_clip_id: str | None = None
    extra: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.clip_id:
            raise ManifestError("clip_id must be non-empty")
        if not self.speaker_id:
            raise ManifestError(f"{self.clip_id}: speaker_id must be non-empty")
        if self.label not in ("bonafide", "synthetic"):
            raise ManifestError(f"{self.clip_id}: unknown label {self.label!r}")
        if (self.label == "synthetic") != bool(self.method):
            raise ManifestError(
                f"{self.clip_id}: method must be present exactly for synthetic entries"
            )
        if not self.duration > 0:
            raise ManifestError(f"{self.clip_id}: duration must be positive")


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    reason: str


@dataclass
class SourceParseResult:
    records: list[SourceRecord]
    rejects: list[RejectedRow]
    accepted_rows: list[int]


def parse_source_manifest(
    raw: str | io.TextIOBase,
    roster: Iterable[str] | None = None,
    date_range: tuple[date, date] = DEFAULT_DATE_RANGE,
) -> SourceParseResult:
    """Parse the curated source CSV; invalid rows land in the rejects list.

    Row numbers count the header as row 1. A header missing any required
    column is fatal.
    """
    stream = io.StringIO(raw) if isinstance(raw, str) else raw
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise ParseError("source manifest is empty: no header row")
    missing = [c for c in SOURCE_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ParseError(f"source manifest header missing columns: {', '.join(missing)}")
    roster_set = set(roster) if roster is not None else None
    known = set(SOURCE_COLUMNS) | {"min_resolution_ok"}

    records: list[SourceRecord] = []
    rejects: list[RejectedRow] = []
    accepted: list[int] = []
    for row_number, row in enumerate(reader, start=2):
        reason = None
        if row.get(None) or any(row[k] is None for k in SOURCE_COLUMNS):
            reason = "malformed row: wrong field count"
        if reason is None:
            speaker = row["speaker_id"].strip()
            if not speaker:
                reason = "empty speaker_id"
            elif roster_set is not None and speaker not in roster_set:
                reason = f"speaker {speaker!r} not in roster"
        if reason is None:
            try:
                start_time = float(row["start_time"])
            except ValueError:
                reason = f"unparseable start_time {row['start_time']!r}"
            else:
                if start_time < 0:
                    reason = "negative start_time"
        if reason is None and row["content_type"].strip() not in CONTENT_TYPES:
            reason = f"unknown content_type {row['content_type']!r}"
        if reason is None:
            try:
                published = date.fromisoformat(row["publication_date"].strip())
            except ValueError:
                reason = f"unparseable publication_date {row['publication_date']!r}"
            else:
                if not date_range[0] <= published <= date_range[1]:
                    reason = "date out of range"
        min_res = True
        if reason is None:
            raw_flag = (row.get("min_resolution_ok") or "").strip().lower()
            if raw_flag:
                if raw_flag in _BOOL_WORDS:
                    min_res = _BOOL_WORDS[raw_flag]
                else:
                    reason = f"unparseable min_resolution_ok {raw_flag!r}"

        if reason is not None:
            rejects.append(RejectedRow(row_number, reason))
            continue
        extra = {
            k: v for k, v in row.items() if k is not None and k not in known and v is not None
        }
        records.append(
            SourceRecord(
                speaker_id=speaker,
                media_ref=row["media_ref"].strip(),
                start_time=start_time,
                content_type=row["content_type"].strip(),
                publication_date=published,
                min_resolution_ok=min_res,
                extra=extra,
            )
        )
        accepted.append(row_number)
    return SourceParseResult(records=records, rejects=rejects, accepted_rows=accepted)


def validate_dataset(entries: list[DatasetEntry]) -> None:
    """Per-entry invariants plus manifest-wide uniqueness and pairing."""
    seen: set[str] = set()
    bonafide_ids: set[str] = set()
    for entry in entries:
        entry.validate()
        if entry.clip_id in seen:
            raise ManifestError(f"duplicate clip_id {entry.clip_id!r}")
        seen.add(entry.clip_id)
        if entry.label == "bonafide":
            bonafide_ids.add(entry.clip_id)
    for entry in entries:
        if entry.label == "synthetic" and entry.source_clip_id:
            if entry.source_clip_id not in bonafide_ids:
                raise ManifestError(
                    f"{entry.clip_id}: source_clip_id {entry.source_clip_id!r} "
                    "does not name a bonafide entry in this manifest"
                )


def write_dataset_manifest(entries: list[DatasetEntry], path: str | Path) -> int:
    """Write entries sorted by (speaker_id, clip_id); returns the row count."""
    validate_dataset(entries)
    ordered = sorted(entries, key=lambda e: (e.speaker_id, e.clip_id))
    extra_columns = sorted({k for e in ordered for k in e.extra})
    header = list(DATASET_COLUMNS) + extra_columns
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for entry in ordered:
            writer.writerow(
                [
                    entry.clip_id,
                    entry.speaker_id,
                    entry.label,
                    entry.method or "",
                    entry.transcript_text,
                    repr(float(entry.duration)),
                    entry.file_path,
                    entry.source_clip_id or "",
                ]
                + [entry.extra.get(k, "") for k in extra_columns]
            )
    return len(ordered)


def read_dataset_manifest(path: str | Path) -> list[DatasetEntry]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: dataset manifest has no header row")
        missing = [c for c in DATASET_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: manifest header missing columns: {', '.join(missing)}")
        known = set(DATASET_COLUMNS)
        entries = []
        for i, row in enumerate(reader, start=2):
            try:
                duration = float(row["duration"])
            except ValueError as exc:
                raise ParseError(f"{path} row {i}: unparseable duration") from exc
            entries.append(
                DatasetEntry(
                    clip_id=row["clip_id"],
                    speaker_id=row["speaker_id"],
                    label=row["label"],
                    method=row["method"] or None,
                    transcript_text=row["transcript_text"],
                    duration=duration,
                    file_path=row["file_path"],
                    source_clip_id=row["source_clip_id"] or None,
                    extra={k: v for k, v in row.items() if k not in known and k is not None},
                )
            )
    validate_dataset(entries)
    return entries
