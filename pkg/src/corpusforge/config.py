"""Declarative pipeline configuration.

One YAML file drives a reproducible run; scalar values can be overridden
with CORPUSFORGE_* environment variables (double underscore descends into
sections, e.g. CORPUSFORGE_QUALITY__MIN_SNR_DB=10).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import yaml

from .errors import ConfigError
from .manifest import DEFAULT_DATE_RANGE
from .quality import QualityGateConfig
from .segmenter import SegmentationParams
from .synthesis import EngineSpec

ENV_PREFIX = "CORPUSFORGE_"
STRATEGIES = ("transcript", "pause", "fixed")


@dataclass(frozen=True)
class ServeDataset:
    dataset_id: str
    manifest: Path
    audio_root: Path


@dataclass(frozen=True)
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    session_log: Path = Path("sessions/responses.jsonl")
    datasets: tuple[ServeDataset, ...] = ()


@dataclass(frozen=True)
class PipelineConfig:
    workdir: Path
    source_manifest: Path
    providers_dir: Path
    downloader: str = "cp {url} {output}"
    transcriber: str | None = None
    diarizer: str | None = None
    roster: tuple[str, ...] | None = None
    date_range: tuple[date, date] = DEFAULT_DATE_RANGE
    strategy: str = "transcript"
    target_speaker_labels: dict[str, str] = field(default_factory=dict)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    quality: QualityGateConfig = field(default_factory=QualityGateConfig)
    engines: tuple[EngineSpec, ...] = ()
    parallelism: int = 1
    seed: int = 0
    serve: ServeConfig = field(default_factory=ServeConfig)

    def validate(self) -> None:
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.date_range[0] > self.date_range[1]:
            raise ConfigError("date_range start is after its end")


def _apply_env_overrides(raw: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX) :].lower().split("__")
        node = raw
        for part in path[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[path[-1]] = yaml.safe_load(value)
    return raw


def _parse_date_range(value) -> tuple[date, date]:
    if value is None:
        return DEFAULT_DATE_RANGE
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError("date_range must be a [start, end] pair")
    out = []
    for item in value:
        if isinstance(item, date):
            out.append(item)
        else:
            try:
                out.append(date.fromisoformat(str(item)))
            except ValueError as exc:
                raise ConfigError(f"date_range: unparseable date {item!r}") from exc
    return out[0], out[1]


def load_config(path: str | Path, environ=None) -> PipelineConfig:
    """Load, override from the environment, and validate."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    raw = _apply_env_overrides(raw, environ)
    base = path.parent

    def as_path(value, default=None) -> Path:
        p = Path(value) if value is not None else default
        return p if p.is_absolute() else base / p

    try:
        seg_raw = raw.get("segmentation") or {}
        segmentation = SegmentationParams(
            target_duration=float(seg_raw.get("target_duration", 8.0)),
            tolerance=float(seg_raw.get("tolerance", 2.0)),
            punctuation=frozenset(seg_raw.get("punctuation", ".!?,;")),
            trailing_pad=float(seg_raw.get("trailing_pad", 0.25)),
            pause_threshold=float(seg_raw.get("pause_threshold", 0.5)),
            fixed_interval=float(seg_raw.get("fixed_interval", 6.0)),
        )
        q_raw = raw.get("quality") or {}
        quality = QualityGateConfig(
            min_snr_db=float(q_raw.get("min_snr_db", 12.0)),
            max_silence_ratio=float(q_raw.get("max_silence_ratio", 0.4)),
            min_duration=float(
                q_raw.get(
                    "min_duration",
                    segmentation.target_duration - 2 * segmentation.tolerance,
                )
            ),
            max_duration=float(
                q_raw.get(
                    "max_duration",
                    segmentation.target_duration
                    + segmentation.tolerance
                    + segmentation.trailing_pad,
                )
            ),
        )
        engines = tuple(
            EngineSpec(
                engine_id=str(e["engine_id"]),
                regime=str(e["regime"]),
                command_template=str(e["command"]),
            )
            for e in raw.get("engines") or []
        )
        serve_raw = raw.get("serve") or {}
        serve = ServeConfig(
            host=str(serve_raw.get("host", "127.0.0.1")),
            port=int(serve_raw.get("port", 8765)),
            session_log=Path(serve_raw.get("session_log", "sessions/responses.jsonl")),
            datasets=tuple(
                ServeDataset(
                    dataset_id=str(d["dataset_id"]),
                    manifest=Path(d["manifest"]),
                    audio_root=Path(d.get("audio_root", ".")),
                )
                for d in serve_raw.get("datasets") or []
            ),
        )
        roster = raw.get("roster")
        cfg = PipelineConfig(
            workdir=as_path(raw.get("workdir"), Path("work")),
            source_manifest=as_path(raw.get("source_manifest"), Path("sources.csv")),
            providers_dir=as_path(raw.get("providers_dir"), Path("providers")),
            downloader=str(raw.get("downloader", "cp {url} {output}")),
            transcriber=raw.get("transcriber"),
            diarizer=raw.get("diarizer"),
            roster=tuple(str(r) for r in roster) if roster else None,
            date_range=_parse_date_range(raw.get("date_range")),
            strategy=str(raw.get("strategy", "transcript")),
            target_speaker_labels=dict(raw.get("target_speaker_labels") or {}),
            segmentation=segmentation,
            quality=quality,
            engines=engines,
            parallelism=int(raw.get("parallelism", 1)),
            seed=int(raw.get("seed", 0)),
            serve=serve,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg.validate()
    return cfg
