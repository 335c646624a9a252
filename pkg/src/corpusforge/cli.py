"""Command-line entry point.

Subcommands mirror the pipeline stages; every run is driven by one
declarative config file. Exit codes: 0 success, 1 fatal, 2 config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import PipelineConfig, load_config
from .errors import ConfigError, CorpusError
from .pipeline import run_stage, run_verify

log = logging.getLogger(__name__)

_STAGE_COMMANDS = (
    "acquire",
    "diarize-filter",
    "segment",
    "gate",
    "jobs",
    "assemble",
    "stats",
)


def _apply_cli_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        changes["parallelism"] = args.jobs
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
        cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpusforge",
        description="speech corpus curation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the pipeline config YAML")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--jobs", type=int, default=None, help="override per-stage parallelism"
        )

    for stage in _STAGE_COMMANDS:
        common(sub.add_parser(stage, help=f"run the {stage} stage"))
    common(sub.add_parser("verify", help="cross-check manifest entries against files"))
    serve = sub.add_parser("serve", help="run the listening-test service")
    common(serve)
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def _run_serve(cfg: PipelineConfig, host: str | None, port: int | None) -> int:
    import uvicorn

    from .manifest import read_dataset_manifest
    from .service import DatasetSource, create_app

    if not cfg.serve.datasets:
        raise ConfigError("serve: no datasets configured under serve.datasets")
    sources = []
    for ds in cfg.serve.datasets:
        manifest = ds.manifest if ds.manifest.is_absolute() else cfg.workdir / ds.manifest
        if not manifest.exists():
            raise CorpusError(f"missing upstream artifact for serve: {manifest}")
        root = ds.audio_root if ds.audio_root.is_absolute() else cfg.workdir / ds.audio_root
        sources.append(
            DatasetSource(
                dataset_id=ds.dataset_id,
                entries=read_dataset_manifest(manifest),
                audio_root=root,
            )
        )
    log_path = (
        cfg.serve.session_log
        if cfg.serve.session_log.is_absolute()
        else cfg.workdir / cfg.serve.session_log
    )
    app = create_app(sources, log_path, seed=cfg.seed)
    uvicorn.run(app, host=host or cfg.serve.host, port=port or cfg.serve.port)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_cli_overrides(load_config(args.config), args)
        if args.command == "serve":
            return _run_serve(cfg, args.host, args.port)
        if args.command == "verify":
            report = run_verify(cfg)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0 if report["ok"] else 1
        if args.command == "segment":
            # segmentation consumes speaker-filtered transcripts; produce
            # them first (a no-op when inputs are unchanged)
            run_stage("diarize-filter", cfg)
        report = run_stage(args.command, cfg)
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CorpusError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
