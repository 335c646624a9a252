"""HTTP service for the listening test.

Serves trial audio blind (no truth labels, no filename hints in URLs),
records one response per trial, and reports aggregate miss rates and
dataset statistics. Sessions persist as an append-only JSONL event log
replayed at startup, so a crash loses nothing.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Sequence

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .errors import ConflictError, NotFoundError
from .evaluation import (
    TrialSession,
    Trial,
    compute_miss_rates,
    compute_stats,
    new_session,
    record_response,
)
from .manifest import DatasetEntry


@dataclass(frozen=True)
class DatasetSource:
    dataset_id: str
    entries: list[DatasetEntry]
    audio_root: Path


class SessionStore:
    """In-memory sessions backed by an append-only event log."""

    def __init__(self, log_path: Path, seed: int | None = None):
        self.log_path = log_path
        self.sessions: dict[str, TrialSession] = {}
        self._lock = threading.Lock()
        self._rng = Random(seed)
        if log_path.exists():
            self._replay()

    def _replay(self) -> None:
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "session":
                trials = [Trial(**t) for t in event["trials"]]
                self.sessions[event["session_id"]] = TrialSession(
                    session_id=event["session_id"],
                    participant_id=event["participant_id"],
                    trials=trials,
                )
            elif event["event"] == "response":
                session = self.sessions[event["session_id"]]
                record_response(
                    session, event["trial_id"], event["response"], now=event["responded_at"]
                )

    def _append(self, event: dict) -> None:
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def create(
        self, participant_id: str, datasets: Sequence[tuple[str, list[DatasetEntry]]]
    ) -> TrialSession:
        with self._lock:
            session = new_session(participant_id, datasets, seed=self._rng.getrandbits(64))
            self.sessions[session.session_id] = session
            self._append(
                {
                    "event": "session",
                    "session_id": session.session_id,
                    "participant_id": session.participant_id,
                    "trials": [
                        {
                            "trial_id": t.trial_id,
                            "dataset_id": t.dataset_id,
                            "clip_id": t.clip_id,
                            "truth": t.truth,
                        }
                        for t in session.trials
                    ],
                }
            )
            return session

    def respond(self, session_id: str, trial_id: str, response: str) -> Trial:
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise NotFoundError(f"no session {session_id!r}")
            trial = record_response(session, trial_id, response)
            self._append(
                {
                    "event": "response",
                    "session_id": session_id,
                    "trial_id": trial_id,
                    "response": response,
                    "responded_at": trial.responded_at,
                }
            )
            return trial


class ResponseBody(BaseModel):
    response: str


class SessionRequest(BaseModel):
    participant_id: str = "anonymous"


def _session_view(session: TrialSession) -> dict:
    # truth labels and dataset ids stay server-side until completion
    return {
        "session_id": session.session_id,
        "participant_id": session.participant_id,
        "complete": session.complete,
        "trials": [
            {
                "trial_id": t.trial_id,
                "audio_url": f"/audio/{t.clip_id}",
                "position": i + 1,
                "total": len(session.trials),
                "answered": t.response is not None,
            }
            for i, t in enumerate(session.trials)
        ],
    }


def create_app(
    datasets: Sequence[DatasetSource],
    log_path: Path,
    seed: int | None = None,
) -> FastAPI:
    app = FastAPI(title="corpusforge listening test")
    store = SessionStore(log_path, seed=seed)
    dataset_pairs = [(d.dataset_id, d.entries) for d in datasets]
    clip_paths: dict[str, Path] = {}
    for source in datasets:
        for entry in source.entries:
            clip_paths[entry.clip_id] = source.audio_root / entry.file_path

    @app.post("/sessions")
    def create_session(body: SessionRequest | None = None):
        participant = body.participant_id if body else "anonymous"
        session = store.create(participant, dataset_pairs)
        return _session_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return _session_view(session)

    @app.get("/audio/{clip_id}")
    def get_audio(clip_id: str):
        path = clip_paths.get(clip_id)
        if path is None or not path.exists():
            raise HTTPException(status_code=404, detail="unknown clip")
        return Response(content=path.read_bytes(), media_type="audio/wav")

    @app.post("/sessions/{session_id}/trials/{trial_id}")
    def post_response(session_id: str, trial_id: str, body: ResponseBody):
        if body.response not in ("real", "fake"):
            raise HTTPException(status_code=422, detail="response must be 'real' or 'fake'")
        try:
            trial = store.respond(session_id, trial_id, body.response)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"trial_id": trial.trial_id, "answered": True}

    @app.get("/sessions/{session_id}/summary")
    def session_summary(session_id: str):
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        if not session.complete:
            raise HTTPException(status_code=409, detail="session not complete")
        correct = sum(1 for t in session.trials if t.response == t.truth)
        return {
            "session_id": session_id,
            "n_trials": len(session.trials),
            "n_correct": correct,
            "accuracy": round(correct / len(session.trials), 3) if session.trials else None,
        }

    @app.get("/reports/missrates")
    def missrates_report():
        return compute_miss_rates(store.sessions.values()).to_dict()

    @app.get("/reports/stats")
    def stats_report():
        return {
            d.dataset_id: compute_stats(d.entries).to_dict() for d in datasets
        }

    return app
