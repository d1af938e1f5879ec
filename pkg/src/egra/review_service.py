"""HTTP service for the expert validation session.

Serves blinded validation recordings in a shuffled order, accepts
verdicts, persists them to an append-only line-delimited JSON log (the
latest verdict per recording wins), and reports live agreement rates.
"""

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .consensus import ExpertJudgment, sample_validation_set
from .corpus import CORRECT, INCORRECT, Corpus
from .report import live_agreement_tables

logger = logging.getLogger(__name__)


class JudgmentLog:
    """Append-only JSONL store; replays to the latest verdict per recording."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()

    def replay(self) -> dict[str, ExpertJudgment]:
        latest: dict[str, ExpertJudgment] = {}
        if not self.path.exists():
            return latest
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                latest[obj["recording_id"]] = ExpertJudgment(
                    recording_id=obj["recording_id"],
                    verdict=obj["verdict"],
                    judged_at=obj.get("judged_at"),
                )
        return latest

    def append(self, judgment: ExpertJudgment) -> None:
        record = {
            "recording_id": judgment.recording_id,
            "verdict": judgment.verdict,
            "judged_at": judgment.judged_at,
        }
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
                fh.flush()
                os.fsync(fh.fileno())


@dataclass
class ReviewSession:
    """One expert's pass over the blinded validation sample."""

    session_id: str
    order: list[str]
    log: JudgmentLog
    judgments: dict[str, ExpertJudgment] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.order)

    @property
    def judged(self) -> int:
        return len(self.judgments)

    def next_unjudged(self) -> Optional[str]:
        for rid in self.order:
            if rid not in self.judgments:
                return rid
        return None

    def record(self, judgment: ExpertJudgment) -> None:
        if judgment.recording_id not in set(self.order):
            raise KeyError(judgment.recording_id)
        self.log.append(judgment)
        self.judgments[judgment.recording_id] = judgment


def start_session(
    corpus: Corpus,
    seed: int,
    log_path: Path | str,
    per_question: int = 40,
    per_scenario: int = 10,
) -> ReviewSession:
    """Create (or resume) the review session for a corpus and seed.

    The validation sample is a pure function of (corpus, seed), so
    restarting the service reproduces the same order and resumes from the
    persisted judgment log.
    """
    order = sample_validation_set(
        corpus, per_question=per_question, per_scenario=per_scenario, seed=seed
    )
    digest = hashlib.sha256(f"{seed}|{','.join(order)}".encode()).hexdigest()[:12]
    log = JudgmentLog(log_path)
    session = ReviewSession(session_id=f"review-{digest}", order=order, log=log)
    session.judgments = {
        rid: j for rid, j in log.replay().items() if rid in set(order)
    }
    if session.judgments:
        logger.info("Resumed session %s with %d judgments", session.session_id, session.judged)
    return session


class JudgmentIn(BaseModel):
    recording_id: str
    verdict: str


def create_app(
    corpus: Corpus,
    seed: int,
    log_path: Path | str,
    per_question: int = 40,
    per_scenario: int = 10,
    ui_dir: Optional[Path | str] = None,
) -> FastAPI:
    app = FastAPI(title="reading-assessment review service")
    session = start_session(
        corpus, seed, log_path, per_question=per_question, per_scenario=per_scenario
    )
    app.state.session = session

    def progress() -> dict:
        return {"judged": session.judged, "total": session.total}

    @app.get("/api/session")
    def get_session():
        return {
            "session_id": session.session_id,
            "seed": seed,
            **progress(),
        }

    @app.get("/api/next")
    def get_next():
        rid = session.next_unjudged()
        if rid is None:
            return {"done": True, **progress()}
        rec = corpus.by_id(rid)
        return {
            "done": False,
            "recording_id": rid,
            "question_text": corpus.questions[rec.question_id].text,
            "audio_url": f"/api/audio/{rid}",
            **progress(),
        }

    @app.get("/api/audio/{recording_id}")
    def get_audio(recording_id: str):
        if recording_id not in corpus:
            raise HTTPException(status_code=404, detail="unknown recording")
        wav = corpus.resolve_audio(corpus.by_id(recording_id))
        if not wav.exists():
            raise HTTPException(status_code=404, detail="audio file missing")
        return FileResponse(wav, media_type="audio/wav")

    @app.post("/api/judgment")
    def post_judgment(body: JudgmentIn):
        if body.verdict not in (CORRECT, INCORRECT):
            raise HTTPException(status_code=422, detail=f"invalid verdict {body.verdict!r}")
        judgment = ExpertJudgment(
            recording_id=body.recording_id,
            verdict=body.verdict,
            judged_at=datetime.now(timezone.utc).isoformat(),
        )
        try:
            session.record(judgment)
        except KeyError:
            raise HTTPException(status_code=404, detail="recording not in validation set")
        return {"ok": True, **progress()}

    @app.get("/api/agreement")
    def get_agreement():
        tables = live_agreement_tables(corpus, list(session.judgments.values()))
        return JSONResponse({**tables, **progress()})

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    return app
