"""Exact-match scoring of a speech-to-text model against the prompted items.

The transcriber is injected so the heavyweight multilingual model stays
out of the test suite; a replay transcriber reads previously produced
transcripts from a line-delimited JSON file.
"""

import json
import logging
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .consensus import ConsensusPolicy, apply_policy
from .corpus import CORRECT, STANDARD_QUESTIONS, Corpus, Recording

logger = logging.getLogger(__name__)

_STRIP_CHARS = string.punctuation + string.whitespace

# transcriber: recording -> raw transcript text (may raise)
Transcriber = Callable[[Recording], str]


@dataclass(frozen=True)
class TranscriptRecord:
    recording_id: str
    expected_text: str
    transcript: str

    def __post_init__(self) -> None:
        if self.expected_text not in {q.text for q in STANDARD_QUESTIONS.values()}:
            raise ValueError(f"expected_text {self.expected_text!r} is not a known item")


def normalize_transcript(text: str) -> str:
    """Lowercase, trim edge whitespace/punctuation, collapse inner whitespace."""
    return " ".join(text.lower().strip(_STRIP_CHARS).split())


@dataclass(frozen=True)
class QuestionAccuracy:
    samples: int
    matches: int

    @property
    def accuracy(self) -> float:
        return self.matches / self.samples


@dataclass(frozen=True)
class BaselineReport:
    per_question: dict[str, QuestionAccuracy]
    total_samples: int
    total_matches: int

    @property
    def overall_accuracy(self) -> float:
        return self.total_matches / self.total_samples


def exact_match_accuracy(records: Sequence[TranscriptRecord]) -> BaselineReport:
    """Per-question and overall exact-match accuracy after normalization."""
    if not records:
        raise ValueError("no transcript records")
    samples: dict[str, int] = {}
    matches: dict[str, int] = {}
    for record in records:
        key = record.expected_text
        samples[key] = samples.get(key, 0) + 1
        if normalize_transcript(record.transcript) == normalize_transcript(record.expected_text):
            matches[key] = matches.get(key, 0) + 1
    per_question = {
        key: QuestionAccuracy(samples=n, matches=matches.get(key, 0))
        for key, n in samples.items()
    }
    return BaselineReport(
        per_question=per_question,
        total_samples=sum(samples.values()),
        total_matches=sum(matches.values()),
    )


class CTCTranscriber:
    """Speech-to-text through a CTC checkpoint loaded by identifier.

    Heavyweight path for live transcription; offline scoring should use
    ReplayTranscriber instead.
    """

    def __init__(self, checkpoint_id: str, audio_root: Optional[Path] = None):
        try:
            import torch
            from transformers import AutoModelForCTC, AutoProcessor
        except ImportError as exc:
            raise RuntimeError("CTCTranscriber requires torch and transformers") from exc
        self._torch = torch
        self.processor = AutoProcessor.from_pretrained(checkpoint_id)
        self.model = AutoModelForCTC.from_pretrained(checkpoint_id)
        self.model.eval()
        self.audio_root = audio_root

    def __call__(self, recording: Recording) -> str:
        from .corpus import CANONICAL_RATE_HZ, ingest_audio

        waveform = ingest_audio(recording, audio_root=self.audio_root)
        inputs = self.processor(
            waveform.samples, sampling_rate=CANONICAL_RATE_HZ, return_tensors="pt"
        )
        with self._torch.no_grad():
            logits = self.model(inputs.input_values).logits
        ids = self._torch.argmax(logits, dim=-1)
        return self.processor.batch_decode(ids)[0]


class ReplayTranscriber:
    """Serve transcripts recorded in a {recording_id, transcript} JSONL file."""

    def __init__(self, path: Path | str):
        self.transcripts: dict[str, str] = {}
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self.transcripts[obj["recording_id"]] = obj["transcript"]

    def __call__(self, recording: Recording) -> str:
        return self.transcripts[recording.id]


def run_baseline(
    corpus: Corpus,
    transcriber: Transcriber,
    question_filter: Optional[set[str]] = None,
) -> list[TranscriptRecord]:
    """Transcribe every consensus-correct recording and pair it with its item.

    A transcriber failure on one recording is logged and recorded as an
    empty transcript; the run continues.
    """
    labels = apply_policy(corpus, ConsensusPolicy.CONSENSUS)
    records: list[TranscriptRecord] = []
    for rec in corpus.recordings:
        if labels.get(rec.id) != CORRECT:
            continue
        if question_filter is not None and rec.question_id not in question_filter:
            continue
        try:
            transcript = transcriber(rec)
        except Exception as exc:
            logger.warning("transcriber failed on %s: %s", rec.id, exc)
            transcript = ""
        records.append(
            TranscriptRecord(
                recording_id=rec.id,
                expected_text=corpus.questions[rec.question_id].text,
                transcript=transcript,
            )
        )
    return records
