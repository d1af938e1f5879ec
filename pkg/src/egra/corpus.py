"""Corpus loading, audio ingestion, and label-distribution summaries.

The corpus is a line-delimited JSON manifest (one object per recording)
plus a directory of WAV files. After ingestion every waveform is mono,
16 kHz, peak-normalized, and at most 10 seconds long; that canonical
form is what the training harness consumes.
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

logger = logging.getLogger(__name__)

CORRECT = "correct"
INCORRECT = "incorrect"
VERDICTS = (CORRECT, INCORRECT)

CANONICAL_RATE_HZ = 16_000
MAX_DURATION_S = 10.0
# Symmetric PCM16 scale so that write -> read round-trips are sample-exact.
_PCM16_SCALE = 32_767.0


class ManifestError(ValueError):
    """Raised when the manifest file violates the corpus contract."""


class AudioIngestError(ValueError):
    """Raised when an audio file cannot be turned into a canonical waveform."""


@dataclass(frozen=True)
class Question:
    """One prompted item the child must pronounce."""

    id: str
    text: str
    kind: str  # letter | word | consonant_cluster


# The ten assessed items. Keys double as manifest question ids.
STANDARD_QUESTIONS: dict[str, Question] = {
    q.id: q
    for q in (
        Question("d", "d", "letter"),
        Question("v", "v", "letter"),
        Question("n", "n", "letter"),
        Question("ewe", "ewe", "word"),
        Question("hayi", "hayi", "word"),
        Question("hl", "hl", "consonant_cluster"),
        Question("inja", "inja", "word"),
        Question("kude", "kude", "word"),
        Question("molo", "molo", "word"),
        Question("ng", "ng", "consonant_cluster"),
    )
}


@dataclass(frozen=True)
class MarkerLabel:
    """A single marker's verdict on one recording."""

    marker_id: str
    verdict: str

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")


@dataclass(frozen=True)
class Recording:
    """One audio capture of one prompted item, with marker verdicts."""

    id: str
    question_id: str
    audio_path: str
    duration_s: float
    sample_rate_hz: int
    marker_labels: tuple[MarkerLabel, ...] = ()
    collected_at: Optional[str] = None
    grade: Optional[int] = None

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be > 0, got {self.duration_s}")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if len(self.marker_labels) > 3:
            raise ValueError(f"at most 3 marker labels allowed, got {len(self.marker_labels)}")
        markers = [label.marker_id for label in self.marker_labels]
        if len(set(markers)) != len(markers):
            raise ValueError(f"duplicate marker in labels for recording {self.id!r}")

    @property
    def fully_labeled(self) -> bool:
        return len(self.marker_labels) == 3


@dataclass(frozen=True)
class Waveform:
    """Canonical internal audio form: mono float32 at 16 kHz, peak 1.0."""

    samples: np.ndarray
    sample_rate_hz: int = CANONICAL_RATE_HZ

    def __post_init__(self) -> None:
        if self.samples.ndim != 1:
            raise ValueError("waveform must be mono (1-D samples)")
        if np.abs(self.samples).max(initial=0.0) > 1.0 + 1e-6:
            raise ValueError("waveform amplitude exceeds [-1, 1]")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude spectrogram: rows are frequency bins, columns are time frames."""

    magnitudes: np.ndarray
    freqs_hz: np.ndarray
    times_s: np.ndarray


@dataclass
class Corpus:
    """Immutable-after-load collection of recordings and their questions."""

    recordings: list[Recording]
    questions: dict[str, Question] = field(default_factory=lambda: dict(STANDARD_QUESTIONS))
    audio_root: Optional[Path] = None
    _by_id: dict[str, Recording] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {}
        for rec in self.recordings:
            if rec.id in self._by_id:
                raise ManifestError(f"duplicate recording id {rec.id!r}")
            if rec.question_id not in self.questions:
                raise ManifestError(f"unknown question id {rec.question_id!r} (recording {rec.id!r})")
            self._by_id[rec.id] = rec

    def __len__(self) -> int:
        return len(self.recordings)

    def by_id(self, recording_id: str) -> Recording:
        return self._by_id[recording_id]

    def __contains__(self, recording_id: str) -> bool:
        return recording_id in self._by_id

    def fully_labeled(self) -> Iterator[Recording]:
        return (rec for rec in self.recordings if rec.fully_labeled)

    @property
    def label_count(self) -> int:
        return sum(len(rec.marker_labels) for rec in self.recordings)

    def resolve_audio(self, recording: Recording) -> Path:
        root = self.audio_root if self.audio_root is not None else Path(".")
        return Path(root) / recording.audio_path


def _parse_record(obj: dict, line_no: int) -> Recording:
    try:
        labels = tuple(
            MarkerLabel(marker_id=str(entry["marker"]), verdict=str(entry["verdict"]))
            for entry in obj.get("labels", [])
        )
        grade = obj.get("grade")
        return Recording(
            id=str(obj["id"]),
            question_id=str(obj["question"]),
            audio_path=str(obj["audio"]),
            duration_s=float(obj["duration_s"]),
            sample_rate_hz=int(obj["sample_rate_hz"]),
            marker_labels=labels,
            collected_at=obj.get("collected_at"),
            grade=int(grade) if grade is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"line {line_no}: {exc}") from exc


def load_manifest(path: Path | str, audio_root: Optional[Path | str] = None) -> Corpus:
    """Load a line-delimited JSON manifest into a Corpus.

    Audio files are not opened here; existence is checked only when
    ``audio_root`` is given, so label-only analyses can run without the
    (large) audio tree present.

    Raises:
        FileNotFoundError: manifest missing, or a referenced audio file
            missing when ``audio_root`` is given.
        ManifestError: malformed line (with line number), duplicate or
            unknown ids, more than three labels per recording.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")

    recordings: list[Recording] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: malformed JSON: {exc}") from exc
            rec = _parse_record(obj, line_no)
            if rec.id in seen:
                raise ManifestError(f"line {line_no}: duplicate recording id {rec.id!r}")
            if rec.question_id not in STANDARD_QUESTIONS:
                raise ManifestError(f"line {line_no}: unknown question id {rec.question_id!r}")
            seen.add(rec.id)
            recordings.append(rec)

    corpus = Corpus(recordings=recordings, audio_root=Path(audio_root) if audio_root else None)
    if audio_root is not None:
        for rec in corpus.recordings:
            wav = corpus.resolve_audio(rec)
            if not wav.exists():
                raise FileNotFoundError(f"audio file missing for recording {rec.id!r}: {wav}")
    logger.info("Loaded %d recordings (%d labels) from %s", len(corpus), corpus.label_count, path)
    return corpus


def load_wav(path: Path | str) -> tuple[np.ndarray, int]:
    """Read a WAV file (PCM16 or float32) to float samples in [-1, 1]-ish range.

    Returns (samples, rate); samples shape is (n,) or (n, channels).
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioIngestError(f"undecodable audio file {path}: {exc}") from exc
    if data.size == 0:
        raise AudioIngestError(f"zero-length audio: {path}")
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / _PCM16_SCALE
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483647.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 127.0
    else:
        raise AudioIngestError(f"unsupported WAV sample format {data.dtype} in {path}")
    return samples, int(rate)


def canonicalize(samples: np.ndarray, sample_rate_hz: int) -> Waveform:
    """Downmix, resample to 16 kHz, cap at 10 s, and peak-normalize.

    Amplitudes are snapped to the PCM16 grid so the canonical waveform is
    a fixed point of write_canonical_wav followed by re-ingestion.
    """
    if samples.size == 0:
        raise AudioIngestError("zero-length audio")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise AudioIngestError(f"unsupported channel layout with ndim={samples.ndim}")
    samples = np.asarray(samples, dtype=np.float64)

    if sample_rate_hz != CANONICAL_RATE_HZ:
        ratio = Fraction(CANONICAL_RATE_HZ, sample_rate_hz)
        samples = resample_poly(samples, ratio.numerator, ratio.denominator)

    max_samples = int(MAX_DURATION_S * CANONICAL_RATE_HZ)
    if len(samples) > max_samples:
        samples = samples[:max_samples]

    peak = np.abs(samples).max(initial=0.0)
    if peak == 0.0:
        raise AudioIngestError("zero-energy audio")
    if peak != 1.0:
        samples = samples / peak
    samples = np.rint(samples * _PCM16_SCALE) / _PCM16_SCALE
    return Waveform(samples=samples.astype(np.float32))


def ingest_audio(recording: Recording, audio_root: Optional[Path | str] = None) -> Waveform:
    """Load a recording's audio file and return its canonical waveform."""
    root = Path(audio_root) if audio_root is not None else Path(".")
    samples, rate = load_wav(root / recording.audio_path)
    return canonicalize(samples, rate)


def write_canonical_wav(waveform: Waveform, path: Path | str) -> None:
    """Write a canonical waveform as 16 kHz mono PCM16."""
    pcm = np.clip(np.rint(waveform.samples.astype(np.float64) * _PCM16_SCALE), -32768, 32767)
    wavfile.write(Path(path), waveform.sample_rate_hz, pcm.astype(np.int16))


def compute_spectrogram(waveform: Waveform, window_ms: float, hop_ms: float) -> Spectrogram:
    """Short-time magnitude spectrum over a Hann window.

    Frame count is floor((n_samples - window) / hop) + 1; frequency bins
    span 0 to half the sample rate.
    """
    if hop_ms <= 0 or window_ms < hop_ms:
        raise ValueError("require window_ms >= hop_ms > 0")
    rate = waveform.sample_rate_hz
    window = int(round(window_ms * rate / 1000.0))
    hop = int(round(hop_ms * rate / 1000.0))
    n = len(waveform.samples)
    if n < window:
        raise ValueError(f"waveform shorter than one window ({n} < {window} samples)")

    n_frames = (n - window) // hop + 1
    taper = np.hanning(window)
    frames = np.lib.stride_tricks.sliding_window_view(waveform.samples, window)[::hop][:n_frames]
    mags = np.abs(np.fft.rfft(frames * taper, axis=1)).T  # (freq_bins, n_frames)
    freqs = np.fft.rfftfreq(window, d=1.0 / rate)
    times = (np.arange(n_frames) * hop + window / 2.0) / rate
    return Spectrogram(magnitudes=mags, freqs_hz=freqs, times_s=times)


def summarize_distribution(corpus: Corpus) -> tuple[dict[str, dict], list[str]]:
    """Count marking scenarios per question over fully-labeled recordings.

    Returns (counts, excluded_ids) where counts maps question id to a
    {ScenarioClass: count} dict and excluded_ids lists recordings that do
    not carry exactly three labels.
    """
    from .consensus import ScenarioClass, classify_scenario

    counts: dict[str, dict] = {
        qid: {scenario: 0 for scenario in ScenarioClass} for qid in corpus.questions
    }
    excluded: list[str] = []
    for rec in corpus.recordings:
        if not rec.fully_labeled:
            excluded.append(rec.id)
            continue
        counts[rec.question_id][classify_scenario(rec.marker_labels)] += 1
    if excluded:
        logger.warning("%d recordings lack exactly 3 labels; excluded from counts", len(excluded))
    return counts, excluded
