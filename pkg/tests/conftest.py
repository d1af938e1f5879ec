"""Shared fixtures: synthetic corpora, label builders, and WAV helpers."""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from egra.consensus import ScenarioClass
from egra.corpus import CORRECT, INCORRECT, Corpus, MarkerLabel, Recording, STANDARD_QUESTIONS

# verdict patterns per scenario, one verdict per marker
SCENARIO_VERDICTS = {
    ScenarioClass.ALL_CORRECT: (CORRECT, CORRECT, CORRECT),
    ScenarioClass.MOSTLY_CORRECT: (CORRECT, INCORRECT, CORRECT),
    ScenarioClass.MOSTLY_INCORRECT: (INCORRECT, CORRECT, INCORRECT),
    ScenarioClass.ALL_INCORRECT: (INCORRECT, INCORRECT, INCORRECT),
}


def labels(*verdicts: str) -> tuple[MarkerLabel, ...]:
    return tuple(MarkerLabel(marker_id=f"m{i+1}", verdict=v) for i, v in enumerate(verdicts))


def scenario_labels(scenario: ScenarioClass) -> tuple[MarkerLabel, ...]:
    return labels(*SCENARIO_VERDICTS[scenario])


def make_recording(
    rid: str,
    question_id: str = "hayi",
    marker_labels: tuple[MarkerLabel, ...] = (),
    duration_s: float = 4.0,
) -> Recording:
    return Recording(
        id=rid,
        question_id=question_id,
        audio_path=f"audio/{rid}.wav",
        duration_s=duration_s,
        sample_rate_hz=16000,
        marker_labels=marker_labels,
    )


def build_corpus(per_question_scenarios: dict[str, dict[ScenarioClass, int]]) -> Corpus:
    """Corpus with the given number of recordings per (question, scenario)."""
    recordings = []
    for qid, scenario_counts in per_question_scenarios.items():
        for scenario, count in scenario_counts.items():
            for i in range(count):
                rid = f"{qid}-{scenario.value}-{i:05d}"
                recordings.append(make_recording(rid, qid, scenario_labels(scenario)))
    return Corpus(recordings=recordings)


def uniform_corpus(per_scenario: int) -> Corpus:
    """Every question stocked with the same count in all four scenarios."""
    return build_corpus(
        {
            qid: {scenario: per_scenario for scenario in ScenarioClass}
            for qid in STANDARD_QUESTIONS
        }
    )


def write_wav(path: Path, samples: np.ndarray, rate: int, dtype: str = "int16") -> None:
    if dtype == "int16":
        data = np.clip(np.rint(samples * 32767.0), -32768, 32767).astype(np.int16)
    elif dtype == "float32":
        data = samples.astype(np.float32)
    else:
        raise ValueError(dtype)
    wavfile.write(path, rate, data)


def tone(freq_hz: float, duration_s: float, rate: int, amplitude: float = 0.8) -> np.ndarray:
    t = np.arange(int(duration_s * rate)) / rate
    return (amplitude * np.sin(2 * np.pi * freq_hz * t)).astype(np.float64)


def write_manifest(path: Path, records: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for obj in records:
            fh.write(json.dumps(obj) + "\n")


def manifest_record(
    rid: str,
    question: str = "hayi",
    verdicts: tuple[str, ...] = (CORRECT, CORRECT, CORRECT),
    audio: str | None = None,
    **extra,
) -> dict:
    obj = {
        "id": rid,
        "question": question,
        "audio": audio or f"audio/{rid}.wav",
        "duration_s": 4.0,
        "sample_rate_hz": 16000,
        "labels": [{"marker": f"m{i+1}", "verdict": v} for i, v in enumerate(verdicts)],
    }
    obj.update(extra)
    return obj


@pytest.fixture
def stocked_corpus() -> Corpus:
    return uniform_corpus(per_scenario=12)


def noisy_tone_waveform(freq_hz: float, rng: np.random.Generator, duration_s: float = 1.0):
    """Tone plus noise, canonicalized; used for separable two-class tasks."""
    from egra.corpus import CANONICAL_RATE_HZ, canonicalize

    t = np.arange(int(duration_s * CANONICAL_RATE_HZ)) / CANONICAL_RATE_HZ
    phase = rng.uniform(0, 2 * np.pi)
    samples = 0.7 * np.sin(2 * np.pi * freq_hz * t + phase)
    samples += rng.normal(0, 0.25, size=samples.shape)
    return canonicalize(samples, CANONICAL_RATE_HZ)


def separable_task(n_train: int, n_test: int, seed: int = 0):
    """Two distinct tones mapped to (d, correct) / (d, incorrect).

    Returns (TrainingSet, test_examples) with n_train / n_test waveforms
    per class.
    """
    from egra.corpus import CORRECT as POS, INCORRECT as NEG
    from egra.harness import TrainingExample, TrainingSet

    rng = np.random.default_rng(seed)
    train, test = [], []
    for verdict, freq in ((POS, 440.0), (NEG, 1320.0)):
        for _ in range(n_train):
            train.append(TrainingExample(noisy_tone_waveform(freq, rng), ("d", verdict)))
        for _ in range(n_test):
            test.append(TrainingExample(noisy_tone_waveform(freq, rng), ("d", verdict)))
    return TrainingSet(question_set=("d",), examples=tuple(train)), test
