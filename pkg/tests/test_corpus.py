"""Corpus loading, ingestion, spectrogram, and distribution tests."""

import numpy as np
import pytest

from egra.consensus import ScenarioClass
from egra.corpus import (
    CANONICAL_RATE_HZ,
    CORRECT,
    INCORRECT,
    AudioIngestError,
    Corpus,
    ManifestError,
    Recording,
    Waveform,
    canonicalize,
    compute_spectrogram,
    ingest_audio,
    load_manifest,
    load_wav,
    summarize_distribution,
    write_canonical_wav,
)

from .conftest import (
    build_corpus,
    labels,
    make_recording,
    manifest_record,
    tone,
    write_manifest,
    write_wav,
)


class TestLoadManifest:
    def test_three_line_fixture(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, [manifest_record(f"r{i}") for i in range(3)])
        corpus = load_manifest(path)
        assert len(corpus) == 3
        assert corpus.label_count == 9

    def test_duplicate_id_names_offender(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, [manifest_record("dup"), manifest_record("dup")])
        with pytest.raises(ManifestError, match="dup"):
            load_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path / "nope.jsonl")

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text(
            '{"id": "a", "question": "hayi", "audio": "a.wav", "duration_s": 1, "sample_rate_hz": 16000}\nnot json\n'
        )
        with pytest.raises(ManifestError, match="line 2"):
            load_manifest(path)

    def test_unknown_question_id(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, [manifest_record("r0", question="zzz")])
        with pytest.raises(ManifestError, match="zzz"):
            load_manifest(path)

    def test_more_than_three_labels(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        rec = manifest_record("r0")
        rec["labels"].append({"marker": "m4", "verdict": CORRECT})
        write_manifest(path, [rec])
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_duplicate_marker_rejected(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        rec = manifest_record("r0")
        rec["labels"][1]["marker"] = "m1"
        write_manifest(path, [rec])
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_optional_fields_preserved(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        write_manifest(
            path,
            [manifest_record("r0", collected_at="2024-05-02T10:00:00Z", grade=2)],
        )
        rec = load_manifest(path).by_id("r0")
        assert rec.collected_at == "2024-05-02T10:00:00Z"
        assert rec.grade == 2

    def test_audio_existence_checked_only_with_root(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, [manifest_record("r0")])
        load_manifest(path)  # no audio root: fine
        with pytest.raises(FileNotFoundError, match="r0"):
            load_manifest(path, audio_root=tmp_path)

    def test_scaled_release_shape(self, tmp_path):
        # 20 recordings x 3 labels each: counts add up like the full release does
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, [manifest_record(f"r{i}") for i in range(20)])
        corpus = load_manifest(path)
        assert (len(corpus), corpus.label_count) == (20, 60)


class TestIngestAudio:
    def test_stereo_44k_resamples_to_64000_samples(self, tmp_path):
        rate = 44100
        mono = tone(440.0, 4.0, rate)
        stereo = np.stack([mono, mono], axis=1)
        wav = tmp_path / "stereo.wav"
        write_wav(wav, stereo, rate)
        rec = Recording(
            id="stereo", question_id="hayi", audio_path="stereo.wav",
            duration_s=4.0, sample_rate_hz=rate,
        )
        waveform = ingest_audio(rec, audio_root=tmp_path)
        assert abs(len(waveform) - 64_000) <= 1
        assert waveform.sample_rate_hz == CANONICAL_RATE_HZ
        assert np.abs(waveform.samples).max() == pytest.approx(1.0)

    def test_silent_file_rejected(self, tmp_path):
        wav = tmp_path / "silent.wav"
        write_wav(wav, np.zeros(16000), 16000)
        with pytest.raises(AudioIngestError, match="zero-energy"):
            samples, rate = load_wav(wav)
            canonicalize(samples, rate)

    def test_zero_length_rejected(self):
        with pytest.raises(AudioIngestError, match="zero-length"):
            canonicalize(np.array([]), 16000)

    def test_twelve_second_tone_truncated_to_ten(self):
        samples = tone(500.0, 12.0, CANONICAL_RATE_HZ)
        waveform = canonicalize(samples, CANONICAL_RATE_HZ)
        assert len(waveform) == 160_000

    def test_idempotent_on_canonical_waveform(self):
        waveform = canonicalize(tone(300.0, 2.0, CANONICAL_RATE_HZ), CANONICAL_RATE_HZ)
        again = canonicalize(waveform.samples.copy(), waveform.sample_rate_hz)
        np.testing.assert_array_equal(waveform.samples, again.samples)

    def test_wav_round_trip_is_sample_exact(self, tmp_path):
        waveform = canonicalize(tone(700.0, 1.5, CANONICAL_RATE_HZ), CANONICAL_RATE_HZ)
        out = tmp_path / "canonical.wav"
        write_canonical_wav(waveform, out)
        samples, rate = load_wav(out)
        reloaded = canonicalize(samples, rate)
        np.testing.assert_array_equal(waveform.samples, reloaded.samples)
        # and writing the reloaded waveform again produces identical bytes
        out2 = tmp_path / "canonical2.wav"
        write_canonical_wav(reloaded, out2)
        assert out.read_bytes() == out2.read_bytes()

    def test_float32_wav_supported(self, tmp_path):
        wav = tmp_path / "f32.wav"
        write_wav(wav, tone(440.0, 1.0, 16000, amplitude=0.5), 16000, dtype="float32")
        samples, rate = load_wav(wav)
        waveform = canonicalize(samples, rate)
        assert np.abs(waveform.samples).max() == pytest.approx(1.0)

    def test_undecodable_file(self, tmp_path):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"this is not audio")
        with pytest.raises(AudioIngestError, match="undecodable"):
            load_wav(bad)


class TestSpectrogram:
    def test_pure_tone_dominates_its_bin(self):
        waveform = canonicalize(tone(1000.0, 2.0, CANONICAL_RATE_HZ), CANONICAL_RATE_HZ)
        spec = compute_spectrogram(waveform, window_ms=25, hop_ms=10)
        row_energy = spec.magnitudes.mean(axis=1)
        peak_bin = int(row_energy.argmax())
        assert spec.freqs_hz[peak_bin] == pytest.approx(1000.0, abs=spec.freqs_hz[1])

    def test_white_noise_spreads_energy(self):
        rng = np.random.default_rng(7)
        samples = rng.uniform(-0.9, 0.9, size=2 * CANONICAL_RATE_HZ)
        waveform = canonicalize(samples, CANONICAL_RATE_HZ)
        spec = compute_spectrogram(waveform, window_ms=25, hop_ms=10)
        row_energy = spec.magnitudes.mean(axis=1)
        assert row_energy.max() <= 10 * np.median(row_energy)

    def test_frame_count_formula_for_eight_seconds(self):
        waveform = canonicalize(tone(440.0, 8.0, CANONICAL_RATE_HZ), CANONICAL_RATE_HZ)
        spec = compute_spectrogram(waveform, window_ms=25, hop_ms=10)
        n, window, hop = 8 * CANONICAL_RATE_HZ, 400, 160
        expected = (n - window) // hop + 1
        assert spec.magnitudes.shape[1] == expected == 798

    def test_frequency_axis_covers_0_to_8k(self):
        waveform = canonicalize(tone(440.0, 1.0, CANONICAL_RATE_HZ), CANONICAL_RATE_HZ)
        spec = compute_spectrogram(waveform, window_ms=25, hop_ms=10)
        assert spec.freqs_hz[0] == 0.0
        assert spec.freqs_hz[-1] == pytest.approx(8000.0)

    def test_too_short_waveform(self):
        waveform = Waveform(samples=np.ones(100, dtype=np.float32) * 0.5)
        with pytest.raises(ValueError, match="shorter than one window"):
            compute_spectrogram(waveform, window_ms=25, hop_ms=10)

    def test_window_hop_precondition(self):
        waveform = Waveform(samples=np.ones(16000, dtype=np.float32) * 0.5)
        with pytest.raises(ValueError):
            compute_spectrogram(waveform, window_ms=5, hop_ms=10)


class TestSummarizeDistribution:
    def test_single_unanimous_recording(self):
        corpus = Corpus(
            recordings=[make_recording("a", "n", labels(CORRECT, CORRECT, CORRECT))]
        )
        counts, excluded = summarize_distribution(corpus)
        assert counts["n"][ScenarioClass.ALL_CORRECT] == 1
        assert excluded == []

    def test_six_recording_hand_enumeration(self):
        corpus = build_corpus(
            {
                "hayi": {
                    ScenarioClass.ALL_CORRECT: 2,
                    ScenarioClass.MOSTLY_CORRECT: 1,
                    ScenarioClass.MOSTLY_INCORRECT: 1,
                    ScenarioClass.ALL_INCORRECT: 2,
                }
            }
        )
        counts, excluded = summarize_distribution(corpus)
        assert counts["hayi"] == {
            ScenarioClass.ALL_CORRECT: 2,
            ScenarioClass.MOSTLY_CORRECT: 1,
            ScenarioClass.MOSTLY_INCORRECT: 1,
            ScenarioClass.ALL_INCORRECT: 2,
        }
        assert not excluded

    def test_partially_labeled_recordings_excluded(self):
        corpus = Corpus(
            recordings=[
                make_recording("full", "d", labels(CORRECT, CORRECT, INCORRECT)),
                make_recording("partial", "d", labels(CORRECT,)),
            ]
        )
        counts, excluded = summarize_distribution(corpus)
        assert excluded == ["partial"]
        assert sum(counts["d"].values()) == 1

    def test_counts_partition_fully_labeled_recordings(self, stocked_corpus):
        counts, excluded = summarize_distribution(stocked_corpus)
        for qid in stocked_corpus.questions:
            total = sum(
                1 for r in stocked_corpus.fully_labeled() if r.question_id == qid
            )
            assert sum(counts[qid].values()) == total
        assert not excluded
