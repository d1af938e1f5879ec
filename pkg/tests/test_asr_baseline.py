"""Transcript normalization and exact-match accuracy."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from egra.asr_baseline import (
    ReplayTranscriber,
    TranscriptRecord,
    exact_match_accuracy,
    normalize_transcript,
    run_baseline,
)
from egra.consensus import ScenarioClass
from egra.corpus import Corpus

from .conftest import build_corpus


class TestNormalizeTranscript:
    def test_strips_trailing_punctuation_and_case(self):
        assert normalize_transcript("Ewe.") == "ewe"

    def test_strips_edge_whitespace(self):
        assert normalize_transcript("  hayi  ") == "hayi"

    def test_empty_string(self):
        assert normalize_transcript("") == ""

    def test_collapses_internal_whitespace(self):
        assert normalize_transcript("molo   molo") == "molo molo"

    @given(st.text(max_size=40))
    def test_idempotent(self, text):
        once = normalize_transcript(text)
        assert normalize_transcript(once) == once


class TestExactMatchAccuracy:
    def test_all_matching(self):
        records = [TranscriptRecord(f"r{i}", "ewe", "Ewe!") for i in range(5)]
        report = exact_match_accuracy(records)
        assert report.overall_accuracy == 1.0
        assert report.per_question["ewe"].accuracy == 1.0

    def test_seven_record_hand_count(self):
        records = [
            TranscriptRecord("r0", "ewe", "ewe"),
            TranscriptRecord("r1", "ewe", "ewee"),
            TranscriptRecord("r2", "ewe", " EWE "),
            TranscriptRecord("r3", "hayi", "hayi"),
            TranscriptRecord("r4", "hayi", ""),
            TranscriptRecord("r5", "molo", "bolo"),
            TranscriptRecord("r6", "molo", "molo."),
        ]
        report = exact_match_accuracy(records)
        assert report.per_question["ewe"].matches == 2
        assert report.per_question["hayi"].matches == 1
        assert report.per_question["molo"].matches == 1
        assert report.total_samples == 7
        assert report.overall_accuracy == pytest.approx(4 / 7)

    def test_published_ewe_row(self):
        records = [
            TranscriptRecord(f"e{i}", "ewe", "ewe" if i < 282 else "x") for i in range(689)
        ]
        report = exact_match_accuracy(records)
        assert round(100 * report.per_question["ewe"].accuracy, 2) == 40.93

    def test_empty_record_list(self):
        with pytest.raises(ValueError):
            exact_match_accuracy([])

    def test_unknown_expected_text_rejected(self):
        with pytest.raises(ValueError):
            TranscriptRecord("r0", "bonjour", "bonjour")

    @given(
        st.lists(
            st.tuples(st.sampled_from(["ewe", "hayi", "d"]), st.booleans()),
            min_size=1,
            max_size=60,
        )
    )
    def test_overall_is_sample_weighted_mean(self, spec):
        records = [
            TranscriptRecord(f"r{i}", expected, expected if match else "zzz")
            for i, (expected, match) in enumerate(spec)
        ]
        report = exact_match_accuracy(records)
        weighted = sum(
            qa.accuracy * qa.samples for qa in report.per_question.values()
        ) / report.total_samples
        assert report.overall_accuracy == pytest.approx(weighted)


def correct_only_corpus(per_question: dict[str, int]) -> Corpus:
    return build_corpus(
        {qid: {ScenarioClass.ALL_CORRECT: n} for qid, n in per_question.items()}
    )


class TestRunBaseline:
    def test_replay_covers_consensus_correct_recordings(self, tmp_path):
        corpus = build_corpus(
            {
                "ewe": {ScenarioClass.ALL_CORRECT: 3, ScenarioClass.ALL_INCORRECT: 2,
                        ScenarioClass.MOSTLY_CORRECT: 1},
                "d": {ScenarioClass.ALL_CORRECT: 2},
            }
        )
        replay = tmp_path / "transcripts.jsonl"
        with replay.open("w") as fh:
            for rec in corpus.recordings:
                fh.write(json.dumps({"recording_id": rec.id, "transcript": "ewe"}) + "\n")
        records = run_baseline(corpus, ReplayTranscriber(replay))
        # only the 3 + 2 consensus-correct recordings are transcribed
        assert len(records) == 5
        assert {r.expected_text for r in records} == {"ewe", "d"}

    def test_empty_corpus(self):
        assert run_baseline(Corpus(recordings=[]), lambda rec: "x") == []

    def test_transcriber_failure_contained(self):
        corpus = correct_only_corpus({"ewe": 3})
        bad_id = corpus.recordings[1].id

        def flaky(recording):
            if recording.id == bad_id:
                raise RuntimeError("decoder crashed")
            return "ewe"

        records = run_baseline(corpus, flaky)
        assert len(records) == 3
        by_id = {r.recording_id: r for r in records}
        assert by_id[bad_id].transcript == ""
        report = exact_match_accuracy(records)
        assert report.per_question["ewe"].matches == 2

    def test_question_filter(self):
        corpus = correct_only_corpus({"ewe": 2, "d": 2})
        records = run_baseline(corpus, lambda rec: "x", question_filter={"d"})
        assert {r.expected_text for r in records} == {"d"}
