"""Figure rendering determinism and golden-file table exports."""

import csv
import os
from pathlib import Path

import pytest

from egra.consensus import ConsensusPolicy
from egra.harness import CostReport
from egra.asr_baseline import TranscriptRecord, exact_match_accuracy
from egra.metrics import GroupStats, MetricSample, aggregate, rank_top_k
from egra.report import (
    agreement_table_rows,
    export_tables,
    format_retention,
    live_agreement_tables,
    render_agreement_bars,
    render_distribution_bars,
    render_limited_data_boxplot,
    render_per_question_boxplot,
    render_scatter,
    truncate_pct,
)
from egra.corpus import summarize_distribution

from .conftest import uniform_corpus
from .test_consensus import paper_shaped_judgments
from egra.consensus import sample_validation_set

GOLDEN_DIR = Path(__file__).parent / "golden"
UPDATE = os.environ.get("EGRA_UPDATE_GOLDENS") == "1"


def fixture_samples() -> list[MetricSample]:
    """Deterministic metric samples: 3 models x 6 configs x 50 samples."""
    questions = ["d", "v", "n", "ewe", "hayi", "hl", "inja", "kude", "molo", "ng"]
    grid = [(1, 50, 50), (1, 100, 100), (1, 200, 200), (1, 300, 300), (3, 100, 50), (5, 300, 100)]
    samples = []
    for m_index, model in enumerate(["modelA", "modelB", "modelC"]):
        for c_index, config in enumerate(grid):
            base = 0.94 - 0.03 * c_index - 0.01 * m_index
            for i in range(50):
                wiggle = ((i * 7 + c_index * 3 + m_index) % 11 - 5) * 0.004
                samples.append(
                    MetricSample(
                        question_id=questions[i % 10], model_id=model,
                        set_size=config[0], n_correct=config[1], n_incorrect=config[2],
                        replicate=i // 10,
                        de=base + wiggle,
                        fpr=0.05 + 0.01 * c_index - wiggle / 2,
                        fnr=0.04 + 0.008 * c_index + wiggle / 3,
                    )
                )
    return samples


def compare_to_golden(path: Path, name: str) -> None:
    golden = GOLDEN_DIR / name
    if UPDATE:
        golden.parent.mkdir(exist_ok=True)
        golden.write_bytes(path.read_bytes())
    assert golden.exists(), f"golden file {name} missing; run with EGRA_UPDATE_GOLDENS=1"
    assert path.read_bytes() == golden.read_bytes(), f"{name} drifted from golden"


class TestFormatting:
    def test_truncation_not_rounding(self):
        assert truncate_pct(0.95084) == "95.0"
        assert truncate_pct(0.90061) == "90.0"
        assert truncate_pct(0.85145) == "85.1"

    def test_retention_cell(self):
        assert format_retention(12747, 14971) == "12,747 (85.1%)"
        assert format_retention(14971, 14971) == "14,971"


class TestRenderScatter:
    def test_one_dot_per_config(self, tmp_path):
        samples = fixture_samples()
        aggregates = aggregate(samples)
        out = render_scatter(aggregates, tmp_path / "scatter.png")
        assert out.exists()
        with (tmp_path / "scatter.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 18  # 3 models x 6 configs

    def test_best_de_flags_match_argmax(self, tmp_path):
        samples = fixture_samples()
        aggregates = aggregate(samples)
        render_scatter(aggregates, tmp_path / "scatter.png")
        with (tmp_path / "scatter.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        flagged = {
            (r["model"], int(r["set"]), int(r["correct"]), int(r["incorrect"]))
            for r in rows if r["best_de"] == "true"
        }
        expected = set()
        for model in {key[0] for key in aggregates}:
            best = max(
                (key for key in aggregates if key[0] == model),
                key=lambda key: aggregates[key].de_mean,
            )
            expected.add(best)
        assert flagged == expected

    def test_single_config_single_dot(self, tmp_path):
        stats = GroupStats(n=2, de_mean=0.9, de_std=0.01,
                           fpr_mean=0.05, fpr_std=0.01, fnr_mean=0.06, fnr_std=0.02)
        render_scatter({("m", 1, 50, 50): stats}, tmp_path / "one.png")
        with (tmp_path / "one.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1

    def test_zero_std_rows_get_zero_pooled_spread(self, tmp_path):
        stats = GroupStats(n=2, de_mean=0.9, de_std=0.0,
                           fpr_mean=0.05, fpr_std=0.0, fnr_mean=0.06, fnr_std=0.0)
        render_scatter({("m", 1, 50, 50): stats}, tmp_path / "zero.png")
        with (tmp_path / "zero.csv").open() as fh:
            (row,) = list(csv.DictReader(fh))
        assert float(row["pooled_std"]) == 0.0

    def test_deterministic_bytes(self, tmp_path):
        aggregates = aggregate(fixture_samples())
        a = render_scatter(aggregates, tmp_path / "a.png")
        b = render_scatter(aggregates, tmp_path / "b.png")
        assert a.read_bytes() == b.read_bytes()

    def test_empty_aggregates(self, tmp_path):
        with pytest.raises(ValueError):
            render_scatter({}, tmp_path / "x.png")


class TestRenderBoxplots:
    def test_limited_data_filter_and_oracle(self, tmp_path):
        samples = fixture_samples()
        out = render_limited_data_boxplot(samples, tmp_path / "limited.png")
        assert out.exists()
        with (tmp_path / "limited.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        # configs with both counts in {50, 100}: set sizes 1 and 3 in the fixture
        assert [r["set_size"] for r in rows] == ["1", "3"]
        filtered = [
            s.de for s in samples
            if s.set_size == 1 and s.n_correct in (50, 100) and s.n_incorrect in (50, 100)
        ]
        ordered = sorted(filtered)
        mid = (ordered[len(ordered) // 2 - 1] + ordered[len(ordered) // 2]) / 2
        assert float(rows[0]["median"]) == pytest.approx(mid)

    def test_identical_values_degenerate_box(self, tmp_path):
        samples = [
            MetricSample(question_id="d", model_id="m", set_size=1, n_correct=50,
                         n_incorrect=50, replicate=i, de=0.8, fpr=0.1, fnr=0.1)
            for i in range(5)
        ]
        render_limited_data_boxplot(samples, tmp_path / "flat.png")
        with (tmp_path / "flat.csv").open() as fh:
            (row,) = list(csv.DictReader(fh))
        assert row["q1"] == row["median"] == row["q3"]

    def test_empty_filter_is_an_error(self, tmp_path):
        samples = [
            MetricSample(question_id="d", model_id="m", set_size=1, n_correct=300,
                         n_incorrect=300, replicate=0, de=0.8, fpr=0.1, fnr=0.1)
        ]
        with pytest.raises(ValueError, match="limited-data"):
            render_limited_data_boxplot(samples, tmp_path / "none.png")

    def test_per_question_boxplot(self, tmp_path):
        samples = fixture_samples()
        rows_by_model = rank_top_k(samples, k=3)
        top = {(r.model_id, r.set_size, r.n_correct, r.n_incorrect) for r in rows_by_model}
        out = render_per_question_boxplot(samples, tmp_path / "per_q.png", top_configs=top)
        assert out.exists()
        with (tmp_path / "per_q.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 10


class TestRenderCorpusFigures:
    def test_distribution_bars(self, tmp_path):
        corpus = uniform_corpus(per_scenario=3)
        counts, _ = summarize_distribution(corpus)
        out = render_distribution_bars(counts, tmp_path / "dist.png")
        assert out.exists()
        with (tmp_path / "dist.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 40
        assert all(r["count"] == "3" for r in rows)

    def test_agreement_bars_with_null_cells(self, tmp_path):
        corpus = uniform_corpus(per_scenario=12)
        ids = sample_validation_set(corpus, seed=1)
        judgments = paper_shaped_judgments(corpus, ids)
        tables = live_agreement_tables(corpus, judgments)
        per_question = {
            qid: {ConsensusPolicy(policy): None if cell is None else _report_from(cell, policy)
                  for policy, cell in cells.items()}
            for qid, cells in tables["per_question"].items()
        }
        out = render_agreement_bars(per_question, tmp_path / "agree.png")
        assert out.exists()


def _report_from(cell, policy):
    from egra.consensus import AgreementReport

    return AgreementReport(
        policy=ConsensusPolicy(policy),
        agreements=cell["agreements"],
        judged_retained=cell["judged_retained"],
    )


def fixture_baseline():
    records = (
        [TranscriptRecord(f"e{i}", "ewe", "ewe" if i < 2 else "x") for i in range(3)]
        + [TranscriptRecord(f"h{i}", "hayi", "hayi" if i < 1 else "x") for i in range(2)]
    )
    return exact_match_accuracy(records)


def fixture_cost():
    return {
        "modelA": CostReport(
            training_seconds=(343.0, 343.2), inference_seconds=(0.44, 0.44),
            hardware="test-machine",
        ),
        "modelB": CostReport(
            training_seconds=(1332.0, 1332.4), inference_seconds=(1.70, 1.70),
            hardware="test-machine",
        ),
    }


class TestExportTables:
    def test_empty_results_give_headers_only(self, tmp_path):
        paths = export_tables(tmp_path)
        for path in paths.values():
            lines = path.read_text().splitlines()
            assert len(lines) == 1

    def test_golden_files(self, tmp_path):
        corpus = uniform_corpus(per_scenario=12)
        ids = sample_validation_set(corpus, seed=1)
        judgments = paper_shaped_judgments(corpus, ids)
        paths = export_tables(
            tmp_path,
            corpus=corpus,
            judgments=judgments,
            cost_reports=fixture_cost(),
            rank_rows=rank_top_k(fixture_samples(), k=5),
            baseline=fixture_baseline(),
        )
        compare_to_golden(paths["agreement"], "agreement_rates.csv")
        compare_to_golden(paths["cost"], "compute_cost.csv")
        compare_to_golden(paths["ranking"], "top_configurations.csv")
        compare_to_golden(paths["baseline"], "transcription_accuracy.csv")

    def test_agreement_condition_rows(self):
        corpus = uniform_corpus(per_scenario=12)
        ids = sample_validation_set(corpus, seed=1)
        judgments = paper_shaped_judgments(corpus, ids)
        rows = agreement_table_rows(corpus, judgments)
        by_condition = {row[0]: row for row in rows}
        assert by_condition["Consensus"][1] == "85.00%"
        assert by_condition["Consensus & one incorrect"][1] == "80.00%"
        assert by_condition["Consensus & one correct"][1] == "75.00%"
        assert by_condition["All data"][2] == "480"
        assert by_condition["Consensus"][2] == "240 (50.0%)"
