"""Figure rendering and machine-readable table exports.

Every figure writes its underlying numbers as a CSV next to the image,
and rendering is deterministic: identical inputs give identical bytes.
"""

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .asr_baseline import BaselineReport  # noqa: E402
from .consensus import (  # noqa: E402
    AgreementReport,
    ConsensusPolicy,
    ExpertJudgment,
    agreement_by_question,
    agreement_rate,
    apply_policy,
)
from .corpus import Corpus  # noqa: E402
from .harness import CostReport  # noqa: E402
from .metrics import (  # noqa: E402
    GroupStats,
    MetricSample,
    RankRow,
    box_stats,
    per_question_breakdown,
)

logger = logging.getLogger(__name__)

POLICY_DISPLAY = {
    ConsensusPolicy.ALL: "All data",
    ConsensusPolicy.CONSENSUS: "Consensus",
    ConsensusPolicy.CONSENSUS_PLUS_ONE_INCORRECT: "Consensus & one incorrect",
    ConsensusPolicy.CONSENSUS_PLUS_ONE_CORRECT: "Consensus & one correct",
}


class FigureKind(Enum):
    FPR_FNR_SCATTER = "fpr_fnr_scatter"
    DE_BOXPLOT_LIMITED = "de_boxplot_limited"
    PER_QUESTION_BOXPLOT = "per_question_boxplot"
    DISTRIBUTION_BARS = "distribution_bars"
    AGREEMENT_BARS = "agreement_bars"


@dataclass(frozen=True)
class FigureSpec:
    kind: FigureKind
    output_path: Path


def truncate_pct(fraction: float, decimals: int = 1) -> str:
    """Percentage truncated (not rounded) to the given decimals."""
    scale = 10**decimals
    value = int(fraction * 100 * scale) / scale
    return f"{value:.{decimals}f}"


def format_retention(count: int, total: Optional[int] = None) -> str:
    """Retention cell: '12,747 (85.1%)', or just the count for the full set."""
    if total is None or count == total:
        return f"{count:,}"
    return f"{count:,} ({truncate_pct(count / total)}%)"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _save_figure(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_scatter(
    aggregates: Mapping[tuple[str, int, int, int], GroupStats],
    out_path: Path | str,
    min_dot_area: float = 20.0,
    area_scale: float = 40_000.0,
) -> Path:
    """One dot per (model, config) at (FPR mean, FNR mean).

    Dot area grows with the pooled FPR/FNR standard deviation; each
    model's best-DE configuration is circled.
    """
    if not aggregates:
        raise ValueError("no aggregates to plot")
    out_path = Path(out_path)
    best_by_model: dict[str, tuple[str, int, int, int]] = {}
    for key, stats in aggregates.items():
        if stats.fpr_std is None or stats.fnr_std is None:
            raise ValueError(f"missing std for {key}")
        model = key[0]
        if model not in best_by_model or stats.de_mean > aggregates[best_by_model[model]].de_mean:
            best_by_model[model] = key
    flagged = set(best_by_model.values())

    fig, ax = plt.subplots(figsize=(7, 5))
    rows = []
    models = sorted({key[0] for key in aggregates})
    colors = plt.cm.tab10.colors
    for m_index, model in enumerate(models):
        xs, ys, areas = [], [], []
        for key in sorted(k for k in aggregates if k[0] == model):
            stats = aggregates[key]
            pooled = ((stats.fpr_std**2 + stats.fnr_std**2) / 2) ** 0.5
            area = min_dot_area + area_scale * pooled**2
            xs.append(stats.fpr_mean)
            ys.append(stats.fnr_mean)
            areas.append(area)
            rows.append(
                [key[0], key[1], key[2], key[3],
                 f"{stats.fpr_mean:.6f}", f"{stats.fnr_mean:.6f}",
                 f"{pooled:.6f}", str(key in flagged).lower()]
            )
        ax.scatter(xs, ys, s=areas, alpha=0.6, label=model,
                   color=colors[m_index % len(colors)])
    for key in sorted(flagged):
        stats = aggregates[key]
        ax.scatter([stats.fpr_mean], [stats.fnr_mean], s=160, facecolors="none",
                   edgecolors="black", linewidths=1.5)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("False negative rate")
    ax.legend()
    _write_csv(
        out_path.with_suffix(".csv"),
        ["model", "set", "correct", "incorrect", "fpr_mean", "fnr_mean", "pooled_std", "best_de"],
        rows,
    )
    return _save_figure(fig, out_path)


def render_limited_data_boxplot(
    samples: Sequence[MetricSample],
    out_path: Path | str,
    limited_sizes: frozenset[int] = frozenset({50, 100}),
) -> Path:
    """DE distribution per question-set size when both class counts are small."""
    out_path = Path(out_path)
    limited = [
        s for s in samples
        if s.n_correct in limited_sizes and s.n_incorrect in limited_sizes
    ]
    if not limited:
        raise ValueError("no samples inside the limited-data filter")
    by_set: dict[int, list[float]] = {}
    for s in limited:
        by_set.setdefault(s.set_size, []).append(s.de)

    fig, ax = plt.subplots(figsize=(5, 4))
    sizes = sorted(by_set)
    ax.boxplot([by_set[size] for size in sizes], tick_labels=[str(s) for s in sizes])
    ax.set_xlabel("Questions per model")
    ax.set_ylabel("Diagnostic efficiency")
    rows = []
    for size in sizes:
        stats = box_stats(by_set[size])
        rows.append([size, stats.n, f"{stats.q1:.6f}", f"{stats.median:.6f}",
                     f"{stats.q3:.6f}", f"{stats.whisker_lo:.6f}", f"{stats.whisker_hi:.6f}",
                     f"{stats.mean:.6f}"])
    _write_csv(
        out_path.with_suffix(".csv"),
        ["set_size", "n", "q1", "median", "q3", "whisker_lo", "whisker_hi", "mean"],
        rows,
    )
    return _save_figure(fig, out_path)


def render_per_question_boxplot(
    samples: Sequence[MetricSample],
    out_path: Path | str,
    top_configs: Optional[set[tuple[str, int, int, int]]] = None,
) -> Path:
    """DE distribution per question over the selected configurations."""
    out_path = Path(out_path)
    breakdown = per_question_breakdown(samples, top_configs)
    selected = samples if top_configs is None else [
        s for s in samples if (s.model_id, *s.config_key) in top_configs
    ]
    by_question: dict[str, list[float]] = {qid: [] for qid in breakdown}
    for s in selected:
        by_question[s.question_id].append(s.de)

    fig, ax = plt.subplots(figsize=(8, 4))
    questions = sorted(by_question)
    ax.boxplot([by_question[qid] for qid in questions], tick_labels=questions)
    ax.set_xlabel("Question")
    ax.set_ylabel("Diagnostic efficiency")
    rows = [
        [qid, breakdown[qid].n, f"{breakdown[qid].q1:.6f}", f"{breakdown[qid].median:.6f}",
         f"{breakdown[qid].q3:.6f}", f"{breakdown[qid].whisker_lo:.6f}",
         f"{breakdown[qid].whisker_hi:.6f}", f"{breakdown[qid].mean:.6f}"]
        for qid in questions
    ]
    _write_csv(
        out_path.with_suffix(".csv"),
        ["question", "n", "q1", "median", "q3", "whisker_lo", "whisker_hi", "mean"],
        rows,
    )
    return _save_figure(fig, out_path)


def render_distribution_bars(
    counts: Mapping[str, Mapping], out_path: Path | str
) -> Path:
    """Stacked scenario counts per question."""
    if not counts:
        raise ValueError("no counts to plot")
    out_path = Path(out_path)
    questions = sorted(counts)
    scenarios = list(next(iter(counts.values())).keys())
    fig, ax = plt.subplots(figsize=(8, 4))
    bottoms = [0] * len(questions)
    rows = []
    for scenario in scenarios:
        values = [counts[qid][scenario] for qid in questions]
        ax.bar(questions, values, bottom=bottoms, label=scenario.value)
        bottoms = [b + v for b, v in zip(bottoms, values)]
        rows.extend([qid, scenario.value, counts[qid][scenario]] for qid in questions)
    ax.set_xlabel("Question")
    ax.set_ylabel("Recordings")
    ax.legend(fontsize=8)
    _write_csv(out_path.with_suffix(".csv"), ["question", "scenario", "count"], rows)
    return _save_figure(fig, out_path)


def render_agreement_bars(
    per_question: Mapping[str, Mapping[ConsensusPolicy, Optional[AgreementReport]]],
    out_path: Path | str,
) -> Path:
    """Per-question agreement rate, one bar group per retention policy."""
    if not per_question:
        raise ValueError("no agreement data to plot")
    out_path = Path(out_path)
    questions = sorted(per_question)
    policies = list(ConsensusPolicy)
    width = 0.8 / len(policies)
    fig, ax = plt.subplots(figsize=(9, 4))
    rows = []
    for p_index, policy in enumerate(policies):
        xs, ys = [], []
        for q_index, qid in enumerate(questions):
            report = per_question[qid].get(policy)
            rate = report.rate if report else None
            rows.append(
                [qid, policy.value,
                 "" if rate is None else f"{100 * rate:.2f}",
                 0 if report is None else report.judged_retained]
            )
            if rate is not None:
                xs.append(q_index + p_index * width)
                ys.append(100 * rate)
        ax.bar(xs, ys, width=width, label=POLICY_DISPLAY[policy])
    ax.set_xticks([i + 1.5 * width for i in range(len(questions))])
    ax.set_xticklabels(questions)
    ax.set_ylabel("Agreement rate (%)")
    ax.legend(fontsize=8)
    _write_csv(
        out_path.with_suffix(".csv"),
        ["question", "policy", "agreement_pct", "judged_retained"],
        rows,
    )
    return _save_figure(fig, out_path)


def agreement_table_rows(
    corpus: Corpus, judgments: Sequence[ExpertJudgment]
) -> list[list[str]]:
    """Condition rows: agreement rate plus retained-recording counts."""
    total = sum(1 for _ in corpus.fully_labeled())
    rows = []
    for policy in ConsensusPolicy:
        retained = len(apply_policy(corpus, policy))
        report = agreement_rate(corpus, judgments, policy)
        rows.append(
            [
                POLICY_DISPLAY[policy],
                f"{100 * report.rate:.2f}%",
                format_retention(retained, total),
            ]
        )
    return rows


def export_tables(
    out_dir: Path | str,
    corpus: Optional[Corpus] = None,
    judgments: Optional[Sequence[ExpertJudgment]] = None,
    cost_reports: Optional[Mapping[str, CostReport]] = None,
    rank_rows: Optional[Sequence[RankRow]] = None,
    baseline: Optional[BaselineReport] = None,
) -> dict[str, Path]:
    """Write the agreement, compute-cost, top-configuration, and
    transcription-accuracy tables as CSV. Sections without data produce
    headers-only files so downstream layouts stay stable.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    agreement_rows = (
        agreement_table_rows(corpus, judgments)
        if corpus is not None and judgments
        else []
    )
    paths["agreement"] = _write_csv(
        out_dir / "agreement_rates.csv",
        ["condition", "agreement_rate", "recordings"],
        agreement_rows,
    )

    cost_rows = []
    if cost_reports:
        for model in sorted(cost_reports):
            report = cost_reports[model]
            cost_rows.append(
                [model, f"{report.mean_training_seconds:.2f}",
                 f"{report.mean_inference_seconds:.2f}", report.hardware]
            )
    paths["cost"] = _write_csv(
        out_dir / "compute_cost.csv",
        ["model", "training_time_s", "inference_time_s", "hardware"],
        cost_rows,
    )

    ranked = []
    if rank_rows:
        for row in rank_rows:
            stats = row.stats
            ranked.append(
                [row.model_id, row.set_size, row.n_correct, row.n_incorrect,
                 f"{100 * stats.de_mean:.2f}", f"{100 * stats.de_std:.2f}",
                 f"{100 * stats.fpr_mean:.2f}", f"{100 * stats.fpr_std:.2f}",
                 f"{100 * stats.fnr_mean:.2f}", f"{100 * stats.fnr_std:.2f}",
                 str(row.highlight_de).lower(), str(row.highlight_fpr).lower(),
                 str(row.highlight_fnr).lower()]
            )
    paths["ranking"] = _write_csv(
        out_dir / "top_configurations.csv",
        ["model", "set", "correct", "incorrect", "de_mean", "de_std",
         "fpr_mean", "fpr_std", "fnr_mean", "fnr_std",
         "highlight_de", "highlight_fpr", "highlight_fnr"],
        ranked,
    )

    baseline_rows = []
    if baseline is not None:
        for label in sorted(baseline.per_question):
            qa = baseline.per_question[label]
            baseline_rows.append(
                [label, qa.samples, qa.matches, f"{100 * qa.accuracy:.2f}"]
            )
        baseline_rows.append(
            ["overall", baseline.total_samples, baseline.total_matches,
             f"{100 * baseline.overall_accuracy:.2f}"]
        )
    paths["baseline"] = _write_csv(
        out_dir / "transcription_accuracy.csv",
        ["label", "samples", "correct", "accuracy_pct"],
        baseline_rows,
    )
    logger.info("Exported %d tables to %s", len(paths), out_dir)
    return paths


def live_agreement_tables(
    corpus: Corpus, judgments: Sequence[ExpertJudgment]
) -> dict:
    """Overall and per-question agreement for every policy; null cells where
    a denominator is empty. Shared by the CLI report and the review service."""
    overall = {}
    for policy in ConsensusPolicy:
        try:
            report = agreement_rate(corpus, judgments, policy)
            overall[policy.value] = {
                "rate": report.rate,
                "agreements": report.agreements,
                "judged_retained": report.judged_retained,
            }
        except ValueError:
            overall[policy.value] = None
    per_question = {}
    for policy in ConsensusPolicy:
        reports = agreement_by_question(corpus, judgments, policy)
        for qid, report in reports.items():
            cell = None
            if report is not None:
                cell = {
                    "rate": report.rate,
                    "agreements": report.agreements,
                    "judged_retained": report.judged_retained,
                }
            per_question.setdefault(qid, {})[policy.value] = cell
    return {"overall": overall, "per_question": per_question}
