"""Confusion-matrix quantities, aggregation, and configuration ranking.

Labels are (question_id, verdict) pairs. For a given question the
positive event is the class (question, correct); everything else, wrong
question included, counts as negative.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .corpus import CORRECT

logger = logging.getLogger(__name__)

Label = tuple[str, str]  # (question_id, verdict)


class UndefinedRateError(ZeroDivisionError):
    """A rate's denominator is zero; returning 0 would corrupt aggregates."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricSample:
    """Rates for one (question, run) evaluation."""

    question_id: str
    model_id: str
    set_size: int
    n_correct: int
    n_incorrect: int
    replicate: int
    de: float
    fpr: float
    fnr: float

    @property
    def config_key(self) -> tuple[int, int, int]:
        return (self.set_size, self.n_correct, self.n_incorrect)


def confusion(
    predictions: Mapping[str, Label],
    ground_truth: Mapping[str, Label],
    question_id: str,
) -> ConfusionMatrix:
    """Tally the four outcomes over one question's test split.

    "Corresponds to the question" means the label is exactly
    (question_id, correct); predictions and ground truth must cover the
    same recording ids.
    """
    if set(predictions) != set(ground_truth):
        missing = set(ground_truth) ^ set(predictions)
        raise ValueError(f"prediction/ground-truth id sets differ on {len(missing)} ids")
    positive: Label = (question_id, CORRECT)
    tp = tn = fp = fn = 0
    for rid, truth in ground_truth.items():
        truth_pos = truth == positive
        pred_pos = predictions[rid] == positive
        if truth_pos and pred_pos:
            tp += 1
        elif truth_pos:
            fn += 1
        elif pred_pos:
            fp += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def rates(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(diagnostic efficiency, false positive rate, false negative rate)."""
    if cm.total == 0:
        raise UndefinedRateError("empty confusion matrix")
    if cm.fp + cm.tn == 0:
        raise UndefinedRateError("FPR undefined: fp + tn == 0")
    if cm.tp + cm.fn == 0:
        raise UndefinedRateError("FNR undefined: tp + fn == 0")
    de = (cm.tp + cm.tn) / cm.total
    fpr = cm.fp / (cm.fp + cm.tn)
    fnr = cm.fn / (cm.tp + cm.fn)
    return de, fpr, fnr


@dataclass(frozen=True)
class GroupStats:
    """Mean and population standard deviation of each rate within a group."""

    n: int
    de_mean: float
    de_std: float
    fpr_mean: float
    fpr_std: float
    fnr_mean: float
    fnr_std: float


def aggregate(
    samples: Sequence[MetricSample],
    group_by: Callable[[MetricSample], Hashable] = lambda s: (s.model_id, *s.config_key),
) -> dict[Hashable, GroupStats]:
    """Group samples and compute mean/std (population) per group."""
    if not samples:
        raise ValueError("no samples to aggregate")
    groups: dict[Hashable, list[MetricSample]] = defaultdict(list)
    for sample in samples:
        groups[group_by(sample)].append(sample)
    out: dict[Hashable, GroupStats] = {}
    for key, members in groups.items():
        de = np.array([m.de for m in members])
        fpr = np.array([m.fpr for m in members])
        fnr = np.array([m.fnr for m in members])
        out[key] = GroupStats(
            n=len(members),
            de_mean=float(de.mean()), de_std=float(de.std()),
            fpr_mean=float(fpr.mean()), fpr_std=float(fpr.std()),
            fnr_mean=float(fnr.mean()), fnr_std=float(fnr.std()),
        )
    return out


def welch_p_value(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided unequal-variance t-test p-value.

    Degenerate zero-variance pairs resolve by mean comparison: identical
    means give p = 1.0 (indistinguishable), different means give 0.0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("Welch test needs at least 2 samples per group")
    if a.var(ddof=1) == 0.0 and b.var(ddof=1) == 0.0:
        return 1.0 if a.mean() == b.mean() else 0.0
    return float(scipy_stats.ttest_ind(a, b, equal_var=False).pvalue)


@dataclass(frozen=True)
class RankRow:
    model_id: str
    set_size: int
    n_correct: int
    n_incorrect: int
    stats: GroupStats
    highlight_de: bool
    highlight_fpr: bool
    highlight_fnr: bool


def rank_top_k(
    samples: Sequence[MetricSample],
    k: int = 5,
    alpha: float = 0.05,
) -> list[RankRow]:
    """Top-k configurations per model by mean DE, with significance flags.

    A cell is flagged when a two-sided Welch test against the best value
    in that column (best DE is the max, best FPR/FNR the min, over the
    ranked rows) yields p > alpha. The best row itself is always flagged.
    """
    groups: dict[tuple[str, int, int, int], list[MetricSample]] = defaultdict(list)
    for sample in samples:
        groups[(sample.model_id, *sample.config_key)].append(sample)
    for key, members in groups.items():
        if len(members) < 2:
            raise ValueError(f"group {key} has fewer than 2 samples; test undefined")

    per_model: dict[str, list[tuple[tuple[str, int, int, int], float]]] = defaultdict(list)
    for key, members in groups.items():
        de_mean = float(np.mean([m.de for m in members]))
        per_model[key[0]].append((key, de_mean))
    for model_id, entries in per_model.items():
        if len(entries) < k:
            raise ValueError(f"model {model_id!r} has {len(entries)} configurations, need >= {k}")

    selected: list[tuple[str, int, int, int]] = []
    for model_id in sorted(per_model):
        entries = sorted(per_model[model_id], key=lambda e: (-e[1], e[0]))
        selected.extend(key for key, _ in entries[:k])

    def column(key, attr):
        return [getattr(m, attr) for m in groups[key]]

    best_de = max(selected, key=lambda key: np.mean(column(key, "de")))
    best_fpr = min(selected, key=lambda key: np.mean(column(key, "fpr")))
    best_fnr = min(selected, key=lambda key: np.mean(column(key, "fnr")))

    rows: list[RankRow] = []
    for key in selected:
        members = groups[key]
        de = np.array([m.de for m in members])
        fpr = np.array([m.fpr for m in members])
        fnr = np.array([m.fnr for m in members])
        stats = GroupStats(
            n=len(members),
            de_mean=float(de.mean()), de_std=float(de.std()),
            fpr_mean=float(fpr.mean()), fpr_std=float(fpr.std()),
            fnr_mean=float(fnr.mean()), fnr_std=float(fnr.std()),
        )
        rows.append(
            RankRow(
                model_id=key[0], set_size=key[1], n_correct=key[2], n_incorrect=key[3],
                stats=stats,
                highlight_de=welch_p_value(de, column(best_de, "de")) > alpha,
                highlight_fpr=welch_p_value(fpr, column(best_fpr, "fpr")) > alpha,
                highlight_fnr=welch_p_value(fnr, column(best_fnr, "fnr")) > alpha,
            )
        )
    return rows


@dataclass(frozen=True)
class BoxStats:
    """Five-number box summary with Tukey whiskers."""

    n: int
    mean: float
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float


def box_stats(values: Sequence[float]) -> BoxStats:
    if not len(values):
        raise ValueError("no values")
    arr = np.sort(np.asarray(values, dtype=float))
    q1, median, q3 = (float(np.percentile(arr, p)) for p in (25, 50, 75))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    return BoxStats(
        n=len(arr), mean=float(arr.mean()),
        q1=q1, median=median, q3=q3,
        whisker_lo=float(inside[0]), whisker_hi=float(inside[-1]),
    )


def per_question_breakdown(
    samples: Sequence[MetricSample],
    top_configs: Optional[set[tuple[str, int, int, int]]] = None,
) -> dict[str, BoxStats]:
    """DE distribution per question over the selected configurations."""
    if top_configs is not None:
        samples = [s for s in samples if (s.model_id, *s.config_key) in top_configs]
    if not samples:
        raise ValueError("empty selection")
    by_question: dict[str, list[float]] = defaultdict(list)
    for sample in samples:
        by_question[sample.question_id].append(sample.de)
    return {qid: box_stats(values) for qid, values in sorted(by_question.items())}


def metric_samples_to_jsonl(samples: Sequence[MetricSample]) -> str:
    import json

    lines = [
        json.dumps(
            {
                "question": s.question_id, "model": s.model_id, "set": s.set_size,
                "correct": s.n_correct, "incorrect": s.n_incorrect,
                "replicate": s.replicate, "de": s.de, "fpr": s.fpr, "fnr": s.fnr,
            },
            sort_keys=True,
        )
        for s in samples
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def metric_samples_from_jsonl(text: str) -> list[MetricSample]:
    import json

    samples = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        samples.append(
            MetricSample(
                question_id=obj["question"], model_id=obj["model"], set_size=obj["set"],
                n_correct=obj["correct"], n_incorrect=obj["incorrect"],
                replicate=obj["replicate"], de=obj["de"], fpr=obj["fpr"], fnr=obj["fnr"],
            )
        )
    return samples
