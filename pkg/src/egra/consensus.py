"""Marker-agreement scenarios, retention policies, and expert validation.

Three independent markers label every recording correct/incorrect. This
module classifies the four possible agreement patterns, applies the four
retention policies used to select training data, draws the stratified
validation sample an expert adjudicates, and computes expert-vs-marker
agreement rates.
"""

import logging
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .corpus import CORRECT, INCORRECT, Corpus, MarkerLabel, Recording

logger = logging.getLogger(__name__)


class ScenarioClass(Enum):
    """Agreement pattern of the three marker verdicts."""

    ALL_CORRECT = "AllCorrect"
    MOSTLY_CORRECT = "MostlyCorrect"  # exactly one incorrect
    MOSTLY_INCORRECT = "MostlyIncorrect"  # exactly one correct
    ALL_INCORRECT = "AllIncorrect"


class ConsensusPolicy(Enum):
    """Which agreement scenarios are retained for training."""

    ALL = "all"
    CONSENSUS = "consensus"
    CONSENSUS_PLUS_ONE_INCORRECT = "consensus+1i"
    CONSENSUS_PLUS_ONE_CORRECT = "consensus+1c"


_RETAINED: dict[ConsensusPolicy, frozenset[ScenarioClass]] = {
    ConsensusPolicy.ALL: frozenset(ScenarioClass),
    ConsensusPolicy.CONSENSUS: frozenset({ScenarioClass.ALL_CORRECT, ScenarioClass.ALL_INCORRECT}),
    ConsensusPolicy.CONSENSUS_PLUS_ONE_INCORRECT: frozenset(
        {ScenarioClass.ALL_CORRECT, ScenarioClass.ALL_INCORRECT, ScenarioClass.MOSTLY_CORRECT}
    ),
    ConsensusPolicy.CONSENSUS_PLUS_ONE_CORRECT: frozenset(
        {ScenarioClass.ALL_CORRECT, ScenarioClass.ALL_INCORRECT, ScenarioClass.MOSTLY_INCORRECT}
    ),
}


@dataclass(frozen=True)
class ExpertJudgment:
    """One expert verdict on one validation-set recording."""

    recording_id: str
    verdict: str
    judged_at: Optional[str] = None

    def __post_init__(self) -> None:
        if self.verdict not in (CORRECT, INCORRECT):
            raise ValueError(f"verdict must be correct/incorrect, got {self.verdict!r}")


class StratumError(ValueError):
    """A (question, scenario) stratum cannot supply the requested sample."""

    def __init__(self, question_id: str, scenario: ScenarioClass, have: int, need: int):
        self.question_id = question_id
        self.scenario = scenario
        super().__init__(
            f"stratum ({question_id!r}, {scenario.value}) has {have} recordings, need {need}"
        )


def classify_scenario(labels: Sequence[MarkerLabel]) -> ScenarioClass:
    """Map three marker verdicts to their agreement scenario.

    The mapping depends only on the number of incorrect verdicts, so it is
    invariant under permutation of the labels.
    """
    if len(labels) != 3:
        raise ValueError(f"exactly 3 marker labels required, got {len(labels)}")
    n_incorrect = sum(1 for label in labels if label.verdict == INCORRECT)
    return {
        0: ScenarioClass.ALL_CORRECT,
        1: ScenarioClass.MOSTLY_CORRECT,
        2: ScenarioClass.MOSTLY_INCORRECT,
        3: ScenarioClass.ALL_INCORRECT,
    }[n_incorrect]


def consensus_label(labels: Sequence[MarkerLabel]) -> Optional[str]:
    """Return the unanimous verdict, or None on any disagreement."""
    if len(labels) != 3:
        raise ValueError(f"exactly 3 marker labels required, got {len(labels)}")
    verdicts = {label.verdict for label in labels}
    if len(verdicts) == 1:
        return next(iter(verdicts))
    return None


def majority_label(labels: Sequence[MarkerLabel]) -> str:
    """Majority verdict of three labels; never ties."""
    if len(labels) != 3:
        raise ValueError(f"exactly 3 marker labels required, got {len(labels)}")
    counts = Counter(label.verdict for label in labels)
    return counts.most_common(1)[0][0]


def policy_label(labels: Sequence[MarkerLabel], policy: ConsensusPolicy) -> Optional[str]:
    """Training label a policy assigns, or None when the recording is dropped."""
    scenario = classify_scenario(labels)
    if scenario not in _RETAINED[policy]:
        return None
    # For every retained scenario the majority verdict is the policy label:
    # unanimous rows trivially, 2-1 rows by the majority side.
    return majority_label(labels)


def apply_policy(corpus: Corpus, policy: ConsensusPolicy) -> dict[str, str]:
    """Select training recordings under a retention policy.

    Returns {recording_id: training_label} over fully-labeled recordings.
    """
    retained: dict[str, str] = {}
    for rec in corpus.fully_labeled():
        label = policy_label(rec.marker_labels, policy)
        if label is not None:
            retained[rec.id] = label
    return retained


def sample_validation_set(
    corpus: Corpus,
    per_question: int = 40,
    per_scenario: int = 10,
    seed: int = 0,
) -> list[str]:
    """Draw the blinded, shuffled validation sample for expert review.

    Picks ``per_scenario`` recordings from every (question, scenario)
    stratum, so every question contributes ``per_question`` items split
    evenly across the four scenarios. Deterministic for a fixed seed; the
    returned ids carry no label information.
    """
    if per_question != 4 * per_scenario:
        raise ValueError(
            f"per_question must equal 4 * per_scenario ({per_question} != 4*{per_scenario})"
        )
    strata: dict[tuple[str, ScenarioClass], list[str]] = {}
    for rec in corpus.fully_labeled():
        key = (rec.question_id, classify_scenario(rec.marker_labels))
        strata.setdefault(key, []).append(rec.id)

    rng = random.Random(seed)
    chosen: list[str] = []
    for qid in sorted(corpus.questions):
        for scenario in ScenarioClass:
            pool = sorted(strata.get((qid, scenario), []))
            if len(pool) < per_scenario:
                raise StratumError(qid, scenario, len(pool), per_scenario)
            chosen.extend(rng.sample(pool, per_scenario))
    rng.shuffle(chosen)
    return chosen


@dataclass(frozen=True)
class AgreementReport:
    """Expert-vs-marker agreement under one policy."""

    policy: ConsensusPolicy
    agreements: int
    judged_retained: int

    @property
    def rate(self) -> float:
        return self.agreements / self.judged_retained


def _latest_by_recording(judgments: Iterable[ExpertJudgment]) -> dict[str, str]:
    latest: dict[str, str] = {}
    for j in judgments:
        latest[j.recording_id] = j.verdict
    return latest


def agreement_rate(
    corpus: Corpus,
    judgments: Sequence[ExpertJudgment],
    policy: ConsensusPolicy,
) -> AgreementReport:
    """Fraction of judged, policy-retained recordings where the expert verdict
    equals the policy's training label.

    Raises ValueError when no judged recording is retained by the policy.
    """
    verdicts = _latest_by_recording(judgments)
    agreements = 0
    retained = 0
    for rid, expert_verdict in verdicts.items():
        rec = corpus.by_id(rid)
        label = policy_label(rec.marker_labels, policy)
        if label is None:
            continue
        retained += 1
        if label == expert_verdict:
            agreements += 1
    if retained == 0:
        raise ValueError(f"no judged recording retained under policy {policy.value}")
    return AgreementReport(policy=policy, agreements=agreements, judged_retained=retained)


def agreement_by_question(
    corpus: Corpus,
    judgments: Sequence[ExpertJudgment],
    policy: ConsensusPolicy,
) -> dict[str, Optional[AgreementReport]]:
    """Per-question agreement reports; None where the denominator is empty."""
    verdicts = _latest_by_recording(judgments)
    per_question: dict[str, list[tuple[str, str]]] = {qid: [] for qid in corpus.questions}
    for rid, verdict in verdicts.items():
        per_question[corpus.by_id(rid).question_id].append((rid, verdict))

    out: dict[str, Optional[AgreementReport]] = {}
    for qid, pairs in per_question.items():
        agreements = 0
        retained = 0
        for rid, expert_verdict in pairs:
            label = policy_label(corpus.by_id(rid).marker_labels, policy)
            if label is None:
                continue
            retained += 1
            if label == expert_verdict:
                agreements += 1
        out[qid] = (
            AgreementReport(policy=policy, agreements=agreements, judged_retained=retained)
            if retained
            else None
        )
    return out
