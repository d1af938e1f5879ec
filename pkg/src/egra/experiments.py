"""Balanced test splits, the training-size grid, and full experiment plans.

All sampling is seeded and reproducible: replanning with the same base
seed yields a byte-identical plan file. Test partitions are keyed by
replicate (and question) only, so every model and training configuration
of a given replicate is evaluated on the same held-out recordings; the
training sample is drawn per run from whatever the test split left over.
"""

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .consensus import ConsensusPolicy, apply_policy
from .corpus import CORRECT, INCORRECT, Corpus

logger = logging.getLogger(__name__)

GRID_SIZES = (50, 100, 200, 300)
FULL_GRID: tuple[tuple[int, int], ...] = tuple(
    (nc, ni) for nc in GRID_SIZES for ni in GRID_SIZES
)
DEFAULT_REPLICATES = 5
TEST_PER_CLASS = 50


class InsufficientStockError(ValueError):
    """A question lacks enough consensus-labeled recordings of one class."""

    def __init__(self, question_id: str, verdict: str, have: int, need: int, context: str = ""):
        self.question_id = question_id
        self.verdict = verdict
        self.have = have
        self.need = need
        suffix = f" ({context})" if context else ""
        super().__init__(
            f"question {question_id!r} has {have} consensus-{verdict} recordings, "
            f"need {need}{suffix}"
        )


def stable_seed(*parts) -> int:
    """Deterministic 63-bit seed from arbitrary hashable parts."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def consensus_pools(corpus: Corpus) -> dict[str, dict[str, list[str]]]:
    """Per-question id pools of consensus-labeled recordings, sorted for determinism."""
    labels = apply_policy(corpus, ConsensusPolicy.CONSENSUS)
    pools: dict[str, dict[str, list[str]]] = {
        qid: {CORRECT: [], INCORRECT: []} for qid in corpus.questions
    }
    for rid, verdict in labels.items():
        pools[corpus.by_id(rid).question_id][verdict].append(rid)
    for per_class in pools.values():
        per_class[CORRECT].sort()
        per_class[INCORRECT].sort()
    return pools


@dataclass(frozen=True)
class TestSplit:
    """Balanced held-out set for one question."""

    question_id: str
    positive_ids: tuple[str, ...]
    negative_ids: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if len(self.positive_ids) != len(self.negative_ids):
            raise ValueError("test split must be balanced")
        if set(self.positive_ids) & set(self.negative_ids):
            raise ValueError("positive and negative test ids overlap")

    @property
    def all_ids(self) -> frozenset[str]:
        return frozenset(self.positive_ids) | frozenset(self.negative_ids)


@dataclass(frozen=True)
class TrainConfig:
    """Per-question sampling sizes plus the questions trained together."""

    n_correct: int
    n_incorrect: int
    question_set: tuple[str, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_correct <= 0 or self.n_incorrect <= 0:
            raise ValueError("sample counts must be positive")
        if not self.question_set:
            raise ValueError("question_set must be non-empty")
        if len(set(self.question_set)) != len(self.question_set):
            raise ValueError("question_set contains duplicates")


@dataclass(frozen=True)
class TrainItem:
    recording_id: str
    question_id: str
    verdict: str


def make_test_split(
    pools: dict[str, dict[str, list[str]]],
    question_id: str,
    seed: int,
    per_class: int = TEST_PER_CLASS,
) -> TestSplit:
    """Uniformly sample a balanced positive/negative test split for one question."""
    per_question = pools[question_id]
    rng = random.Random(seed)
    picked: dict[str, tuple[str, ...]] = {}
    for verdict in (CORRECT, INCORRECT):
        pool = per_question[verdict]
        if len(pool) < per_class:
            raise InsufficientStockError(question_id, verdict, len(pool), per_class, "test split")
        picked[verdict] = tuple(rng.sample(pool, per_class))
    return TestSplit(
        question_id=question_id,
        positive_ids=picked[CORRECT],
        negative_ids=picked[INCORRECT],
        seed=seed,
    )


def make_train_sample(
    pools: dict[str, dict[str, list[str]]],
    config: TrainConfig,
    excluded: Sequence[TestSplit] = (),
) -> list[TrainItem]:
    """Sample the training set for a config, avoiding every excluded test id."""
    banned: set[str] = set()
    for split in excluded:
        banned |= split.all_ids
    rng = random.Random(config.seed)
    items: list[TrainItem] = []
    for qid in config.question_set:
        for verdict, need in ((CORRECT, config.n_correct), (INCORRECT, config.n_incorrect)):
            pool = [rid for rid in pools[qid][verdict] if rid not in banned]
            if len(pool) < need:
                raise InsufficientStockError(qid, verdict, len(pool), need, "after test exclusion")
            items.extend(TrainItem(rid, qid, verdict) for rid in rng.sample(pool, need))
    return items


def make_question_sets(
    questions: Sequence[str], set_size: int, seed: int
) -> list[tuple[str, ...]]:
    """Partition the questions into disjoint groups of ``set_size``.

    Deterministic per seed; the last group is smaller when the question
    count is not divisible by the set size.
    """
    if not 1 <= set_size <= len(questions):
        raise ValueError(f"set_size must be in 1..{len(questions)}, got {set_size}")
    shuffled = list(questions)
    random.Random(seed).shuffle(shuffled)
    return [tuple(shuffled[i : i + set_size]) for i in range(0, len(shuffled), set_size)]


@dataclass(frozen=True)
class RunSpec:
    """One fine-tune-and-evaluate unit of work."""

    run_id: str
    model_id: str
    config: TrainConfig
    replicate: int
    seed: int
    train_items: tuple[TrainItem, ...]
    test_splits: dict[str, TestSplit] = field(hash=False)

    def train_ids(self) -> frozenset[str]:
        return frozenset(item.recording_id for item in self.train_items)

    def test_ids(self) -> frozenset[str]:
        out: set[str] = set()
        for split in self.test_splits.values():
            out |= split.all_ids
        return frozenset(out)


@dataclass
class ExperimentPlan:
    base_seed: int
    runs: list[RunSpec]

    def to_json(self) -> str:
        payload = {
            "base_seed": self.base_seed,
            "runs": [
                {
                    "run_id": run.run_id,
                    "model_id": run.model_id,
                    "question_set": list(run.config.question_set),
                    "n_correct": run.config.n_correct,
                    "n_incorrect": run.config.n_incorrect,
                    "replicate": run.replicate,
                    "seed": run.seed,
                    "train": [
                        [item.recording_id, item.question_id, item.verdict]
                        for item in run.train_items
                    ],
                    "test": {
                        qid: {
                            "positive_ids": list(split.positive_ids),
                            "negative_ids": list(split.negative_ids),
                            "seed": split.seed,
                        }
                        for qid, split in sorted(run.test_splits.items())
                    },
                }
                for run in self.runs
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        payload = json.loads(text)
        runs = []
        for obj in payload["runs"]:
            config = TrainConfig(
                n_correct=obj["n_correct"],
                n_incorrect=obj["n_incorrect"],
                question_set=tuple(obj["question_set"]),
                seed=obj["seed"],
            )
            splits = {
                qid: TestSplit(
                    question_id=qid,
                    positive_ids=tuple(entry["positive_ids"]),
                    negative_ids=tuple(entry["negative_ids"]),
                    seed=entry["seed"],
                )
                for qid, entry in obj["test"].items()
            }
            runs.append(
                RunSpec(
                    run_id=obj["run_id"],
                    model_id=obj["model_id"],
                    config=config,
                    replicate=obj["replicate"],
                    seed=obj["seed"],
                    train_items=tuple(TrainItem(*entry) for entry in obj["train"]),
                    test_splits=splits,
                )
            )
        return cls(base_seed=payload["base_seed"], runs=runs)


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "-" for ch in text)


def plan_experiments(
    corpus: Corpus,
    models: Sequence[str],
    set_sizes: Sequence[int] = (1,),
    grid: Sequence[tuple[int, int]] = FULL_GRID,
    n_replicates: int = DEFAULT_REPLICATES,
    base_seed: int = 0,
    test_per_class: int = TEST_PER_CLASS,
    pools: Optional[dict[str, dict[str, list[str]]]] = None,
) -> ExperimentPlan:
    """Expand models x question sets x grid x replicates into concrete runs.

    Test splits are drawn once per (replicate, question) and shared by all
    runs of that replicate; training samples are drawn per run with a seed
    hashed from (base_seed, model, config, replicate).
    """
    if pools is None:
        pools = consensus_pools(corpus)
    questions = sorted(qid for qid, per_class in pools.items() if any(per_class.values()))

    test_splits: dict[tuple[int, str], TestSplit] = {}
    for replicate in range(n_replicates):
        for qid in questions:
            test_splits[(replicate, qid)] = make_test_split(
                pools, qid, seed=stable_seed(base_seed, "test", replicate, qid),
                per_class=test_per_class,
            )

    runs: list[RunSpec] = []
    for model_id in models:
        for set_size in set_sizes:
            groups = make_question_sets(questions, set_size, seed=stable_seed(base_seed, "groups", set_size))
            for group in groups:
                for n_correct, n_incorrect in grid:
                    for replicate in range(n_replicates):
                        run_seed = stable_seed(
                            base_seed, model_id, group, n_correct, n_incorrect, replicate
                        )
                        config = TrainConfig(
                            n_correct=n_correct,
                            n_incorrect=n_incorrect,
                            question_set=group,
                            seed=run_seed,
                        )
                        splits = {qid: test_splits[(replicate, qid)] for qid in group}
                        run_id = (
                            f"{_slug(model_id)}__{'-'.join(group)}"
                            f"__c{n_correct}_i{n_incorrect}__rep{replicate}"
                        )
                        try:
                            train_items = make_train_sample(pools, config, tuple(splits.values()))
                        except InsufficientStockError as exc:
                            raise InsufficientStockError(
                                exc.question_id, exc.verdict, exc.have, exc.need,
                                context=f"run {run_id}",
                            ) from exc
                        runs.append(
                            RunSpec(
                                run_id=run_id,
                                model_id=model_id,
                                config=config,
                                replicate=replicate,
                                seed=run_seed,
                                train_items=tuple(train_items),
                                test_splits=splits,
                            )
                        )
    logger.info("Planned %d runs (base_seed=%d)", len(runs), base_seed)
    return ExperimentPlan(base_seed=base_seed, runs=runs)
