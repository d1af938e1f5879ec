"""Fine-tuning loop, inference, artifact persistence, and cost measurement."""

import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from ..corpus import CANONICAL_RATE_HZ, Waveform
from .encoders import load_encoder
from .head import ClassifierHead
from .labels import Label, LabelSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainHyperparams:
    learning_rate: float = 3e-5
    total_steps: int = 1000
    batch_size: int = 4
    grad_accumulation: int = 2
    head_hidden: tuple[int, ...] = (128, 64)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.grad_accumulation <= 0:
            raise ValueError("hyperparameters must be positive")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")

    @property
    def effective_batch(self) -> int:
        return self.batch_size * self.grad_accumulation


@dataclass(frozen=True)
class TrainingExample:
    waveform: Waveform
    label: Label  # (question_id, verdict)


@dataclass(frozen=True)
class TrainingSet:
    question_set: tuple[str, ...]
    examples: tuple[TrainingExample, ...]

    @property
    def label_space(self) -> LabelSpace:
        return LabelSpace(self.question_set)


@dataclass
class Classifier:
    """A fine-tuned encoder plus head, bound to its label space."""

    encoder: nn.Module
    head: ClassifierHead
    label_space: LabelSpace
    hparams: TrainHyperparams
    seed: int

    def eval(self) -> "Classifier":
        self.encoder.eval()
        self.head.eval()
        return self


@dataclass
class TrainingLog:
    losses: list[float] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def _collate(examples: Sequence[TrainingExample]) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(ex.waveform) for ex in examples], dtype=torch.long)
    max_len = int(lengths.max())
    waves = torch.zeros(len(examples), max_len)
    for i, ex in enumerate(examples):
        waves[i, : len(ex.waveform)] = torch.from_numpy(np.asarray(ex.waveform.samples))
    return waves, lengths


def _validate_train_set(train_set: TrainingSet) -> None:
    if not train_set.examples:
        raise ValueError("training set is empty")
    space = train_set.label_space
    counts = {cls: 0 for cls in space.classes}
    for ex in train_set.examples:
        if ex.waveform.sample_rate_hz != CANONICAL_RATE_HZ:
            raise ValueError(
                f"waveform not canonical: sample rate {ex.waveform.sample_rate_hz}"
            )
        if ex.label not in counts:
            raise KeyError(f"label {ex.label} outside the label space")
        counts[ex.label] += 1
    empty = [cls for cls, n in counts.items() if n == 0]
    if empty:
        raise ValueError(f"empty class in training set: {empty}")


def fine_tune(
    encoder: nn.Module,
    train_set: TrainingSet,
    hparams: TrainHyperparams = TrainHyperparams(),
    seed: int = 0,
) -> tuple[Classifier, TrainingLog]:
    """Fine-tune the whole encoder plus a fresh head with cross-entropy.

    Runs exactly ``hparams.total_steps`` optimizer steps, each accumulating
    gradients over ``grad_accumulation`` micro-batches of ``batch_size``
    examples. Head initialization and data order are functions of the seed.
    """
    _validate_train_set(train_set)
    space = train_set.label_space

    torch.manual_seed(seed)
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        head = ClassifierHead(encoder.frame_dim, space.n_classes, hidden=hparams.head_hidden)

    classifier = Classifier(
        encoder=encoder, head=head, label_space=space, hparams=hparams, seed=seed
    )
    log = TrainingLog()
    if hparams.total_steps == 0:
        return classifier.eval(), log

    encoder.train()
    head.train()
    optimizer = torch.optim.AdamW(
        list(encoder.parameters()) + list(head.parameters()), lr=hparams.learning_rate
    )
    loss_fn = nn.CrossEntropyLoss()

    order_rng = np.random.default_rng(seed)
    examples = list(train_set.examples)
    targets = torch.tensor([space.encode(ex.label) for ex in examples], dtype=torch.long)
    queue: list[int] = []

    def next_batch(size: int) -> list[int]:
        nonlocal queue
        while len(queue) < size:
            queue.extend(order_rng.permutation(len(examples)).tolist())
        picked, queue = queue[:size], queue[size:]
        return picked

    for step in range(hparams.total_steps):
        optimizer.zero_grad()
        step_loss = 0.0
        for _ in range(hparams.grad_accumulation):
            idx = next_batch(hparams.batch_size)
            waves, lengths = _collate([examples[i] for i in idx])
            frames, mask = encoder(waves, lengths)
            logits = head(frames, mask)
            loss = loss_fn(logits, targets[idx]) / hparams.grad_accumulation
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at step {step}: {loss.item()} "
                    f"(lr={hparams.learning_rate}, batch={idx})"
                )
            loss.backward()
            step_loss += float(loss.item())
        optimizer.step()
        log.losses.append(step_loss)
    return classifier.eval(), log


def predict(classifier: Classifier, waveform: Waveform) -> tuple[Label, np.ndarray]:
    """Class label and full probability vector for one canonical waveform."""
    encoder = classifier.encoder
    if len(waveform) < encoder.min_samples:
        raise ValueError(
            f"waveform shorter than encoder receptive field "
            f"({len(waveform)} < {encoder.min_samples} samples)"
        )
    classifier.eval()
    with torch.no_grad():
        waves, lengths = _collate([TrainingExample(waveform, classifier.label_space.classes[0])])
        frames, mask = encoder(waves, lengths)
        probs = classifier.head.probabilities(frames, mask)[0]
    probs_np = probs.numpy()
    return classifier.label_space.decode(int(probs_np.argmax())), probs_np


def predict_batch(
    classifier: Classifier, waveforms: Sequence[Waveform], batch_size: int = 8
) -> list[tuple[Label, np.ndarray]]:
    out: list[tuple[Label, np.ndarray]] = []
    classifier.eval()
    dummy = classifier.label_space.classes[0]
    with torch.no_grad():
        for start in range(0, len(waveforms), batch_size):
            chunk = waveforms[start : start + batch_size]
            waves, lengths = _collate([TrainingExample(w, dummy) for w in chunk])
            frames, mask = classifier.encoder(waves, lengths)
            probs = classifier.head.probabilities(frames, mask)
            for row in probs:
                row_np = row.numpy()
                out.append((classifier.label_space.decode(int(row_np.argmax())), row_np))
    return out


def save_classifier(classifier: Classifier, out_dir: Path | str) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "encoder_id": classifier.encoder.id,
        "label_space": list(classifier.label_space.question_set),
        "hparams": {
            "learning_rate": classifier.hparams.learning_rate,
            "total_steps": classifier.hparams.total_steps,
            "batch_size": classifier.hparams.batch_size,
            "grad_accumulation": classifier.hparams.grad_accumulation,
            "head_hidden": list(classifier.hparams.head_hidden),
        },
        "seed": classifier.seed,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    torch.save(
        {"encoder": classifier.encoder.state_dict(), "head": classifier.head.state_dict()},
        out_dir / "weights.pt",
    )


def load_classifier(artifact_dir: Path | str) -> Classifier:
    artifact_dir = Path(artifact_dir)
    meta = json.loads((artifact_dir / "meta.json").read_text())
    hparams = TrainHyperparams(
        learning_rate=meta["hparams"]["learning_rate"],
        total_steps=meta["hparams"]["total_steps"],
        batch_size=meta["hparams"]["batch_size"],
        grad_accumulation=meta["hparams"]["grad_accumulation"],
        head_hidden=tuple(meta["hparams"]["head_hidden"]),
    )
    space = LabelSpace(tuple(meta["label_space"]))
    encoder = load_encoder(meta["encoder_id"], seed=meta["seed"])
    head = ClassifierHead(encoder.frame_dim, space.n_classes, hidden=hparams.head_hidden)
    weights = torch.load(artifact_dir / "weights.pt", weights_only=True)
    encoder.load_state_dict(weights["encoder"])
    head.load_state_dict(weights["head"])
    classifier = Classifier(
        encoder=encoder, head=head, label_space=space, hparams=hparams, seed=meta["seed"]
    )
    return classifier.eval()


@dataclass(frozen=True)
class CostReport:
    training_seconds: tuple[float, ...]
    inference_seconds: tuple[float, ...]
    hardware: str

    @property
    def mean_training_seconds(self) -> float:
        return sum(self.training_seconds) / len(self.training_seconds)

    @property
    def mean_inference_seconds(self) -> float:
        return sum(self.inference_seconds) / len(self.inference_seconds)


def measure_cost(
    encoder_factory: Callable[[], nn.Module],
    train_set: TrainingSet,
    hparams: TrainHyperparams = TrainHyperparams(),
    n_runs: int = 10,
    probe: Optional[Waveform] = None,
) -> CostReport:
    """Wall-clock cost of a full fine-tune and of single-recording inference.

    Each run trains a fresh encoder; the report keeps all raw measurements
    alongside a description of the hardware they were taken on.
    """
    if probe is None:
        probe = train_set.examples[0].waveform
    training_times: list[float] = []
    inference_times: list[float] = []
    for run in range(n_runs):
        encoder = encoder_factory()
        start = time.perf_counter()
        classifier, _ = fine_tune(encoder, train_set, hparams, seed=run)
        training_times.append(time.perf_counter() - start)
        start = time.perf_counter()
        predict(classifier, probe)
        inference_times.append(time.perf_counter() - start)
    hardware = (
        f"{platform.machine()} {platform.processor() or 'cpu'}, "
        f"python {platform.python_version()}, torch {torch.__version__}"
    )
    return CostReport(
        training_seconds=tuple(training_times),
        inference_seconds=tuple(inference_times),
        hardware=hardware,
    )
