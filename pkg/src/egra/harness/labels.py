"""Classification label space: question x verdict."""

from dataclasses import dataclass

from ..corpus import CORRECT, INCORRECT

Label = tuple[str, str]  # (question_id, verdict)


@dataclass(frozen=True)
class LabelSpace:
    """Classes for a set of questions trained together.

    One model trained on Q questions predicts over 2Q classes, one
    (question, verdict) pair per class; a single question gives the
    binary correct/incorrect case.
    """

    question_set: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.question_set:
            raise ValueError("question_set must be non-empty")
        if len(set(self.question_set)) != len(self.question_set):
            raise ValueError("question_set contains duplicates")

    @property
    def classes(self) -> list[Label]:
        return [(qid, verdict) for qid in self.question_set for verdict in (CORRECT, INCORRECT)]

    @property
    def n_classes(self) -> int:
        return 2 * len(self.question_set)

    def encode(self, label: Label) -> int:
        qid, verdict = label
        try:
            q_index = self.question_set.index(qid)
        except ValueError:
            raise KeyError(f"question {qid!r} not in label space") from None
        if verdict == CORRECT:
            return 2 * q_index
        if verdict == INCORRECT:
            return 2 * q_index + 1
        raise KeyError(f"unknown verdict {verdict!r}")

    def decode(self, index: int) -> Label:
        if not 0 <= index < self.n_classes:
            raise IndexError(f"class index {index} out of range 0..{self.n_classes - 1}")
        return self.classes[index]
