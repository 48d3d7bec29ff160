"""Per-key attack outcomes, scoring and the report CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from ..netcore import KeyMapping

REPORT_COLUMNS = ("key", "guess", "truth", "correct", "stage")
ABSTAIN = "X"


@dataclass
class AttackReport:
    """Guessed bits per key-input; ``None`` marks an abstention.

    Accuracy divides decided-and-correct keys by K, so abstentions count as
    wrong.
    """

    guesses: dict[str, int | None]
    confidence: dict[str, float] = field(default_factory=dict)
    stages: dict[str, str] = field(default_factory=dict)
    ml1_accuracy: float | None = None
    ml2_accuracy: float | None = None
    accuracy: float | None = None

    @property
    def combined_accuracy(self) -> float | None:
        return self.accuracy

    def abstentions(self) -> int:
        return sum(g is None for g in self.guesses.values())

    def to_csv(self, truth: KeyMapping) -> str:
        buf = io.StringIO()
        buf.write("# accuracy = correct decided keys / K; X marks an abstention\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        t = truth.as_dict()
        for k in truth.names:
            g = self.guesses[k]
            w.writerow([k, ABSTAIN if g is None else g, t[k], int(g == t[k]), self.stages.get(k, "")])
        return buf.getvalue()


def score(report: AttackReport, truth: KeyMapping) -> float:
    """Fraction of key bits guessed correctly; abstentions are wrong."""
    t = truth.as_dict()
    if set(report.guesses) != set(t):
        raise ValueError("report and key mapping name different key-inputs")
    if not t:
        raise ValueError("empty key")
    return sum(report.guesses[k] == t[k] for k in t) / len(t)


def finish(report: AttackReport, truth: KeyMapping | None) -> AttackReport:
    if truth is not None:
        report.accuracy = score(report, truth)
    return report
