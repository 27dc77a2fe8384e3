"""Per-task accuracies and their cross-task summary.

After task t, seen accuracy covers test samples of classes from tasks up
to t and unseen accuracy covers the rest; after the final task there is
no unseen set, so that slot stays None. The summary averages seen
accuracy over all tasks and unseen/harmonic over the first T-1.

Means here are sequential left folds. That is a committed part of the
contract: an independently coded oracle accumulating in the same order
reproduces every value bit-for-bit in float64.
"""

from dataclasses import dataclass

import numpy as np

from czsl.classifier import per_class_accuracy
from czsl.data import seen_unseen_partition


@dataclass
class TaskMetrics:
    t: int
    seen_acc: float
    unseen_acc: "float | None"
    harmonic: "float | None"


@dataclass
class MetricsReport:
    per_task: list
    msa: float
    mua: float
    mh: float


def harmonic(s: float, u: float) -> float:
    """2su/(s+u), defined as 0 at s=u=0. Symmetric in its arguments."""
    s = float(s)
    u = float(u)
    if s + u <= 0.0:
        return 0.0
    return 2.0 * s * u / (s + u)


def evaluate_after_task(clf, dataset, spec, t: int, average="class") -> TaskMetrics:
    """Seen/unseen per-class accuracy of one trained classifier."""
    seen, unseen = seen_unseen_partition(spec, t)
    y = dataset.labels_test
    x = dataset.features_test
    seen_mask = np.isin(y, seen)
    s = per_class_accuracy(clf, x[seen_mask], y[seen_mask], seen, average=average)
    if t == spec.num_tasks:
        return TaskMetrics(t=t, seen_acc=s, unseen_acc=None, harmonic=None)
    unseen_mask = np.isin(y, unseen)
    u = per_class_accuracy(clf, x[unseen_mask], y[unseen_mask], unseen, average=average)
    return TaskMetrics(t=t, seen_acc=s, unseen_acc=u, harmonic=harmonic(s, u))


def summarize(per_task) -> MetricsReport:
    """Average the per-task metrics; sequential means, fixed order."""
    if len(per_task) < 2:
        raise ValueError("need at least 2 task entries, got %d" % len(per_task))
    for i, m in enumerate(per_task):
        if m.t != i + 1:
            raise ValueError("entry %d carries task index %d" % (i, m.t))
    last = per_task[-1]
    if last.unseen_acc is not None or last.harmonic is not None:
        raise ValueError("final task entry must not carry unseen metrics")
    for m in per_task[:-1]:
        if m.unseen_acc is None or m.harmonic is None:
            raise ValueError("task %d entry is missing unseen metrics" % m.t)
    total_s = 0.0
    for m in per_task:
        total_s += m.seen_acc
    total_u = 0.0
    total_h = 0.0
    for m in per_task[:-1]:
        total_u += m.unseen_acc
        total_h += m.harmonic
    return MetricsReport(
        per_task=list(per_task),
        msa=total_s / len(per_task),
        mua=total_u / (len(per_task) - 1),
        mh=total_h / (len(per_task) - 1),
    )
