"""The reporting classifier: trained on synthetic features only.

A fresh single-head softmax network is trained after every task over the
full class range, so inference never needs to know which task a sample
came from. Accuracy is averaged per class by default (every class counts
equally regardless of its test-set size); per-sample averaging is
available for comparison.
"""

from dataclasses import dataclass

import numpy as np

from czsl import nn
from czsl.seeding import derive_seed, rng_for


@dataclass
class ClassifierParams:
    net: nn.MlpParams
    trained_for_task: int


def train_classifier(features, labels, num_classes, config, seed,
                     task_index=0) -> ClassifierParams:
    """Minibatch Adam on cross-entropy for config.classifier_epochs epochs."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if y.shape[0] != x.shape[0]:
        raise ValueError("features/labels row mismatch: %d vs %d"
                         % (x.shape[0], y.shape[0]))
    if y.min() < 0 or y.max() >= num_classes:
        raise ValueError("label out of range [0, %d)" % num_classes)
    dims = [x.shape[1]] + list(config.classifier_hidden) + [int(num_classes)]
    acts = [config.classifier_activation] * len(config.classifier_hidden) + ["identity"]
    net = nn.mlp_init(dims, acts, derive_seed(seed, 7))
    state = nn.adam_init(net, lr=config.classifier_lr)
    n = x.shape[0]
    for epoch in range(config.classifier_epochs):
        order = rng_for(seed, epoch, 0).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, grads = nn.backward(net, x[idx], "softmax_ce", y[idx])
            net, state = nn.adam_step(net, grads, state)
    return ClassifierParams(net=net, trained_for_task=int(task_index))


def predict(c: ClassifierParams, x) -> np.ndarray:
    """Argmax class per row; ties go to the smaller index."""
    logits = nn.mlp_forward(c.net, x)
    return np.argmax(logits, axis=1)


def per_class_accuracy(c: ClassifierParams, features, labels, class_subset,
                       average="class") -> float:
    """Accuracy over the subset's classes; predictions span all classes.

    average='class' weighs every class equally (mean of per-class rates,
    ascending class order, sequential accumulation); average='sample'
    pools all samples.
    """
    subset = sorted(int(k) for k in class_subset)
    if not subset:
        raise ValueError("class_subset is empty")
    if average not in ("class", "sample"):
        raise ValueError("average must be 'class' or 'sample'")
    y = np.ascontiguousarray(labels, dtype=np.int64)
    preds = predict(c, features)
    if average == "sample":
        mask = np.isin(y, subset)
        if not mask.any():
            raise ValueError("no test samples for classes %r" % (subset,))
        return float(np.count_nonzero(preds[mask] == y[mask])
                     / int(np.count_nonzero(mask)))
    total = 0.0
    for cls in subset:
        mask = y == cls
        count = int(np.count_nonzero(mask))
        if count == 0:
            raise ValueError("class %d has no test samples" % cls)
        total += np.count_nonzero(preds[mask] == cls) / count
    return total / len(subset)
