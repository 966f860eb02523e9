"""Evaluation metrics, all normalized to higher-is-better so the history
sort has a single orientation. Mean loss is negated at this boundary for
the same reason.
"""

import enum

import numpy as np

from .errors import ValidationError


class MetricKind(enum.Enum):
    ACCURACY = "accuracy"
    MACRO_F1 = "macro_f1"
    NEG_MEAN_LOSS = "neg_loss"

    @classmethod
    def from_name(cls, name: str) -> "MetricKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValidationError(
            f"unknown metric {name!r}; expected one of {[k.value for k in cls]}"
        )


def _to_class_indices(predictions: list) -> list[int]:
    out = []
    for p in predictions:
        if isinstance(p, (int, np.integer)):
            out.append(int(p))
        else:
            out.append(int(np.argmax(p)))
    return out


def evaluate(
    kind: MetricKind,
    predictions: list,
    labels: list[int],
    class_count: int | None = None,
) -> float:
    """Score predictions against labels. Larger is always better.

    Predictions are class indices or probability vectors; NEG_MEAN_LOSS
    requires probability vectors. class_count widens the macro-F1 class
    universe beyond what appears in the data (absent classes score 0).
    """
    if len(predictions) != len(labels):
        raise ValidationError(
            f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels"
        )
    if not labels:
        raise ValidationError("cannot evaluate empty prediction set")

    if kind is MetricKind.NEG_MEAN_LOSS:
        total = 0.0
        for p, y in zip(predictions, labels):
            if isinstance(p, (int, np.integer)):
                raise ValidationError("neg_loss requires probability vectors")
            if not 0 <= y < len(p):
                raise ValidationError(f"label {y} out of range for {len(p)} classes")
            total += -np.log(max(float(p[y]), 1e-300))
        return -total / len(labels)

    preds = _to_class_indices(predictions)
    if kind is MetricKind.ACCURACY:
        return sum(p == y for p, y in zip(preds, labels)) / len(labels)

    if kind is MetricKind.MACRO_F1:
        n_classes = max(class_count or 0, max(preds) + 1, max(labels) + 1)
        f1s = []
        for c in range(n_classes):
            tp = sum(1 for p, y in zip(preds, labels) if p == c and y == c)
            fp = sum(1 for p, y in zip(preds, labels) if p == c and y != c)
            fn = sum(1 for p, y in zip(preds, labels) if p != c and y == c)
            denom = 2 * tp + fp + fn
            f1s.append(2 * tp / denom if denom else 0.0)
        return float(np.mean(f1s))

    raise ValidationError(f"unknown metric kind {kind!r}")
