"""Prefix-prompt history: candidate prefixes scored against the frozen
student on held-out data, kept in ascending score order for the assistant
model's in-context consumption.

The empty prefix is always seeded in, which guarantees the best entry can
never score below the no-prefix baseline on the selection split.
"""

import bisect
import logging
from dataclasses import dataclass

from . import student as student_mod
from . import ta as ta_mod
from .dataset import Dataset
from .errors import StallError, StateError, ValidationError
from .metrics import MetricKind, evaluate

logger = logging.getLogger(__name__)

# Give up after this many consecutive rounds that add nothing new; turns an
# otherwise unbounded search loop into a total procedure.
STALL_LIMIT = 10


@dataclass(frozen=True)
class Origin:
    """Provenance of a history entry: a seed, or generated at a given
    epoch/round (round -1 marks the pre-collection first prefix)."""

    kind: str  # "seed" | "generated"
    epoch: int | None = None
    round: int | None = None

    def to_dict(self) -> dict:
        if self.kind == "seed":
            return {"kind": "seed"}
        return {"kind": "generated", "epoch": self.epoch, "round": self.round}

    @classmethod
    def from_dict(cls, obj: dict) -> "Origin":
        if obj["kind"] == "seed":
            return cls(kind="seed")
        return cls(kind="generated", epoch=obj["epoch"], round=obj["round"])


SEED = Origin(kind="seed")


@dataclass(frozen=True)
class ScoredPrefix:
    prefix: str
    score: float
    origin: Origin = SEED


@dataclass(frozen=True)
class PrefixHistory:
    """Entries in nondecreasing score order, unique by prefix string."""

    entries: tuple[ScoredPrefix, ...] = ()
    capacity: int = 0  # informational target size; 0 = unbounded

    def __len__(self) -> int:
        return len(self.entries)

    def prefixes(self) -> set[str]:
        return {e.prefix for e in self.entries}

    def best(self) -> ScoredPrefix:
        if not self.entries:
            raise ValidationError("history is empty")
        return self.entries[-1]

    def find(self, prefix: str) -> ScoredPrefix | None:
        for e in self.entries:
            if e.prefix == prefix:
                return e
        return None

    def to_list(self) -> list[dict]:
        return [
            {"prefix": e.prefix, "score": float(e.score), "origin": e.origin.to_dict()}
            for e in self.entries
        ]

    @classmethod
    def from_list(cls, items: list[dict], capacity: int = 0) -> "PrefixHistory":
        h = cls(capacity=capacity)
        for item in items:
            h = insert_sorted(
                h,
                ScoredPrefix(
                    prefix=item["prefix"],
                    score=float(item["score"]),
                    origin=Origin.from_dict(item["origin"]),
                ),
            )
        return h


@dataclass(frozen=True)
class RoundStats:
    """Per-round collection stats: how many candidates the assistant model
    produced and how many strictly beat the pre-round best score."""

    round_index: int
    generated: int
    exceeded_max: int

    def __post_init__(self):
        if self.exceeded_max > self.generated:
            raise ValidationError("exceeded_max cannot exceed generated")


def score_prefix(
    student: student_mod.StudentParams,
    prefix: str,
    eval_set: Dataset,
    kind: MetricKind,
    hash_seed: int = 0,
) -> float:
    """Metric of the frozen student over eval_set with `prefix` prepended
    to every input."""
    if not student.frozen:
        raise StateError("scoring requires a frozen student")
    if not len(eval_set):
        raise ValidationError("eval_set must be non-empty")
    labels = eval_set.labels()
    if kind is MetricKind.NEG_MEAN_LOSS:
        preds = [
            student_mod.forward(
                student, student_mod.featurize(prefix, ex.text, student.dims, hash_seed)
            )
            for ex in eval_set.examples
        ]
    else:
        preds = [
            student_mod.predict(student, prefix, ex.text, hash_seed)
            for ex in eval_set.examples
        ]
    return evaluate(kind, preds, labels, class_count=eval_set.class_count)


def insert_sorted(h: PrefixHistory, sp: ScoredPrefix) -> PrefixHistory:
    """Insert keeping nondecreasing score order; ties go after existing
    equals (stable). A prefix already present is kept as-is."""
    if h.find(sp.prefix) is not None:
        return h
    scores = [e.score for e in h.entries]
    pos = bisect.bisect_right(scores, sp.score)
    return PrefixHistory(
        entries=h.entries[:pos] + (sp,) + h.entries[pos:], capacity=h.capacity
    )


def seed_history(
    student: student_mod.StudentParams,
    eval_set: Dataset,
    kind: MetricKind,
    s0_candidates: list[str] = (),
    hash_seed: int = 0,
    capacity: int = 0,
) -> PrefixHistory:
    """History seeded with the scored empty prefix (the baseline floor)
    plus any initial candidates."""
    h = PrefixHistory(capacity=capacity)
    h = insert_sorted(
        h, ScoredPrefix(prefix="", score=score_prefix(student, "", eval_set, kind, hash_seed))
    )
    for candidate in s0_candidates:
        if h.find(candidate) is not None:
            continue
        h = insert_sorted(
            h,
            ScoredPrefix(
                prefix=candidate,
                score=score_prefix(student, candidate, eval_set, kind, hash_seed),
            ),
        )
    return h


def collect(
    ta: ta_mod.TAHandle,
    mp: ta_mod.MetaPrompt,
    student: student_mod.StudentParams,
    eval_set: Dataset,
    kind: MetricKind,
    h0: PrefixHistory,
    k: int,
    l: int,
    temperature: float = 1.0,
    hash_seed: int = 0,
    epoch: int = 0,
) -> tuple[PrefixHistory, list[RoundStats]]:
    """Grow the history to exactly k entries by repeatedly asking the
    assistant model for l candidates, scoring the fresh ones, and inserting
    in order. Candidates already present are discarded unscored. If the
    final round overshoots k, the newest insertions are dropped.
    """
    if len(h0) < 1:
        raise ValidationError("initial history must be non-empty")
    if k <= len(h0):
        raise ValidationError(f"k={k} must exceed initial history size {len(h0)}")
    if l < 1:
        raise ValidationError(f"l must be >= 1, got {l}")

    h = PrefixHistory(entries=h0.entries, capacity=k)
    rounds: list[RoundStats] = []
    insertion_log: list[str] = []
    stalled = 0
    round_index = 0
    while len(h) < k:
        request = ta_mod.render_generation_request(mp, h, l, temperature)
        candidates = ta_mod.generate(ta, request, l, temperature)
        pre_round_max = h.best().score
        known = h.prefixes()
        fresh = [c for c in dict.fromkeys(candidates) if c not in known]
        exceeded = 0
        for candidate in fresh:
            score = score_prefix(student, candidate, eval_set, kind, hash_seed)
            if score > pre_round_max:
                exceeded += 1
            h = insert_sorted(
                h,
                ScoredPrefix(
                    prefix=candidate,
                    score=score,
                    origin=Origin(kind="generated", epoch=epoch, round=round_index),
                ),
            )
            insertion_log.append(candidate)
        rounds.append(
            RoundStats(round_index=round_index, generated=len(candidates), exceeded_max=exceeded)
        )
        stalled = stalled + 1 if not fresh else 0
        if stalled >= STALL_LIMIT:
            raise StallError(
                f"{STALL_LIMIT} consecutive rounds added no new prefixes "
                f"(history at {len(h)}/{k})"
            )
        round_index += 1

    excess = len(h) - k
    if excess:
        drop = set(insertion_log[-excess:])
        h = PrefixHistory(
            entries=tuple(e for e in h.entries if e.prefix not in drop), capacity=k
        )
    return h, rounds
