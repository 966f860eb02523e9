"""The alternating per-epoch training loop: train the student, freeze it,
collect a scored prefix history, build dialogue tuning data, and tune the
assistant model, with both models pushed toward the same validation metric.

Runs are pure functions of their config when the simulated backend is
used: every random draw is derived from seeds in the config, and run state
serializes losslessly, so checkpoints resume bit-identically.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import student as student_mod
from . import ta as ta_mod
from .dataset import Dataset, DatasetDescription, load_jsonl, make_exemplars, split
from .dialogue_gradient import DEFAULT_FINETUNE_CAP, FINETUNE_SOFT_LIMIT, build_windows, cap, enrich, serialize_jsonl
from .errors import FinetuneError, TransportError, ValidationError
from .history import Origin, PrefixHistory, RoundStats, ScoredPrefix, collect, insert_sorted, score_prefix, seed_history
from .metrics import MetricKind
from .remote import RemoteClient

logger = logging.getLogger(__name__)

DEFAULT_INSTRUCTION = (
    "You are helping train a small text classifier by proposing short prefix "
    "prompts that get prepended to every input. Suggest prefixes likely to raise "
    "the validation score. The scored history you see is sorted ascending, so "
    "the last line is the current best."
)

# Fallback candidate pool for the simulated backend so a minimal config is
# runnable out of the box; real experiments should supply their own pool.
DEFAULT_SIM_POOL: tuple[str, ...] = (
    "Think step by step",
    "Focus on the key words",
    "Consider the overall tone",
    "Weigh every word carefully",
    "Look for decisive phrases",
    "Classify by the strongest cue",
    "Read closely before deciding",
    "Attend to the label vocabulary",
    "Mind the topic specific terms",
    "Use the most frequent signal",
    "Compare against each label meaning",
    "Trust the clearest evidence",
)


@dataclass
class RunConfig:
    """Resolved run configuration. Field defaults are the shipped defaults;
    see from_dict for the strict JSON loader."""

    data_path: str
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 13
    metric: str = "accuracy"
    epochs: int = 5
    k: int = 50
    w: int = 5
    l: int = 8
    temperature: float = 1.0
    finetune_cap: int = DEFAULT_FINETUNE_CAP
    instruction: str = DEFAULT_INSTRUCTION
    exemplar_count: int = 0
    exemplar_seed: int = 17
    task_name: str = ""
    task_summary: str = ""
    label_semantics: tuple[str, ...] = ()
    lr: float = 0.1
    dims: int = student_mod.DEFAULT_DIMS
    hash_seed: int = 0
    shuffle_seed: int = 29
    ta_backend: str = "simulated"
    sim_pool: tuple[tuple[str, float], ...] = tuple((p, 0.0) for p in DEFAULT_SIM_POOL)
    sim_seed: int = 0
    sim_temperature_scale: float = 1.0
    base_url: str = "https://api.openai.com"
    model_id: str = "gpt-3.5-turbo"
    request_timeout_s: float = 60.0
    retry_backoff_s: float = 0.5
    poll_interval_s: float = 2.0
    finetune_timeout_s: float = 600.0
    ta_lineage: str = "continual"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.w < 1:
            raise ValidationError("w must be >= 1")
        if not self.w < self.k:
            raise ValidationError(f"w < k required, got w={self.w}, k={self.k}")
        if self.l < 1:
            raise ValidationError("l must be >= 1")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.finetune_cap < 1:
            raise ValidationError("finetune_cap must be >= 1")
        MetricKind.from_name(self.metric)
        if self.ta_backend not in ("simulated", "remote"):
            raise ValidationError(f"unknown ta_backend {self.ta_backend!r}")
        if self.ta_lineage not in ("continual", "from_base"):
            raise ValidationError(f"unknown ta_lineage {self.ta_lineage!r}")
        if self.ta_backend == "remote" and not (self.base_url and self.model_id):
            raise ValidationError("remote backend requires base_url and model_id")
        if self.finetune_cap > FINETUNE_SOFT_LIMIT:
            logger.warning(
                "finetune_cap=%d exceeds %d; tuning quality degrades past that many examples",
                self.finetune_cap,
                FINETUNE_SOFT_LIMIT,
            )

    def to_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "split_fractions": list(self.split_fractions),
            "split_seed": self.split_seed,
            "metric": self.metric,
            "epochs": self.epochs,
            "k": self.k,
            "w": self.w,
            "l": self.l,
            "temperature": self.temperature,
            "finetune_cap": self.finetune_cap,
            "instruction": self.instruction,
            "exemplar_count": self.exemplar_count,
            "exemplar_seed": self.exemplar_seed,
            "task_name": self.task_name,
            "task_summary": self.task_summary,
            "label_semantics": list(self.label_semantics),
            "lr": self.lr,
            "dims": self.dims,
            "hash_seed": self.hash_seed,
            "shuffle_seed": self.shuffle_seed,
            "ta_backend": self.ta_backend,
            "sim_pool": [[p, w] for p, w in self.sim_pool],
            "sim_seed": self.sim_seed,
            "sim_temperature_scale": self.sim_temperature_scale,
            "base_url": self.base_url,
            "model_id": self.model_id,
            "request_timeout_s": self.request_timeout_s,
            "retry_backoff_s": self.retry_backoff_s,
            "poll_interval_s": self.poll_interval_s,
            "finetune_timeout_s": self.finetune_timeout_s,
            "ta_lineage": self.ta_lineage,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        """Strict loader: unknown keys and type mismatches are errors, so a
        misspelled hyperparameter cannot silently fall back to a default."""
        if not isinstance(obj, dict):
            raise ValidationError("config must be a JSON object")
        kwargs = {}
        for key, value in obj.items():
            if key not in _CONFIG_CHECKERS:
                raise ValidationError(f"unknown config key $.{key}")
            kwargs[key] = _CONFIG_CHECKERS[key](key, value)
        if "data_path" not in kwargs:
            raise ValidationError("missing required config key $.data_path")
        return cls(**kwargs)


def _expect_str(key, value):
    if not isinstance(value, str):
        raise ValidationError(f"$.{key}: expected string, got {type(value).__name__}")
    return value


def _expect_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"$.{key}: expected integer, got {type(value).__name__}")
    return value


def _expect_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"$.{key}: expected number, got {type(value).__name__}")
    return float(value)


def _expect_fractions(key, value):
    if not isinstance(value, list) or len(value) != 3:
        raise ValidationError(f"$.{key}: expected a list of three numbers")
    return tuple(_expect_float(f"{key}[{i}]", v) for i, v in enumerate(value))


def _expect_str_list(key, value):
    if not isinstance(value, list):
        raise ValidationError(f"$.{key}: expected a list of strings")
    return tuple(_expect_str(f"{key}[{i}]", v) for i, v in enumerate(value))


def _expect_pool(key, value):
    """Pool entries are either bare prefix strings (weight 0) or
    [prefix, weight] pairs."""
    if not isinstance(value, list):
        raise ValidationError(f"$.{key}: expected a list")
    pool = []
    for i, item in enumerate(value):
        if isinstance(item, str):
            pool.append((item, 0.0))
        elif isinstance(item, list) and len(item) == 2:
            pool.append(
                (_expect_str(f"{key}[{i}][0]", item[0]), _expect_float(f"{key}[{i}][1]", item[1]))
            )
        else:
            raise ValidationError(f"$.{key}[{i}]: expected a string or [prefix, weight] pair")
    return tuple(pool)


_CONFIG_CHECKERS = {
    "data_path": _expect_str,
    "split_fractions": _expect_fractions,
    "split_seed": _expect_int,
    "metric": _expect_str,
    "epochs": _expect_int,
    "k": _expect_int,
    "w": _expect_int,
    "l": _expect_int,
    "temperature": _expect_float,
    "finetune_cap": _expect_int,
    "instruction": _expect_str,
    "exemplar_count": _expect_int,
    "exemplar_seed": _expect_int,
    "task_name": _expect_str,
    "task_summary": _expect_str,
    "label_semantics": _expect_str_list,
    "lr": _expect_float,
    "dims": _expect_int,
    "hash_seed": _expect_int,
    "shuffle_seed": _expect_int,
    "ta_backend": _expect_str,
    "sim_pool": _expect_pool,
    "sim_seed": _expect_int,
    "sim_temperature_scale": _expect_float,
    "base_url": _expect_str,
    "model_id": _expect_str,
    "request_timeout_s": _expect_float,
    "retry_backoff_s": _expect_float,
    "poll_interval_s": _expect_float,
    "finetune_timeout_s": _expect_float,
    "ta_lineage": _expect_str,
}


@dataclass(frozen=True)
class BestRecord:
    prefix: str
    score: float
    epoch: int


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_prefix: str
    train_loss: float
    val_best: float
    val_empty: float
    improvement_rate: float
    finetune_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_prefix": self.train_prefix,
            "train_loss": float(self.train_loss),
            "val_best": float(self.val_best),
            "val_empty": float(self.val_empty),
            "improvement_rate": float(self.improvement_rate),
            "finetune_error": self.finetune_error,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EpochRecord":
        return cls(
            epoch=obj["epoch"],
            train_prefix=obj["train_prefix"],
            train_loss=obj["train_loss"],
            val_best=obj["val_best"],
            val_empty=obj["val_empty"],
            improvement_rate=obj["improvement_rate"],
            finetune_error=obj["finetune_error"],
        )


@dataclass(frozen=True)
class RunState:
    """Everything needed to continue a run: epoch counts completed epochs."""

    epoch: int
    student: student_mod.StudentParams
    ta: ta_mod.TAHandle
    history: PrefixHistory
    best: BestRecord | None
    records: tuple[EpochRecord, ...]


@dataclass(frozen=True)
class RunReport:
    best: BestRecord
    records: tuple[EpochRecord, ...]

    @property
    def improvement_rates(self) -> list[float]:
        return [r.improvement_rate for r in self.records]

    def to_dict(self) -> dict:
        return {
            "best": {
                "prefix": self.best.prefix,
                "score": float(self.best.score),
                "epoch": self.best.epoch,
            },
            "best_state_file": f"state_epoch{self.best.epoch}.json",
            "epochs": [r.to_dict() for r in self.records],
            "improvement_rates": [float(r) for r in self.improvement_rates],
        }


@dataclass(frozen=True)
class RunContext:
    """Derived, non-serialized run inputs: datasets and the meta-prompt.
    Fully determined by the config, so resumed runs rebuild it."""

    cfg: RunConfig
    train: Dataset
    val: Dataset
    test: Dataset
    kind: MetricKind
    mp: ta_mod.MetaPrompt


def prepare(cfg: RunConfig) -> RunContext:
    data = load_jsonl(cfg.data_path)
    train, val, test = split(data, cfg.split_fractions, cfg.split_seed)
    exemplars = make_exemplars(train, cfg.exemplar_count, cfg.exemplar_seed)
    name = cfg.task_name or Path(cfg.data_path).stem
    summary = cfg.task_summary or (
        f"Classify each input text into one of {data.class_count} classes."
    )
    semantics = cfg.label_semantics
    if not semantics and data.class_names:
        semantics = tuple(f"{i}: {n}" for i, n in enumerate(data.class_names))
    description = DatasetDescription(
        name=name, task_summary=summary, label_semantics=semantics
    )
    mp = ta_mod.MetaPrompt(
        instruction=cfg.instruction, description=description, exemplars=exemplars
    )
    return RunContext(
        cfg=cfg,
        train=train,
        val=val,
        test=test,
        kind=MetricKind.from_name(cfg.metric),
        mp=mp,
    )


def build_ta(cfg: RunConfig) -> ta_mod.TAHandle:
    if cfg.ta_backend == "simulated":
        return ta_mod.simulated_handle(
            cfg.sim_pool, rng_seed=cfg.sim_seed, temperature_scale=cfg.sim_temperature_scale
        )
    client = RemoteClient(
        base_url=cfg.base_url,
        timeout=cfg.request_timeout_s,
        backoff_base=cfg.retry_backoff_s,
        poll_interval=cfg.poll_interval_s,
        finetune_timeout=cfg.finetune_timeout_s,
    )
    return ta_mod.remote_handle(client, cfg.model_id, lineage=cfg.ta_lineage)


def init_state(cfg: RunConfig, ctx: RunContext) -> RunState:
    data_class_count = ctx.train.class_count
    return RunState(
        epoch=0,
        student=student_mod.init_params(cfg.dims, data_class_count),
        ta=build_ta(cfg),
        history=PrefixHistory(capacity=cfg.k),
        best=None,
        records=(),
    )


def _epoch_shuffle_seed(base: int, epoch: int) -> int:
    return int(np.random.SeedSequence((base, epoch)).generate_state(1)[0])


def _rescore(
    history: PrefixHistory, frozen: student_mod.StudentParams, ctx: RunContext
) -> PrefixHistory:
    """Re-score carried-over entries against the new frozen checkpoint;
    metric values are checkpoint-relative, so stale scores would corrupt
    the sort. A history already at capacity is trimmed to its best half
    (the empty-prefix baseline always survives) to leave room for fresh
    search this epoch."""
    cfg = ctx.cfg
    if len(history) >= cfg.k:
        carry = max(1, cfg.k // 2)
        survivors = list(history.entries[-carry:])
        if all(e.prefix != "" for e in survivors):
            survivors.append(history.find(""))
        # collect() needs strictly fewer than k entries to have room to run
        while len(survivors) >= cfg.k:
            drop = next(i for i, e in enumerate(survivors) if e.prefix != "")
            survivors.pop(drop)
    else:
        survivors = list(history.entries)
    h = PrefixHistory(capacity=cfg.k)
    for entry in survivors:
        h = insert_sorted(
            h,
            ScoredPrefix(
                prefix=entry.prefix,
                score=score_prefix(frozen, entry.prefix, ctx.val, ctx.kind, cfg.hash_seed),
                origin=entry.origin,
            ),
        )
    return h


def run_epoch(state: RunState, ctx: RunContext) -> tuple[RunState, bytes | None]:
    """One full epoch: student training on the current best prefix, history
    collection against the frozen checkpoint, dialogue-gradient
    construction, and assistant-model tuning. A tuning failure is recorded
    and skipped; student progress is never thrown away."""
    cfg = ctx.cfg
    e = state.epoch
    history = state.history
    ta_handle = state.ta
    student = state.student

    if e == 0 and len(history) == 0:
        # Baseline-seed the history and ask the assistant model for the
        # very first prefix before any training happens.
        frozen0 = student_mod.freeze(student)
        history = seed_history(frozen0, ctx.val, ctx.kind, hash_seed=cfg.hash_seed, capacity=cfg.k)
        request = ta_mod.render_generation_request(ctx.mp, history, 1, cfg.temperature)
        s0 = ta_mod.generate(ta_handle, request, 1, cfg.temperature)[0]
        if history.find(s0) is None:
            history = insert_sorted(
                history,
                ScoredPrefix(
                    prefix=s0,
                    score=score_prefix(frozen0, s0, ctx.val, ctx.kind, cfg.hash_seed),
                    origin=Origin(kind="generated", epoch=0, round=-1),
                ),
            )
        train_prefix = s0
    else:
        train_prefix = history.best().prefix

    # (1) student training
    student = student_mod.unfreeze(student)
    student, train_loss = student_mod.train_pass(
        student,
        ctx.train,
        train_prefix,
        cfg.lr,
        hash_seed=cfg.hash_seed,
        shuffle_seed=_epoch_shuffle_seed(cfg.shuffle_seed, e),
    )

    # (2) freeze, refresh scores, collect
    student = student_mod.freeze(student)
    history = _rescore(history, student, ctx)
    history, rounds = collect(
        ta_handle,
        ctx.mp,
        student,
        ctx.val,
        ctx.kind,
        history,
        cfg.k,
        cfg.l,
        cfg.temperature,
        hash_seed=cfg.hash_seed,
        epoch=e,
    )

    # (3) dialogue gradients
    windows = build_windows(history, cfg.w)
    examples = cap(enrich(windows, ctx.mp), cfg.finetune_cap)

    # (4) assistant-model tuning
    finetune_error: str | None = None
    gradients: bytes | None = None
    if examples:
        gradients = serialize_jsonl(examples)
        try:
            ta_handle = ta_mod.finetune(ta_handle, gradients)
        except (TransportError, FinetuneError) as exc:
            finetune_error = str(exc)
            logger.warning("epoch %d: fine-tune failed, keeping current model: %s", e, exc)
    else:
        finetune_error = "no tuning examples (all window targets empty)"
        logger.warning("epoch %d: %s", e, finetune_error)

    val_best = history.best().score
    val_empty = history.find("").score
    record = EpochRecord(
        epoch=e,
        train_prefix=train_prefix,
        train_loss=train_loss,
        val_best=val_best,
        val_empty=val_empty,
        improvement_rate=improvement_rate(rounds),
        finetune_error=finetune_error,
    )
    best = state.best
    if best is None or val_best > best.score:
        best = BestRecord(prefix=history.best().prefix, score=val_best, epoch=e)
    new_state = RunState(
        epoch=e + 1,
        student=student,
        ta=ta_handle,
        history=history,
        best=best,
        records=state.records + (record,),
    )
    return new_state, gradients


def improvement_rate(rounds: list[RoundStats]) -> float:
    """Fraction of generated candidates that strictly beat the best score
    already in the history when they were proposed."""
    if not rounds:
        raise ValidationError("improvement_rate needs at least one round")
    generated = sum(r.generated for r in rounds)
    if generated == 0:
        raise ValidationError("no candidates were generated")
    return sum(r.exceeded_max for r in rounds) / generated


def state_to_json(state: RunState) -> str:
    obj = {
        "epoch": state.epoch,
        "student": student_mod.params_to_dict(state.student),
        "student_frozen": state.student.frozen,
        "ta": ta_mod.handle_to_dict(state.ta),
        "history": state.history.to_list(),
        "best": None
        if state.best is None
        else {
            "prefix": state.best.prefix,
            "score": float(state.best.score),
            "epoch": state.best.epoch,
        },
        "records": [r.to_dict() for r in state.records],
    }
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def state_from_json(text: str, cfg: RunConfig) -> RunState:
    obj = json.loads(text)
    client = None
    if obj["ta"]["backend"] == "remote":
        client = build_ta(cfg).client
    params = student_mod.params_from_dict(obj["student"])
    if obj["student_frozen"]:
        params = student_mod.freeze(params)
    best = None
    if obj["best"] is not None:
        best = BestRecord(
            prefix=obj["best"]["prefix"],
            score=obj["best"]["score"],
            epoch=obj["best"]["epoch"],
        )
    return RunState(
        epoch=obj["epoch"],
        student=params,
        ta=ta_mod.handle_from_dict(obj["ta"], client=client),
        history=PrefixHistory.from_list(obj["history"], capacity=cfg.k),
        best=best,
        records=tuple(EpochRecord.from_dict(r) for r in obj["records"]),
    )


def config_to_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), ensure_ascii=False, indent=2) + "\n"


def write_metrics_csv(report: RunReport, path: Path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_best", "val_empty", "improvement_rate"])
        for r in report.records:
            writer.writerow(
                [
                    r.epoch,
                    f"{r.train_loss:.6f}",
                    f"{r.val_best:.6f}",
                    f"{r.val_empty:.6f}",
                    f"{r.improvement_rate:.6f}",
                ]
            )


def run(cfg: RunConfig, out_dir: str | Path, resume_from: str | Path | None = None) -> RunReport:
    """Execute the configured run, checkpointing after every epoch.

    Writes into out_dir: config.json (resolved config), one
    state_epoch{N}.json and gradients_epoch{N}.jsonl per epoch,
    report.json, and metrics.csv. With resume_from, continues from a saved
    state and reproduces exactly what an uninterrupted run would have done.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = prepare(cfg)
    (out_dir / "config.json").write_text(config_to_json(cfg), encoding="utf-8")

    if resume_from is not None:
        state = state_from_json(Path(resume_from).read_text(encoding="utf-8"), cfg)
        logger.info("resuming from %s at epoch %d", resume_from, state.epoch)
    else:
        state = init_state(cfg, ctx)

    while state.epoch < cfg.epochs:
        epoch = state.epoch
        state, gradients = run_epoch(state, ctx)
        if gradients is not None:
            (out_dir / f"gradients_epoch{epoch}.jsonl").write_bytes(gradients)
        (out_dir / f"state_epoch{epoch}.json").write_text(
            state_to_json(state), encoding="utf-8"
        )
        rec = state.records[-1]
        logger.info(
            "epoch %d: train_loss=%.4f val_best=%.4f val_empty=%.4f rate=%.3f",
            epoch,
            rec.train_loss,
            rec.val_best,
            rec.val_empty,
            rec.improvement_rate,
        )

    report = RunReport(best=state.best, records=state.records)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    write_metrics_csv(report, out_dir / "metrics.csv")
    return report
