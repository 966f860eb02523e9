"""The assistant model that proposes prefix prompts and is itself tuned on
dialogue-formatted history windows.

Two backends share one interface: a remote OpenAI-compatible HTTP service,
and a deterministic simulated model that samples from a weighted prefix
pool. The simulated backend exists so the whole training loop can run and
be verified offline; its tuning rule (+1 pool weight per assistant-message
occurrence) is the smallest mechanism that lets dialogue-formatted tuning
provably shift generation toward better prefixes.
"""

import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .dataset import DatasetDescription, ExemplarSet
from .errors import ProtocolError, ValidationError

if TYPE_CHECKING:
    from .history import PrefixHistory
    from .remote import RemoteClient

# Proposed prefixes are clipped to this many words: short prefixes work at
# least as well in practice and keep both requests and tuning files small.
PREFIX_WORD_CAP = 10

# At most this many history lines are rendered per request; the list is
# ascending, so truncation keeps the best-scoring tail.
HISTORY_RENDER_CAP = 60


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValidationError(f"invalid chat role {self.role!r}")
        if not self.content:
            raise ValidationError("chat message content must be non-empty")


@dataclass(frozen=True)
class MetaPrompt:
    """Everything the assistant model is conditioned on besides the
    history: its standing instruction, the dataset description, and an
    optional handful of exemplars."""

    instruction: str
    description: DatasetDescription
    exemplars: ExemplarSet = field(default_factory=ExemplarSet)

    def __post_init__(self):
        if not self.instruction.strip():
            raise ValidationError("meta-prompt instruction must be non-empty")


@dataclass
class SimState:
    """Mutable state of the simulated backend.

    The pool maps candidate prefixes to sampling weights. Each generate
    call derives a fresh generator from (rng_seed, calls) and bumps the
    counter, so the state is trivially serializable and a restored run
    continues bit-identically.
    """

    pool: list[tuple[str, float]]
    rng_seed: int = 0
    temperature_scale: float = 1.0
    calls: int = 0

    def __post_init__(self):
        if not self.pool:
            raise ValidationError("simulated pool must be non-empty")
        seen = set()
        for prefix, weight in self.pool:
            if prefix in seen:
                raise ValidationError(f"duplicate pool prefix {prefix!r}")
            seen.add(prefix)
            if not np.isfinite(weight):
                raise ValidationError(f"non-finite pool weight for {prefix!r}")
        if self.temperature_scale <= 0:
            raise ValidationError("temperature_scale must be positive")


@dataclass(frozen=True)
class TAHandle:
    """Identity of the current assistant model. generation counts the
    fine-tunes applied in this lineage. lineage picks what each remote
    fine-tune starts from: "continual" tunes the latest tuned model,
    "from_base" always restarts from the original base model."""

    backend: str  # "simulated" | "remote"
    generation: int = 0
    sim: SimState | None = None
    model_id: str | None = None
    base_model_id: str | None = None
    client: "RemoteClient | None" = None
    lineage: str = "continual"


def simulated_handle(
    pool: Sequence[tuple[str, float]], rng_seed: int = 0, temperature_scale: float = 1.0
) -> TAHandle:
    state = SimState(
        pool=[(p, float(w)) for p, w in pool],
        rng_seed=rng_seed,
        temperature_scale=temperature_scale,
    )
    return TAHandle(backend="simulated", sim=state)


def remote_handle(
    client: "RemoteClient", model_id: str, lineage: str = "continual"
) -> TAHandle:
    if lineage not in ("continual", "from_base"):
        raise ValidationError(f"unknown lineage {lineage!r}")
    return TAHandle(
        backend="remote",
        model_id=model_id,
        base_model_id=model_id,
        client=client,
        lineage=lineage,
    )


def render_system_content(mp: MetaPrompt) -> str:
    """System-message text shared verbatim between generation requests and
    fine-tune examples, so the tuned model sees the same conditioning at
    train and inference time."""
    parts = [mp.instruction, ""]
    parts.append(f"DATASET: {mp.description.name}")
    parts.append(mp.description.task_summary)
    if mp.description.label_semantics:
        parts.append("LABELS:")
        parts.extend(mp.description.label_semantics)
    if mp.exemplars.examples:
        parts.append("")
        parts.append("EXEMPLARS:")
        parts.extend(f"{ex.text}→{ex.label}" for ex in mp.exemplars.examples)
    return "\n".join(parts)


def render_history_lines(entries: Sequence) -> list[str]:
    """One line per (prefix, score) pair, in the order given. Scores are
    fixed at 4 decimals so renders are byte-reproducible."""
    return [f"PREFIX: {e.prefix} | SCORE: {e.score:.4f}" for e in entries]


def render_generation_request(
    mp: MetaPrompt, history: "PrefixHistory", l: int, temperature: float = 1.0
) -> list[ChatMessage]:
    """Build the two-message chat request asking for l new prefixes,
    with the history rendered ascending (best last)."""
    if l < 1:
        raise ValidationError(f"l must be >= 1, got {l}")
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    entries = history.entries[-HISTORY_RENDER_CAP:]
    instruction = (
        f"Propose exactly {l} new prefix prompts for the task that would achieve a "
        f"higher score. Write one prefix per line, at most {PREFIX_WORD_CAP} words "
        "each, with no numbering, quotes, or commentary."
    )
    lines = render_history_lines(entries)
    user = "\n".join(lines) + "\n\n" + instruction if lines else instruction
    return [
        ChatMessage(role="system", content=render_system_content(mp)),
        ChatMessage(role="user", content=user),
    ]


_LIST_MARKER = re.compile(r"^\s*(?:[-*•>]+\s*|\(?\d+[.)\]:]?\s+)")
_QUOTE_CHARS = "\"'`“”‘’"


def _clean_line(line: str) -> str:
    line = _LIST_MARKER.sub("", line).strip()
    while len(line) >= 2 and line[0] in _QUOTE_CHARS and line[-1] in _QUOTE_CHARS:
        line = line[1:-1].strip()
    words = line.split()
    return " ".join(words[:PREFIX_WORD_CAP])


def parse_prefixes(completion_text: str, l: int) -> list[str]:
    """Extract up to l unique prefixes from a completion, one per line.
    List markers and surrounding quotes are stripped; each prefix is
    clipped to the word cap. Raises if nothing parseable remains."""
    out: list[str] = []
    seen: set[str] = set()
    for raw in completion_text.splitlines():
        prefix = _clean_line(raw)
        if not prefix or prefix in seen:
            continue
        seen.add(prefix)
        out.append(prefix)
        if len(out) == l:
            break
    if not out:
        raise ProtocolError("completion contained no parseable prefixes")
    return out


def _sim_generate(state: SimState, l: int, temperature: float) -> list[str]:
    """Sample l distinct pool prefixes, probability proportional to
    exp(weight / (temperature_scale * temperature)). Temperature 0 is the
    greedy limit: top-l by weight in pool order."""
    n = len(state.pool)
    take = min(l, n)
    weights = np.array([w for _, w in state.pool], dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence((state.rng_seed, state.calls)))
    state.calls += 1
    if temperature == 0.0:
        order = np.argsort(-weights, kind="stable")
    else:
        # Gumbel top-k: exactly successive softmax sampling w/o replacement.
        keys = weights / (state.temperature_scale * temperature) + rng.gumbel(size=n)
        order = np.argsort(-keys, kind="stable")
    return [state.pool[i][0] for i in order[:take]]


def generate(
    h: TAHandle, request: list[ChatMessage], l: int, temperature: float = 1.0
) -> list[str]:
    """Ask the assistant model for l candidate prefixes."""
    if l < 1:
        raise ValidationError(f"l must be >= 1, got {l}")
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    if h.backend == "simulated":
        return _sim_generate(h.sim, l, temperature)
    if h.backend == "remote":
        return h.client.chat_prefixes(h.model_id, request, l, temperature)
    raise ValidationError(f"unknown backend {h.backend!r}")


def finetune(h: TAHandle, training_file: bytes) -> TAHandle:
    """Tune the assistant model on a serialized dialogue file and return a
    handle to the tuned model (generation + 1). The input must parse as the
    fine-tune wire format with at least one example."""
    from .dialogue_gradient import parse_jsonl  # import here: module cycle

    examples = parse_jsonl(training_file)
    targets = [ex.messages[2].content for ex in examples]

    if h.backend == "simulated":
        state = h.sim
        index = {prefix: i for i, (prefix, _) in enumerate(state.pool)}
        for target in targets:
            if target in index:
                prefix, weight = state.pool[index[target]]
                state.pool[index[target]] = (prefix, weight + 1.0)
            else:
                index[target] = len(state.pool)
                state.pool.append((target, 1.0))
        return replace(h, generation=h.generation + 1)

    if h.backend == "remote":
        base = h.base_model_id if h.lineage == "from_base" else h.model_id
        tuned = h.client.run_finetune(base, training_file)
        return replace(h, model_id=tuned, generation=h.generation + 1)

    raise ValidationError(f"unknown backend {h.backend!r}")


def softmax_pool_mass(state: SimState, prefixes: Sequence[str]) -> float:
    """Probability mass the pool softmax (at temperature 1) places on the
    given prefixes: the chance a single greedy-free draw emits one of them."""
    weights = np.array([w for _, w in state.pool], dtype=np.float64)
    scaled = weights / state.temperature_scale
    e = np.exp(scaled - scaled.max())
    wanted = set(prefixes)
    mask = np.array([p in wanted for p, _ in state.pool])
    return float(e[mask].sum() / e.sum())


def sim_state_to_dict(state: SimState) -> dict:
    return {
        "pool": [[p, float(w)] for p, w in state.pool],
        "rng_seed": state.rng_seed,
        "temperature_scale": float(state.temperature_scale),
        "calls": state.calls,
    }


def sim_state_from_dict(obj: dict) -> SimState:
    return SimState(
        pool=[(p, float(w)) for p, w in obj["pool"]],
        rng_seed=obj["rng_seed"],
        temperature_scale=obj["temperature_scale"],
        calls=obj["calls"],
    )


def handle_to_dict(h: TAHandle) -> dict:
    out: dict = {"backend": h.backend, "generation": h.generation}
    if h.backend == "simulated":
        out["sim"] = sim_state_to_dict(h.sim)
    else:
        out["model_id"] = h.model_id
        out["base_model_id"] = h.base_model_id
        out["lineage"] = h.lineage
    return out


def handle_from_dict(obj: dict, client: "RemoteClient | None" = None) -> TAHandle:
    if obj["backend"] == "simulated":
        return TAHandle(
            backend="simulated",
            generation=obj["generation"],
            sim=sim_state_from_dict(obj["sim"]),
        )
    return TAHandle(
        backend="remote",
        generation=obj["generation"],
        model_id=obj["model_id"],
        base_model_id=obj["base_model_id"],
        client=client,
        lineage=obj.get("lineage", "continual"),
    )
