"""The trainable text classifier: softmax regression over hashed features
of the prefix-augmented input.

Features are hashed unigram counts of the concatenated token stream plus
prefix-token x input-token interaction counts. The interactions are what
let a prefix reshape the decision surface instead of merely shifting class
priors, so the prefix search has something real to optimize. Hashing is
FNV-1a 64-bit over UTF-8 token bytes with the seed XORed into the offset
basis; everything here is bit-stable across runs and platforms.
"""

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import StateError, ValidationError

FeatureVector = dict[int, float]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

# Joins prefix token and input token into one interaction key; \x01 cannot
# appear in whitespace-split tokens, so keys never collide with unigrams.
_PAIR_SEP = "\x01"

DEFAULT_DIMS = 1 << 18


@lru_cache(maxsize=1 << 17)
def fnv1a64(data: str, seed: int = 0) -> int:
    """FNV-1a 64-bit hash of the UTF-8 bytes of `data`."""
    h = _FNV_OFFSET ^ seed
    for byte in data.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def featurize(prefix: str, text: str, dims: int, hash_seed: int = 0) -> FeatureVector:
    """Hashed feature counts for the input `text` under `prefix`.

    Unigram counts over the concatenated prefix+text token stream, plus a
    count for every (prefix token, text token) pair. dims must be a power
    of two >= 2.
    """
    if dims < 2 or dims & (dims - 1):
        raise ValidationError(f"dims must be a power of two >= 2, got {dims}")
    prefix_tokens = tokenize(prefix)
    text_tokens = tokenize(text)
    features: FeatureVector = {}
    for tok in prefix_tokens + text_tokens:
        idx = fnv1a64(tok, hash_seed) % dims
        features[idx] = features.get(idx, 0.0) + 1.0
    for p_tok in prefix_tokens:
        for x_tok in text_tokens:
            idx = fnv1a64(p_tok + _PAIR_SEP + x_tok, hash_seed) % dims
            features[idx] = features.get(idx, 0.0) + 1.0
    return features


@dataclass(frozen=True)
class StudentParams:
    """Weights and bias of the classifier. Treated as immutable: training
    operations return new instances and refuse to run while frozen."""

    weights: np.ndarray  # (class_count, dims)
    bias: np.ndarray  # (class_count,)
    dims: int
    class_count: int
    frozen: bool = False


@dataclass(frozen=True)
class Gradient:
    weights: np.ndarray  # (class_count, dims)
    bias: np.ndarray  # (class_count,)


def init_params(dims: int, class_count: int) -> StudentParams:
    """Zero-initialized parameters: the uniform-probability starting point."""
    if dims < 2 or dims & (dims - 1):
        raise ValidationError(f"dims must be a power of two >= 2, got {dims}")
    if class_count < 2:
        raise ValidationError(f"class_count must be >= 2, got {class_count}")
    return StudentParams(
        weights=np.zeros((class_count, dims)),
        bias=np.zeros(class_count),
        dims=dims,
        class_count=class_count,
    )


def freeze(params: StudentParams) -> StudentParams:
    return replace(params, frozen=True)


def unfreeze(params: StudentParams) -> StudentParams:
    return replace(params, frozen=False)


def _logits(params: StudentParams, f: FeatureVector) -> np.ndarray:
    z = params.bias.copy()
    if f:
        idx = np.fromiter(f.keys(), dtype=np.int64, count=len(f))
        vals = np.fromiter(f.values(), dtype=np.float64, count=len(f))
        z += params.weights[:, idx] @ vals
    return z


def forward(params: StudentParams, f: FeatureVector) -> np.ndarray:
    """Class probability vector softmax(W·f + b)."""
    z = _logits(params, f)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def loss(probs: np.ndarray, label: int) -> float:
    """Cross-entropy -ln(probs[label])."""
    if not 0 <= label < len(probs):
        raise ValidationError(f"label {label} out of range for {len(probs)} classes")
    return float(-np.log(probs[label]))


def grad(params: StudentParams, f: FeatureVector, label: int) -> Gradient:
    """Analytic cross-entropy gradient: dW_c = (p_c - 1{c=label})·f,
    db_c = p_c - 1{c=label}."""
    probs = forward(params, f)
    coef = probs.copy()
    coef[label] -= 1.0
    gw = np.zeros_like(params.weights)
    for idx, val in f.items():
        gw[:, idx] += coef * val
    return Gradient(weights=gw, bias=coef)


def sgd_step(params: StudentParams, g: Gradient, lr: float) -> StudentParams:
    """One gradient-descent step theta - lr·g. Refuses frozen params."""
    if params.frozen:
        raise StateError("cannot update frozen params")
    if lr < 0:
        raise ValidationError(f"lr must be >= 0, got {lr}")
    return replace(params, weights=params.weights - lr * g.weights, bias=params.bias - lr * g.bias)


def train_pass(
    params: StudentParams,
    train: Dataset,
    prefix: str,
    lr: float,
    hash_seed: int = 0,
    shuffle_seed: int = 0,
) -> tuple[StudentParams, float]:
    """One shuffled pass of per-example SGD with `prefix` prepended to
    every input. Returns the new params and the mean pre-update loss.

    The update is applied sparsely (only at an example's active feature
    indices); coordinates outside the support have zero gradient, so this
    matches grad + sgd_step exactly.
    """
    if params.frozen:
        raise StateError("cannot train frozen params")
    if lr < 0:
        raise ValidationError(f"lr must be >= 0, got {lr}")
    weights = params.weights.copy()
    bias = params.bias.copy()
    order = np.random.default_rng(shuffle_seed).permutation(len(train))
    total_loss = 0.0
    for i in order:
        ex = train.examples[i]
        f = featurize(prefix, ex.text, params.dims, hash_seed)
        z = bias.copy()
        if f:
            idx = np.fromiter(f.keys(), dtype=np.int64, count=len(f))
            vals = np.fromiter(f.values(), dtype=np.float64, count=len(f))
            z += weights[:, idx] @ vals
        z -= z.max()
        e = np.exp(z)
        probs = e / e.sum()
        total_loss += -np.log(probs[ex.label])
        coef = probs.copy()
        coef[ex.label] -= 1.0
        if f:
            weights[:, idx] -= lr * np.outer(coef, vals)
        bias -= lr * coef
    new_params = replace(params, weights=weights, bias=bias)
    return new_params, float(total_loss / len(train))


def predict(params: StudentParams, prefix: str, text: str, hash_seed: int = 0) -> int:
    """Argmax class for the prefixed input; ties break to the lowest index."""
    f = featurize(prefix, text, params.dims, hash_seed)
    return int(np.argmax(_logits(params, f)))


def params_to_dict(params: StudentParams) -> dict:
    return {
        "dims": params.dims,
        "class_count": params.class_count,
        "bias": [float(x) for x in params.bias],
        "weights": [float(x) for x in params.weights.reshape(-1)],
    }


def save_checkpoint(params: StudentParams, path: str | Path) -> None:
    """Write params as JSON {dims, class_count, bias, weights(row-major)}.
    Floats serialize via repr, so the round-trip is lossless."""
    Path(path).write_text(json.dumps(params_to_dict(params)), encoding="utf-8")


def load_checkpoint(path: str | Path) -> StudentParams:
    return params_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def params_from_dict(obj: dict) -> StudentParams:
    dims = obj["dims"]
    class_count = obj["class_count"]
    weights = np.array(obj["weights"], dtype=np.float64).reshape(class_count, dims)
    bias = np.array(obj["bias"], dtype=np.float64)
    if bias.shape != (class_count,):
        raise ValidationError("bias length does not match class_count")
    return StudentParams(weights=weights, bias=bias, dims=dims, class_count=class_count)
