"""Fault-aware linear rankers over hashed n-gram features.

One model per classification task (binary / ternary / intent / exec /
exec-line), all sharing the same featurizer: a K-class linear head trained
with class-weighted cross-entropy, plus -- for exec-line -- a line-scoring
head that softmaxes a dot product between a weight vector and each encoded
line's features (sentinel rows stand for "no faulty line" and "line beyond
the encoded window").

Ranking uses the raw logit of the Correct class, pre-softmax. Softmax
probabilities would give the same order for a fixed class set; the raw
logit is what the last layer actually produces.

Training is plain mini-batch gradient descent on a deterministic schedule:
same data, same seed, same platform => bit-identical weights. Each epoch is
scored by ranked pass@1 on the validation partition and the best epoch's
weights are the ones returned.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .dataset import RankerExample, compute_class_weights
from .features import FeatureConfig, featurize, featurize_lines
from .harness import Candidate, Task
from .taxonomy import (
    BINARY_CLASSES,
    CORRECT,
    EXEC12_CLASSES,
    INTENT11_CLASSES,
    TERNARY_CLASSES,
)

MODEL_MAGIC = b"FRNK"
MODEL_VERSION = 1

TASK_CLASSES: dict[str, tuple[str, ...]] = {
    "binary": BINARY_CLASSES,
    "ternary": TERNARY_CLASSES,
    "intent": INTENT11_CLASSES,
    "exec": EXEC12_CLASSES,
    "exec-line": EXEC12_CLASSES,
}

_LABEL_FIELD = {
    "binary": "binary",
    "ternary": "ternary",
    "intent": "intent",
    "exec": "exec",
    "exec-line": "exec",
}


class LabelMismatch(ValueError):
    """Dataset labels are incompatible with the requested ranker task."""


class MissingLogprob(ValueError):
    """Logprob baseline requested but a candidate has no gen_logprob."""


class CorruptFile(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


class DegenerateDataset(UserWarning):
    """A class required by the task never occurs in the training partition."""


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 512
    lr: float = 1e-4
    seed: int = 0
    line_loss_weight: float = 1.0
    class_weights: Optional[dict[str, float]] = None
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass
class RankerModel:
    task: str
    features: FeatureConfig
    classes: tuple[str, ...]
    weights: np.ndarray                 # (K, D) float32
    bias: np.ndarray                    # (K,) float32
    line_weights: Optional[np.ndarray] = None   # (D,) float32
    line_bias: float = 0.0
    meta: dict = field(default_factory=dict)
    version: int = MODEL_VERSION

    @property
    def has_line_head(self) -> bool:
        return self.line_weights is not None


def models_equal(a: RankerModel, b: RankerModel) -> bool:
    """Field-for-field equality, arrays compared exactly."""
    if (a.task, a.features, tuple(a.classes), a.version, a.meta, a.line_bias) != \
            (b.task, b.features, tuple(b.classes), b.version, b.meta, b.line_bias):
        return False
    if not (np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)):
        return False
    if (a.line_weights is None) != (b.line_weights is None):
        return False
    return a.line_weights is None or np.array_equal(a.line_weights, b.line_weights)


# ---------------------------------------------------------------------------
# vectorization


def _to_csr(vecs: Sequence[dict[int, int]], dim: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vecs:
        for idx, count in sorted(vec.items()):
            indices.append(idx)
            data.append(float(count))
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(vecs), dim),
    )


@dataclass
class _Prepared:
    X: sparse.csr_matrix
    y: np.ndarray
    task_ids: list[str]
    candidate_ids: list[str]
    is_correct: np.ndarray
    # line head only:
    line_rows: Optional[sparse.csr_matrix] = None
    seg_ptr: Optional[np.ndarray] = None
    line_local: Optional[np.ndarray] = None
    line_global: Optional[np.ndarray] = None


def _prepare(examples: Sequence[RankerExample], task: str, config: TrainConfig) -> _Prepared:
    classes = TASK_CLASSES[task]
    class_index = {c: i for i, c in enumerate(classes)}
    feats = []
    y = []
    for ex in examples:
        label = ex.label_for(_LABEL_FIELD[task])
        if label not in class_index:
            raise LabelMismatch(f"label {label!r} not valid for task {task!r}")
        y.append(class_index[label])
        feats.append(featurize(ex.prompt, ex.code, config.features))
    prepared = _Prepared(
        X=_to_csr(feats, config.features.dim),
        y=np.asarray(y, dtype=np.int64),
        task_ids=[ex.task_id for ex in examples],
        candidate_ids=[ex.candidate_id for ex in examples],
        is_correct=np.asarray([ex.labels.binary == CORRECT for ex in examples]),
    )
    if task != "exec-line":
        return prepared

    all_rows: list[dict[int, int]] = []
    seg_ptr = [0]
    local = []
    for ex in examples:
        lf = featurize_lines(ex.prompt, ex.code, config.features)
        if ex.labels.line_class >= len(lf.rows):
            raise LabelMismatch(
                f"{ex.task_id}/{ex.candidate_id}: line_class {ex.labels.line_class} "
                f"outside the {len(lf.rows)} encoded rows -- labels were built "
                "with a different feature config"
            )
        all_rows.extend(lf.rows)
        seg_ptr.append(len(all_rows))
        local.append(ex.labels.line_class)
    prepared.line_rows = _to_csr(all_rows, config.features.dim)
    prepared.seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    prepared.line_local = np.asarray(local, dtype=np.int64)
    prepared.line_global = prepared.seg_ptr[:-1] + prepared.line_local
    return prepared


# ---------------------------------------------------------------------------
# loss / gradients (exact analytics; finite-difference-checked in tests)


def _class_loss_grad(W: np.ndarray, b: np.ndarray, X: sparse.csr_matrix,
                     y: np.ndarray, ex_weight: np.ndarray):
    n = X.shape[0]
    z = X @ W.T + b
    z -= z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    p = expz / expz.sum(axis=1, keepdims=True)
    nll = -np.log(np.clip(p[np.arange(n), y], 1e-300, None))
    loss = float(np.dot(ex_weight, nll) / n)
    g = p
    g[np.arange(n), y] -= 1.0
    g *= (ex_weight / n)[:, None]
    dW = np.asarray(X.T @ g).T
    db = g.sum(axis=0)
    return loss, dW, db


def _line_loss_grad(S: np.ndarray, b_line: float, prep: _Prepared, batch: np.ndarray,
                    X: sparse.csr_matrix, ex_weight: np.ndarray):
    """Segmented softmax over each example's line rows.

    Row score = S . (line features + shared global features) + bias. The
    global and bias terms are constant within an example's softmax, so their
    gradients are exactly zero; they are still included in the forward pass.
    """
    n = len(batch)
    row_slices = [slice(prep.seg_ptr[i], prep.seg_ptr[i + 1]) for i in batch]
    seg_lens = np.asarray([s.stop - s.start for s in row_slices], dtype=np.int64)
    row_idx = np.concatenate([np.arange(s.start, s.stop) for s in row_slices])
    L = prep.line_rows[row_idx]
    seg_of_row = np.repeat(np.arange(n), seg_lens)

    g_dot = np.asarray(X[batch] @ S).ravel()
    raw = np.asarray(L @ S).ravel() + g_dot[seg_of_row] + b_line

    seg_max = np.full(n, -np.inf)
    np.maximum.at(seg_max, seg_of_row, raw)
    expv = np.exp(raw - seg_max[seg_of_row])
    seg_sum = np.zeros(n)
    np.add.at(seg_sum, seg_of_row, expv)
    p = expv / seg_sum[seg_of_row]

    seg_start = np.concatenate([[0], np.cumsum(seg_lens)[:-1]])
    label_rows = seg_start + prep.line_local[batch]
    nll = -np.log(np.clip(p[label_rows], 1e-300, None))
    loss = float(np.dot(ex_weight, nll) / n)

    dscore = p.copy()
    dscore[label_rows] -= 1.0
    dscore *= (ex_weight / n)[seg_of_row]
    dS = np.asarray(L.T @ dscore).ravel()
    # global-feature and bias contributions: sum of dscore per segment == 0
    db_line = float(dscore.sum())
    return loss, dS, db_line


# ---------------------------------------------------------------------------
# training


def _ranked_pass1(scores: np.ndarray, prep: _Prepared) -> float:
    by_task: dict[str, list[int]] = {}
    for i, tid in enumerate(prep.task_ids):
        by_task.setdefault(tid, []).append(i)
    hits = 0
    for tid, rows in by_task.items():
        top = min(rows, key=lambda i: (-scores[i], prep.candidate_ids[i]))
        hits += bool(prep.is_correct[top])
    return hits / len(by_task)


def _resolve_class_weights(task: str, y: np.ndarray, config: TrainConfig) -> np.ndarray:
    classes = TASK_CLASSES[task]
    counts = {c: int((y == i).sum()) for i, c in enumerate(classes)}
    missing = [c for c, n in counts.items() if n == 0]
    if missing:
        warnings.warn(
            f"classes never seen in training data: {', '.join(missing)} (weight 0)",
            DegenerateDataset,
        )
    if config.class_weights is not None:
        table = {c: config.class_weights.get(c, 0.0) for c in classes}
    else:
        table = compute_class_weights(counts)
    return np.asarray([table[c] for c in classes])


def _line_class_weights(line_labels: np.ndarray) -> dict[int, float]:
    values, counts = np.unique(line_labels, return_counts=True)
    raw = compute_class_weights({str(v): int(n) for v, n in zip(values, counts)})
    return {int(v): raw[str(v)] for v in values}


def train(train_examples: Sequence[RankerExample], val_examples: Sequence[RankerExample],
          task: str, config: TrainConfig = TrainConfig()) -> RankerModel:
    """Train one fault-aware ranker head (plus line head for exec-line).

    Mini-batch gradient descent on class-weighted cross-entropy; the epoch
    with the best validation ranked pass@1 supplies the returned weights.
    Deterministic for a fixed (data, config, seed).
    """
    if task not in TASK_CLASSES:
        raise ValueError(f"unknown ranker task {task!r}")
    if not val_examples:
        raise ValueError("validation partition must be nonempty")
    classes = TASK_CLASSES[task]
    k = len(classes)
    dim = config.features.dim

    prep = _prepare(train_examples, task, config)
    val = _prepare(val_examples, task, config)
    n = prep.X.shape[0]

    class_w = _resolve_class_weights(task, prep.y, config)
    ex_weight = class_w[prep.y]
    line_head = task == "exec-line"
    if line_head:
        line_w_table = _line_class_weights(prep.line_local)
        line_ex_weight = np.asarray([line_w_table[int(v)] for v in prep.line_local])

    W = np.zeros((k, dim))
    b = np.zeros(k)
    S = np.zeros(dim)
    b_line = 0.0

    rng = np.random.default_rng(config.seed)
    best = (-1.0, None)
    history: list[dict] = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            loss, dW, db = _class_loss_grad(W, b, prep.X[batch], prep.y[batch],
                                            ex_weight[batch])
            if line_head:
                lloss, dS, dbl = _line_loss_grad(S, b_line, prep, batch, prep.X,
                                                 line_ex_weight[batch])
                loss += config.line_loss_weight * lloss
                S -= config.lr * config.line_loss_weight * dS
                b_line -= config.lr * config.line_loss_weight * dbl
            W -= config.lr * dW
            b -= config.lr * db
            epoch_loss += loss * len(batch)
        val_scores = np.asarray(val.X @ W[0]).ravel() + b[0]
        val_rp1 = _ranked_pass1(val_scores, val)
        history.append({"epoch": epoch, "train_loss": epoch_loss / n,
                        "val_ranked_pass1": val_rp1})
        if val_rp1 > best[0]:
            best = (val_rp1, (W.copy(), b.copy(), S.copy(), b_line))

    Wb, bb, Sb, blb = best[1]
    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "lr": config.lr,
        "batch_size": config.batch_size,
        "line_loss_weight": config.line_loss_weight if line_head else None,
        "best_epoch": int(np.argmax([h["val_ranked_pass1"] for h in history])),
        "best_val_ranked_pass1": best[0],
        "history": history,
    }
    return RankerModel(
        task=task,
        features=config.features,
        classes=classes,
        weights=Wb.astype(np.float32),
        bias=bb.astype(np.float32),
        line_weights=Sb.astype(np.float32) if line_head else None,
        line_bias=float(np.float32(blb)) if line_head else 0.0,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# scoring / ranking


def _sparse_dot(vec: dict[int, int], row: np.ndarray) -> float:
    return float(sum(row[i] * cnt for i, cnt in vec.items()))


def _logits(model: RankerModel, vec: dict[int, int]) -> np.ndarray:
    z = model.bias.astype(np.float64).copy()
    for i, cnt in vec.items():
        z += model.weights[:, i].astype(np.float64) * cnt
    return z


def score(model: RankerModel, prompt: str, code: str) -> float:
    """Raw pre-softmax logit of the Correct class; higher = more plausible."""
    vec = featurize(prompt, code, model.features)
    return _sparse_dot(vec, model.weights[0].astype(np.float64)) + float(model.bias[0])


def predict_proba(model: RankerModel, prompt: str, code: str) -> dict[str, float]:
    """Softmax class distribution (ranking itself uses the raw logit)."""
    z = _logits(model, featurize(prompt, code, model.features))
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return dict(zip(model.classes, p.tolist()))


def predict(model: RankerModel, prompt: str, code: str) -> dict:
    """Score plus argmax class (and argmax line for exec-line models)."""
    vec = featurize(prompt, code, model.features)
    z = _logits(model, vec)
    out = {
        "score": float(z[0]),
        "predicted_class": model.classes[int(np.argmax(z))],
    }
    if model.has_line_head:
        lf = featurize_lines(prompt, code, model.features)
        S = model.line_weights.astype(np.float64)
        g = _sparse_dot(vec, S)
        row_scores = [g + _sparse_dot(row, S) + model.line_bias for row in lf.rows]
        out["predicted_line"] = int(np.argmax(row_scores))
    return out


def rank(model: RankerModel, task: Task, candidates: Sequence[Candidate]
         ) -> list[tuple[Candidate, float]]:
    """Candidates in descending score order; ties broken by candidate_id."""
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    scored = [(cand, score(model, task.prompt, cand.code)) for cand in candidates]
    scored.sort(key=lambda cs: (-cs[1], cs[0].candidate_id))
    return scored


def rank_by_logprob(candidates: Sequence[Candidate]) -> list[tuple[Candidate, float]]:
    """Generation-probability baseline: descending sum of token logprobs."""
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    missing = [c.candidate_id for c in candidates if c.gen_logprob is None]
    if missing:
        raise MissingLogprob(f"candidates without gen_logprob: {missing}")
    scored = [(cand, float(cand.gen_logprob)) for cand in candidates]
    scored.sort(key=lambda cs: (-cs[1], cs[0].candidate_id))
    return scored


# ---------------------------------------------------------------------------
# persistence: FRNK magic, u32 format version, u32 header length, header
# JSON, then little-endian float32 weight blocks (W row-major, b, line head)


def save_model(model: RankerModel, path: str) -> None:
    header = {
        "task": model.task,
        "features": model.features.to_record(),
        "classes": list(model.classes),
        "has_line_head": model.has_line_head,
        "line_bias": model.line_bias,
        "meta": model.meta,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", model.version))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(model.weights.astype("<f4").tobytes())
        fh.write(model.bias.astype("<f4").tobytes())
        if model.has_line_head:
            fh.write(model.line_weights.astype("<f4").tobytes())


def load_model(path: str) -> RankerModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MODEL_MAGIC:
        raise CorruptFile(f"{path}: not a ranker model file")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != MODEL_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, supported {MODEL_VERSION}")
    header_len = struct.unpack("<I", blob[8:12])[0]
    if len(blob) < 12 + header_len:
        raise CorruptFile(f"{path}: truncated header")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
        features = FeatureConfig.from_record(header["features"])
        classes = tuple(header["classes"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptFile(f"{path}: bad header ({exc})") from exc

    k, dim = len(classes), features.dim
    expected = k * dim + k + (dim if header["has_line_head"] else 0)
    body = np.frombuffer(blob[12 + header_len:], dtype="<f4")
    if body.size != expected:
        raise CorruptFile(f"{path}: weight block holds {body.size} floats, need {expected}")
    weights = body[:k * dim].reshape(k, dim).copy()
    bias = body[k * dim:k * dim + k].copy()
    line_weights = body[k * dim + k:].copy() if header["has_line_head"] else None
    return RankerModel(
        task=header["task"],
        features=features,
        classes=classes,
        weights=weights,
        bias=bias,
        line_weights=line_weights,
        line_bias=header.get("line_bias", 0.0),
        meta=header.get("meta", {}),
        version=version,
    )
