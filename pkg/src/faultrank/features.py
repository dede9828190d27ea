"""Hashed n-gram features over (prompt, code) pairs.

The prompt and code token streams are joined with a separator sentinel,
truncated to a token budget, and hashed into a fixed-dimension sparse count
vector (unigrams through `ngram_order`-grams, 64-bit FNV-1a, modulo the
power-of-two dimension). The line featurizer additionally produces one
sparse row per encoded code line, bracketed by two sentinel pseudo-lines:
row 0 meaning "no faulty line" and row m+1 meaning "faulty line beyond the
encoded window".
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

SEP_TOKEN = "\x1esep\x1e"
_LINE_START_SENTINEL = "\x1eline0\x1e"
_LINE_END_SENTINEL = "\x1elineend\x1e"
_NGRAM_JOIN = "\x1f"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class FeatureConfig:
    dim: int = 2 ** 18
    max_tokens: int = 512
    ngram_order: int = 3

    def __post_init__(self):
        if self.dim < 2 or self.dim & (self.dim - 1):
            raise ValueError("dim must be a power of two >= 2")
        if self.max_tokens < 8:
            raise ValueError("max_tokens must be >= 8")
        if not 1 <= self.ngram_order <= 4:
            raise ValueError("ngram_order must be in 1..4")

    def to_record(self) -> dict:
        return {"dim": self.dim, "max_tokens": self.max_tokens,
                "ngram_order": self.ngram_order, "hash": "fnv1a64"}

    @classmethod
    def from_record(cls, rec: dict) -> "FeatureConfig":
        return cls(dim=rec["dim"], max_tokens=rec["max_tokens"],
                   ngram_order=rec["ngram_order"])


def tokenize(text: str) -> list[str]:
    """Split on whitespace and punctuation boundaries, keeping punctuation."""
    return _TOKEN_RE.findall(text)


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _hash_feature(namespace: str, parts: tuple[str, ...], dim: int) -> int:
    key = namespace + _NGRAM_JOIN + _NGRAM_JOIN.join(parts)
    return fnv1a64(key.encode("utf-8")) & (dim - 1)


def _count_ngrams(tokens: list[str], config: FeatureConfig, namespace: str) -> dict[int, int]:
    vec: dict[int, int] = {}
    for n in range(1, config.ngram_order + 1):
        for i in range(len(tokens) - n + 1):
            idx = _hash_feature(f"{namespace}{n}", tuple(tokens[i:i + n]), config.dim)
            vec[idx] = vec.get(idx, 0) + 1
    return vec


def featurize(prompt: str, code: str, config: FeatureConfig = FeatureConfig()) -> dict[int, int]:
    """Sparse n-gram count vector for one (prompt, code) pair.

    The token stream is tokens(prompt) + separator + tokens(code), truncated
    to `max_tokens`; n-grams may straddle the separator. Empty input yields
    a vector holding only the separator's features.
    """
    tokens = tokenize(prompt) + [SEP_TOKEN] + tokenize(code)
    return _count_ngrams(tokens[:config.max_tokens], config, "g")


@dataclass
class LineFeatures:
    """Per-line sparse features plus the example's shared global vector.

    rows[0] and rows[m+1] are the sentinel pseudo-lines; rows[1..m] carry
    the unigram features of the corresponding encoded code line. Scoring a
    row means scoring rows[i] merged with global_vec (the shared part adds
    the same mass to every row, so it cancels in the per-example softmax).
    """

    global_vec: dict[int, int]
    rows: list[dict[int, int]] = field(default_factory=list)

    @property
    def num_encoded_lines(self) -> int:
        return len(self.rows) - 2


def count_encoded_lines(prompt: str, code: str, config: FeatureConfig = FeatureConfig()) -> int:
    """Number of code lines that fit the token budget after the prompt.

    Each line consumes its tokens plus one slot for its newline; a line is
    encoded when at least one slot of budget remains at its start. Matches
    the line featurizer's row count.
    """
    return len(_encoded_line_tokens(prompt, code, config))


def _encoded_line_tokens(prompt: str, code: str, config: FeatureConfig) -> list[list[str]]:
    budget = config.max_tokens - min(len(tokenize(prompt)), config.max_tokens) - 1
    encoded = []
    for line in code.split("\n"):
        if budget <= 0:
            break
        line_tokens = tokenize(line)
        encoded.append(line_tokens)
        budget -= len(line_tokens) + 1
    return encoded


def featurize_lines(prompt: str, code: str,
                    config: FeatureConfig = FeatureConfig()) -> LineFeatures:
    """Line-level feature rows for the error-line head."""
    dim = config.dim
    rows = [{_hash_feature("s", (_LINE_START_SENTINEL,), dim): 1}]
    for line_tokens in _encoded_line_tokens(prompt, code, config):
        row: dict[int, int] = {}
        for tok in line_tokens:
            idx = _hash_feature("l", (tok,), dim)
            row[idx] = row.get(idx, 0) + 1
        rows.append(row)
    rows.append({_hash_feature("s", (_LINE_END_SENTINEL,), dim): 1})
    return LineFeatures(global_vec=featurize(prompt, code, config), rows=rows)
