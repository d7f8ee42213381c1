"""Order-n token language models, sequence entropy and byte entropy."""
from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ingest import TokenSequence

START = "\x02<s>"
UNKNOWN = "\x02<unk>"
FORMAT_NAME = "logentropy-ngram"
FORMAT_VERSION = 1
DEFAULT_ORDER = 5
DEFAULT_ALPHA = 1.0


class UnseenEventError(ValueError):
    """An event with zero count was queried with alpha = 0."""

    def __init__(self, message: str, position: int | None = None, window: int | None = None):
        super().__init__(message)
        self.position = position
        self.window = window

    def __str__(self) -> str:
        parts = [self.args[0]]
        if self.position is not None:
            parts.append(f"position {self.position}")
        if self.window is not None:
            parts.append(f"window {self.window}")
        return ", ".join(parts)


class ModelFormatError(ValueError):
    pass


@dataclass
class NGramModel:
    order: int
    alpha: float = DEFAULT_ALPHA
    vocab: set[str] = field(default_factory=set)
    # history tuple (length 0..order-1) -> successor counts
    context_counts: dict[tuple[str, ...], dict[str, int]] = field(default_factory=dict)
    total_tokens: int = 0
    _totals: dict[tuple[str, ...], int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self._totals:
            self._totals = {h: sum(t.values()) for h, t in self.context_counts.items()}

    def count(self, ngram: Sequence[str]) -> int:
        """Number of times ``ngram`` was observed (last token after the rest)."""
        ngram = tuple(ngram)
        if not ngram:
            return self.total_tokens
        return self.context_counts.get(ngram[:-1], {}).get(ngram[-1], 0)

    def history_count(self, history: Sequence[str]) -> int:
        return self._totals.get(tuple(history), 0)

    def with_order(self, order: int, alpha: float | None = None) -> NGramModel:
        """A model of lower order sharing this model's counts.

        Histories of length k are counted the same way for every order >= k+1,
        so a high-order model carries every lower-order model inside it.
        """
        if not 1 <= order <= self.order:
            raise ValueError(f"order must be in 1..{self.order}")
        ctx = {h: t for h, t in self.context_counts.items() if len(h) < order}
        return NGramModel(
            order,
            self.alpha if alpha is None else alpha,
            self.vocab,
            ctx,
            self.total_tokens,
            {h: self._totals[h] for h in ctx},
        )

    def _history(self, history: Sequence[str]) -> tuple[str, ...]:
        k = self.order - 1
        if k == 0:
            return ()
        h = [t if t in self.vocab or t == START else UNKNOWN for t in history[-k:]]
        if len(h) < k:
            h = [START] * (k - len(h)) + h
        return tuple(h)

    def prob(self, history: Sequence[str], token: str) -> float:
        return self._prob(self._history(history), token)

    def _prob(self, h: tuple[str, ...], token: str) -> float:
        if token not in self.vocab:
            token = UNKNOWN
        total = self._totals.get(h, 0)
        hit = self.context_counts[h].get(token, 0) if total else 0
        if self.alpha == 0:
            if total == 0:
                raise UnseenEventError(f"history {_show(h)} never observed")
            if hit == 0:
                raise UnseenEventError(f"{token!r} never observed after {_show(h)}")
            return hit / total
        return (hit + self.alpha) / (total + self.alpha * (len(self.vocab) + 1))

    def logprob_sum(self, tokens: Sequence[str]) -> float:
        """Sum of -log2 p over ``tokens`` scored as one record (start-padded)."""
        k = self.order - 1
        seq = [START] * k + [t if t in self.vocab else UNKNOWN for t in tokens]
        total = 0.0
        for i in range(k, len(seq)):
            try:
                p = self._prob(tuple(seq[i - k : i]), seq[i])
            except UnseenEventError as exc:
                raise UnseenEventError(exc.args[0], position=i - k) from None
            total -= math.log2(p)
        return total


def _show(h: tuple[str, ...]) -> str:
    return "(" + " ".join("<s>" if t == START else t for t in h) + ")"


def _as_tokens(item: TokenSequence | Sequence[str]) -> Sequence[str]:
    return item.tokens if isinstance(item, TokenSequence) else item


def train(
    records: Iterable[TokenSequence | Sequence[str]],
    order: int = DEFAULT_ORDER,
    alpha: float = DEFAULT_ALPHA,
) -> NGramModel:
    """Count k-grams (k <= order) within each record; records are start-padded
    and no n-gram spans two records."""
    if order < 1:
        raise ValueError("order must be >= 1")
    k = order - 1
    ctx: dict[tuple[str, ...], dict[str, int]] = {}
    vocab: set[str] = set()
    n_tokens = 0
    for item in records:
        tokens = list(_as_tokens(item))
        if not tokens:
            continue
        vocab.update(tokens)
        n_tokens += len(tokens)
        seq = [START] * k + tokens
        for i in range(k, len(seq)):
            a = seq[i]
            for j in range(order):
                h = tuple(seq[i - j : i])
                table = ctx.get(h)
                if table is None:
                    table = ctx[h] = {}
                table[a] = table.get(a, 0) + 1
    return NGramModel(order, alpha, vocab, ctx, n_tokens)


def sequence_entropy(model: NGramModel, tokens: TokenSequence | Sequence[str]) -> float:
    """Average -log2 p(token | previous order-1 tokens), in bits per token."""
    tokens = _as_tokens(tokens)
    if len(tokens) == 0:
        raise ValueError("cannot score an empty token sequence")
    return model.logprob_sum(tokens) / len(tokens)


def corpus_entropy(model: NGramModel, records: Iterable[TokenSequence | Sequence[str]]) -> float:
    """Token-weighted entropy over several records, each padded separately."""
    bits = 0.0
    n = 0
    for item in records:
        tokens = _as_tokens(item)
        if tokens:
            bits += model.logprob_sum(tokens)
            n += len(tokens)
    if n == 0:
        raise ValueError("cannot score an empty corpus")
    return bits / n


def char_entropy(data: bytes | str) -> float:
    """Shannon entropy of the byte distribution of ``data`` in bits per byte."""
    if isinstance(data, str):
        data = data.encode("utf-8", "surrogateescape")
    if not data:
        raise ValueError("cannot compute entropy of an empty span")
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(data)
    return float(-(p * np.log2(p)).sum()) + 0.0


@dataclass(frozen=True)
class SplitPlan:
    fold_count: int = 10
    # defaults to 1/fold_count
    holdout_fraction: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.fold_count < 2:
            raise ValueError("fold_count must be >= 2")
        if self.holdout_fraction is None:
            object.__setattr__(self, "holdout_fraction", 1 / self.fold_count)
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in (0, 1)")


def kfold_split(n_records: int, plan: SplitPlan = SplitPlan()) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffle record indices with ``plan.seed`` and cut them into folds."""
    if n_records < plan.fold_count:
        raise ValueError(f"need at least {plan.fold_count} records, got {n_records}")
    perm = np.random.default_rng(plan.seed).permutation(n_records)
    folds = np.array_split(perm, plan.fold_count)
    want = plan.holdout_fraction * n_records
    if any(abs(len(f) - want) > 1 for f in folds):
        raise ValueError(
            f"{plan.fold_count} folds cannot give a {plan.holdout_fraction:g} holdout share"
        )
    out = []
    for i, test in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train_idx), np.sort(test)))
    return out


def save_model(model: NGramModel, compress: bool = False) -> bytes:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "order": model.order,
        "alpha": model.alpha,
        "total_tokens": model.total_tokens,
        "vocab": sorted(model.vocab),
        "contexts": [[list(h), t] for h, t in sorted(model.context_counts.items())],
    }
    data = json.dumps(doc, separators=(",", ":"), sort_keys=True).encode()
    return gzip.compress(data, mtime=0) if compress else data


def load_model(data: bytes) -> NGramModel:
    try:
        if data[:2] == b"\x1f\x8b":
            data = gzip.decompress(data)
        doc = json.loads(data)
    except (OSError, EOFError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model data: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model version: expected {FORMAT_VERSION}, found {doc.get('version')!r}"
        )
    try:
        ctx = {tuple(h): {str(a): int(c) for a, c in t.items()} for h, t in doc["contexts"]}
        model = NGramModel(
            int(doc["order"]), float(doc["alpha"]), set(doc["vocab"]), ctx, int(doc["total_tokens"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model data: {exc}") from None
    return model


def self_entropy(records: Sequence[Sequence[str]], order: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Entropy of a corpus under a model trained on that same corpus."""
    return corpus_entropy(train(records, order, alpha), records)


def crossval_entropy(
    records: Sequence[Sequence[str]],
    orders: Sequence[int],
    plan: SplitPlan = SplitPlan(),
    alpha: float = DEFAULT_ALPHA,
) -> dict[int, list[float]]:
    """Held-out entropy per fold for each order.

    One model of the highest order is trained per fold; lower orders reuse
    its counts via :meth:`NGramModel.with_order`.
    """
    top = max(orders)
    out: dict[int, list[float]] = {n: [] for n in orders}
    for train_idx, test_idx in kfold_split(len(records), plan):
        model = train((records[i] for i in train_idx), top, alpha)
        held_out = [records[i] for i in test_idx]
        for n in orders:
            out[n].append(corpus_entropy(model.with_order(n), held_out))
    return out
