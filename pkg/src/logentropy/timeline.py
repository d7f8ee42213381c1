"""Per-window entropy timelines."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ingest import DEFAULT_RULES, LogWindow, MaskRule, mask
from .ngram import NGramModel, UnseenEventError

HEADER = ("window", "start", "end", "tokens", "entropy")


@dataclass(frozen=True)
class TimelinePoint:
    index: int
    span: tuple[int, int]
    tokens: int
    entropy: float
    # no tokens in the window; entropy is reported as 0
    empty: bool = False


@dataclass
class EntropyTimeline:
    points: list[TimelinePoint] = field(default_factory=list)
    model_id: str = ""
    corpus_id: str = ""

    def __post_init__(self) -> None:
        for i, p in enumerate(self.points):
            if p.index != i:
                raise ValueError(f"window index {p.index} at position {i}")
            if not p.entropy >= 0 or p.entropy == float("inf"):
                raise ValueError(f"window {i} has invalid entropy {p.entropy}")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def values(self) -> list[float]:
        return [p.entropy for p in self.points]


def score_window(
    model: NGramModel, win: LogWindow, rules: Sequence[MaskRule] = DEFAULT_RULES
) -> TimelinePoint:
    """Score each record separately and pool the bits over the window's tokens."""
    bits = 0.0
    n = 0
    for rec in win.records:
        tokens = mask(rec, rules).split()
        if not tokens:
            continue
        try:
            bits += model.logprob_sum(tokens)
        except UnseenEventError as exc:
            raise UnseenEventError(exc.args[0], position=n + exc.position, window=win.index) from None
        n += len(tokens)
    if n == 0:
        return TimelinePoint(win.index, win.span, 0, 0.0, empty=True)
    return TimelinePoint(win.index, win.span, n, bits / n)


def score_timeline(
    model: NGramModel,
    windows: Iterable[LogWindow],
    rules: Sequence[MaskRule] = DEFAULT_RULES,
    workers: int = 1,
    model_id: str = "",
    corpus_id: str = "",
) -> EntropyTimeline:
    """Score windows in order. Windows are independent, so ``workers > 1``
    scores them concurrently; results are reassembled in index order."""
    windows = list(windows)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            points = list(pool.map(lambda w: score_window(model, w, rules), windows))
    else:
        points = [score_window(model, w, rules) for w in windows]
    return EntropyTimeline(points, model_id, corpus_id)


def export_timeline(timeline: EntropyTimeline) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for p in timeline.points:
        writer.writerow([p.index, p.span[0], p.span[1], p.tokens, f"{p.entropy:.6f}"])
    return buf.getvalue().encode()


def read_timeline(data: bytes | str) -> EntropyTimeline:
    if isinstance(data, bytes):
        data = data.decode()
    rows = list(csv.reader(io.StringIO(data)))
    if not rows or tuple(rows[0]) != HEADER:
        raise ValueError(f"timeline header must be {','.join(HEADER)}")
    points = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            idx, start, end, tokens, entropy = row
            points.append(
                TimelinePoint(int(idx), (int(start), int(end)), int(tokens), float(entropy), int(tokens) == 0)
            )
        except ValueError:
            raise ValueError(f"line {line_no}: malformed timeline row") from None
    return EntropyTimeline(points)
