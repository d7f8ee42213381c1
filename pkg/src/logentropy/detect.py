"""Hampel outlier flagging on entropy timelines and detection scoring."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .timeline import EntropyTimeline


@dataclass(frozen=True)
class HampelConfig:
    half_width: int = 10
    k: float = 3.0
    scale: float = 1.4826
    # flag only values above the local median
    one_sided: bool = True

    def __post_init__(self) -> None:
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")
        if not self.k > 0:
            raise ValueError("k must be > 0")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")


def hampel_scores(values: Sequence[float], cfg: HampelConfig = HampelConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Deviation from the local median and the local scaled MAD, per point.

    Neighborhoods are truncated at the series edges; a series shorter than
    ``2 * half_width + 1`` uses the whole series for every point.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    dev = np.zeros(n)
    spread = np.zeros(n)
    whole = n < 2 * cfg.half_width + 1
    if whole and n:
        med = np.median(x)
        mad = np.median(np.abs(x - med))
        return x - med, np.full(n, cfg.scale * mad)
    for i in range(n):
        nb = x[max(0, i - cfg.half_width) : i + cfg.half_width + 1]
        med = np.median(nb)
        dev[i] = x[i] - med
        spread[i] = cfg.scale * np.median(np.abs(nb - med))
    return dev, spread


def hampel_flag(
    timeline: EntropyTimeline | Sequence[float], cfg: HampelConfig = HampelConfig()
) -> set[int]:
    values = timeline.values if isinstance(timeline, EntropyTimeline) else timeline
    dev, spread = hampel_scores(values, cfg)
    if not cfg.one_sided:
        dev = np.abs(dev)
    return {int(i) for i in np.flatnonzero(dev > cfg.k * spread)}


def merge_regions(flags: Iterable[int], gap_bridge: int = 0) -> list[tuple[int, int]]:
    """Maximal runs of flagged indices; gaps of up to ``gap_bridge`` unflagged
    indices are bridged."""
    regions: list[tuple[int, int]] = []
    for i in sorted(set(flags)):
        if regions and i - regions[-1][1] <= gap_bridge + 1:
            regions[-1] = (regions[-1][0], i)
        else:
            regions.append((i, i))
    return regions


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class DetectionReport:
    flagged: set[int]
    regions: list[tuple[int, int]]
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f_measure: float
    balanced_accuracy: float
    region_recall: float | None = None
    truth_regions: list[tuple[int, int]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def false_positive_rate(self) -> float:
        return _ratio(self.fp, self.fp + self.tn)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["flagged"] = sorted(self.flagged)
        out["regions"] = [list(r) for r in self.regions]
        out["truth_regions"] = [list(r) for r in self.truth_regions]
        return out


def evaluate(
    flags: Iterable[int],
    labels: Sequence[bool],
    gap_bridge: int = 0,
    n_windows: int | None = None,
    truth_regions: Sequence[tuple[int, int]] | None = None,
) -> DetectionReport:
    """Per-window confusion matrix of ``flags`` against ``labels`` (True means
    anomalous), plus the fraction of truth regions hit by a detected region.

    Truth regions are window-index ranges; by default they are the runs of
    anomalous windows.
    """
    flagged = set(flags)
    n = len(labels)
    if n_windows is not None and n_windows != n:
        raise ValueError(f"{n} labels for a timeline of {n_windows} windows")
    if any(i < 0 or i >= n for i in flagged):
        raise ValueError(f"flagged index outside 0..{n - 1}; labels do not cover the timeline")
    tp = sum(1 for i in flagged if labels[i])
    fp = len(flagged) - tp
    pos = sum(1 for v in labels if v)
    fn = pos - tp
    tn = n - pos - fp
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f = _ratio(2 * precision * recall, precision + recall)
    if pos and n - pos:
        ba = tp / (2 * (tp + fn)) + tn / (2 * (tn + fp))
    else:
        # one class only: the one defined rate
        ba = recall if pos else _ratio(tn, tn + fp)
    regions = merge_regions(flagged, gap_bridge)
    if truth_regions is None:
        truth = merge_regions((i for i, v in enumerate(labels) if v), gap_bridge)
    else:
        truth = [tuple(r) for r in truth_regions]
    return DetectionReport(
        flagged, regions, tp, fp, fn, tn, precision, recall, f, ba,
        region_recall(regions, truth) if truth else None, truth,
    )


def region_recall(detected: Sequence[tuple[int, int]], truth: Sequence[tuple[int, int]]) -> float:
    """Fraction of truth regions overlapping at least one detected region."""
    if not truth:
        return 0.0
    hit = sum(1 for a, b in truth if any(s <= b and a <= e for s, e in detected))
    return hit / len(truth)


def read_labels(data: bytes | str) -> list[bool]:
    """Per-window labels from CSV rows ``window,label``; label is
    ``anomalous``/``normal`` or 1/0."""
    if isinstance(data, bytes):
        data = data.decode()
    rows = [r for r in csv.reader(io.StringIO(data)) if r]
    if rows and rows[0][0].strip() == "window":
        rows = rows[1:]
    labels: dict[int, bool] = {}
    for row in rows:
        if len(row) != 2:
            raise ValueError(f"bad label row {row!r}")
        value = row[1].strip().lower()
        if value not in ("anomalous", "normal", "1", "0"):
            raise ValueError(f"bad label {row[1]!r}")
        labels[int(row[0])] = value in ("anomalous", "1")
    if sorted(labels) != list(range(len(labels))):
        raise ValueError("label windows must be 0..k-1 without gaps")
    return [labels[i] for i in range(len(labels))]


def write_labels(labels: Sequence[bool]) -> bytes:
    lines = ["window,label"] + [f"{i},{'anomalous' if v else 'normal'}" for i, v in enumerate(labels)]
    return ("\n".join(lines) + "\n").encode()
