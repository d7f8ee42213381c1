"""Reading log corpora, masking dynamic content, tokenizing and windowing.

A record keeps the byte offset of its first byte and the byte offset just past
its line terminator, so window spans tile the source exactly.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

PLACEHOLDERS = ("<TS>", "<IP>", "<HEX>", "<NUM>", "<PATH>", "<ID>")
UNGROUPED = "<ungrouped>"
NORMAL = "normal"
ANOMALOUS = "anomalous"


class ConfigError(ValueError):
    """A mask rule (or rule file) that cannot be used."""


class RecordError(ValueError):
    """A structured line that could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class LogRecord:
    offset: int
    raw: str
    node: str | None = None
    session: str | None = None
    label: str | None = None
    # byte offset one past the line terminator
    end: int = -1
    # message text used for masking/scoring; plain records use ``raw``
    msg: str | None = None

    def __post_init__(self) -> None:
        if "\n" in self.raw or "\r" in self.raw:
            raise ValueError("raw must not contain a line terminator")
        if self.end < 0:
            object.__setattr__(self, "end", self.offset + len(_encode(self.raw)) + 1)

    @property
    def size(self) -> int:
        return self.end - self.offset

    @property
    def text(self) -> str:
        return self.raw if self.msg is None else self.msg

    @property
    def anomalous(self) -> bool:
        return self.label == ANOMALOUS


@dataclass(frozen=True)
class MaskRule:
    pattern: str
    replacement: str
    regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.replacement not in PLACEHOLDERS:
            raise ConfigError(
                f"replacement {self.replacement!r} is not one of {', '.join(PLACEHOLDERS)}"
            )
        try:
            compiled = re.compile(self.pattern)
        except re.error as exc:
            raise ConfigError(f"invalid pattern {self.pattern!r}: {exc}") from None
        object.__setattr__(self, "regex", compiled)


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source_span: tuple[int, int] = (0, 0)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)


@dataclass
class LogWindow:
    index: int
    span: tuple[int, int]
    records: list[LogRecord]
    target_bytes: int

    @property
    def nbytes(self) -> int:
        return self.span[1] - self.span[0]


# Order matters: timestamps and addresses are claimed before bare numbers.
_TS = r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?"
_IP = r"(?<![\w.-])\d{1,3}(?:\.\d{1,3}){3}(?::\d+)?(?![\w.-])"
_HEX = (
    r"(?<![\w-])(?:0[xX][0-9a-fA-F]+"
    r"|(?=[0-9a-fA-F]*[a-fA-F])(?=[0-9a-fA-F]*\d)[0-9a-fA-F]{4,})(?![\w-])"
)
_NUM = r"(?<![\w./:-])[-+]?\d+(?:\.\d+)?(?![\w/:-]|\.\d)"
_PATH = r"(?<![\w.<>/-])\.{0,2}/[\w.-]*\w(?:/[\w.-]*\w)*/?"
_ID = r"(?<![\w<>.:/-])(?=[\w.:/-]*\d)(?=[\w.:/-]*[A-Za-z])[\w.:/-]*\w"

DEFAULT_RULES: tuple[MaskRule, ...] = (
    MaskRule(_TS, "<TS>"),
    MaskRule(_IP, "<IP>"),
    MaskRule(_HEX, "<HEX>"),
    MaskRule(_NUM, "<NUM>"),
    MaskRule(_PATH, "<PATH>"),
    MaskRule(_ID, "<ID>"),
)


def _encode(text: str) -> bytes:
    return text.encode("utf-8", "surrogateescape")


def _decode(data: bytes) -> str:
    return data.decode("utf-8", "surrogateescape")


def load_rules(path: str | Path) -> list[MaskRule]:
    """Load mask rules from a JSON file.

    The file holds a list of ``{"pattern": ..., "replacement": ...}`` objects
    (or two-element lists). Patterns are compiled here so that a bad rule file
    fails before any masking happens.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read rule file {path}: {exc}") from None
    if not isinstance(data, list):
        raise ConfigError("rule file must hold a list of rules")
    rules = []
    for i, item in enumerate(data):
        if isinstance(item, dict) and {"pattern", "replacement"} <= item.keys():
            rules.append(MaskRule(item["pattern"], item["replacement"]))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            rules.append(MaskRule(*item))
        else:
            raise ConfigError(f"rule {i} is not a pattern/replacement pair")
    return rules


def read_corpus(
    source: IO[bytes] | bytes | str | Path,
    format: str = "plain",
    errors: str = "skip",
) -> Iterator[LogRecord | RecordError]:
    """Yield records from ``source`` in order.

    ``format`` is ``"plain"`` (one record per line) or ``"structured"`` (one
    JSON object per line with an ``msg`` field). With ``errors="skip"`` a
    malformed structured line is yielded as a :class:`RecordError` and reading
    continues; with ``errors="raise"`` the error is raised.
    """
    if format not in ("plain", "structured"):
        raise ValueError(f"unknown corpus format {format!r}")
    if errors not in ("skip", "raise"):
        raise ValueError(f"unknown error mode {errors!r}")

    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            yield from read_corpus(fh, format, errors)
        return
    if not isinstance(source, bytes):
        source = source.read()
    lines = source.splitlines(keepends=True)

    offset = 0
    for line_no, line in enumerate(lines, start=1):
        start, offset = offset, offset + len(line)
        body = line.rstrip(b"\r\n")
        raw = _decode(body)
        if format == "plain":
            yield LogRecord(start, raw, end=offset)
            continue
        if not body.strip():
            continue
        try:
            obj = json.loads(body)
            if not isinstance(obj, dict):
                raise ValueError("not a JSON object")
            msg = obj["msg"]
            if not isinstance(msg, str):
                raise ValueError("msg is not a string")
            label = obj.get("label")
            if label not in (None, NORMAL, ANOMALOUS):
                raise ValueError(f"unknown label {label!r}")
        except (ValueError, KeyError) as exc:
            err = RecordError(line_no, str(exc) if not isinstance(exc, KeyError) else "missing msg")
            if errors == "raise":
                raise err from None
            yield err
            continue
        yield LogRecord(
            start,
            raw,
            node=obj.get("node"),
            session=obj.get("session"),
            label=label,
            end=offset,
            msg=msg,
        )


def records_only(items: Iterable[LogRecord | RecordError]) -> Iterator[LogRecord]:
    for item in items:
        if isinstance(item, LogRecord):
            yield item


def mask(record: LogRecord | str, rules: Sequence[MaskRule] = DEFAULT_RULES) -> str:
    text = record if isinstance(record, str) else record.text
    for rule in rules:
        text = rule.regex.sub(rule.replacement, text)
    return text


def tokenize(text: str, span: tuple[int, int] = (0, 0)) -> TokenSequence:
    return TokenSequence(tuple(text.split()), span)


def record_tokens(record: LogRecord, rules: Sequence[MaskRule] = DEFAULT_RULES) -> TokenSequence:
    return tokenize(mask(record, rules), (record.offset, record.end))


def window(records: Iterable[LogRecord], target_bytes: int = 4096) -> Iterator[LogWindow]:
    """Greedily pack whole records into windows of at least ``target_bytes``."""
    if target_bytes < 1:
        raise ValueError("target_bytes must be >= 1")
    index = 0
    current: list[LogRecord] = []
    total = 0
    for rec in records:
        current.append(rec)
        total += rec.size
        if total >= target_bytes:
            yield LogWindow(index, (current[0].offset, rec.end), current, target_bytes)
            index += 1
            current, total = [], 0
    if current:
        yield LogWindow(index, (current[0].offset, current[-1].end), current, target_bytes)


def group_by_session(records: Iterable[LogRecord]) -> dict[str, list[LogRecord]]:
    groups: dict[str, list[LogRecord]] = {}
    for rec in records:
        key = rec.session if rec.session is not None else UNGROUPED
        groups.setdefault(key, []).append(rec)
    return groups


def window_labels(windows: Iterable[LogWindow]) -> list[bool]:
    """A window is anomalous iff any record in it is labeled anomalous."""
    return [any(r.anomalous for r in w.records) for w in windows]
