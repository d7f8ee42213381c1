from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from logentropy.ingest import (
    DEFAULT_RULES,
    PLACEHOLDERS,
    UNGROUPED,
    ConfigError,
    LogRecord,
    MaskRule,
    RecordError,
    group_by_session,
    load_rules,
    mask,
    read_corpus,
    records_only,
    tokenize,
    window,
    window_labels,
)


def _records(lines: list[str]) -> list[LogRecord]:
    return list(records_only(read_corpus(("\n".join(lines) + "\n").encode())))


class TestReadCorpus:
    def test_plain_offsets(self):
        recs = list(read_corpus(b"a\nb\n"))
        assert [(r.offset, r.raw) for r in recs] == [(0, "a"), (2, "b")]
        assert all(r.node is None and r.session is None and r.label is None for r in recs)

    def test_structured_fields(self):
        line = b'{"msg":"x","session":"i-42","label":"anomalous"}\n'
        (rec,) = read_corpus(line, "structured")
        assert rec.session == "i-42"
        assert rec.anomalous
        assert rec.text == "x"

    def test_bad_line_skipped_with_line_number(self):
        data = b'{"msg":"a"}\n{bad json\n{"msg":"c"}\n'
        items = list(read_corpus(data, "structured"))
        assert isinstance(items[1], RecordError) and items[1].line_no == 2
        assert [r.msg for r in records_only(items)] == ["a", "c"]

    def test_bad_line_raises_in_abort_mode(self):
        with pytest.raises(RecordError, match="line 1"):
            list(read_corpus(b'{"node":"n1"}\n', "structured", errors="raise"))

    def test_offsets_account_for_crlf_and_missing_final_newline(self):
        recs = list(read_corpus(b"ab\r\ncd"))
        assert [(r.offset, r.end, r.raw) for r in recs] == [(0, 4, "ab"), (4, 6, "cd")]

    def test_raw_rejects_terminators(self):
        with pytest.raises(ValueError):
            LogRecord(0, "a\nb")


class TestMask:
    def test_executor_line(self):
        text = "Executor added: app-20/3 on worker-7 with 4 core(s)"
        assert mask(text) == "Executor added: <ID> on <ID> with <NUM> core(s)"

    def test_no_match_is_identity(self):
        assert mask("no digits here") == "no digits here"

    def test_ip_claimed_before_numbers(self):
        assert mask("192.168.210.11") == "<IP>"
        ip = next(r for r in DEFAULT_RULES if r.replacement == "<IP>")
        digits = MaskRule(r"\d+", "<NUM>")
        assert mask("192.168.210.11", [ip, digits]) == "<IP>"
        assert mask("192.168.210.11", [digits, ip]) == "<NUM>.<NUM>.<NUM>.<NUM>"

    @pytest.mark.parametrize(
        "text, expected",
        [
            ("at 2021-03-01T10:00:00.120 ok", "at <TS> ok"),
            ("addr 0x7f3a and cafe1234", "addr <HEX> and <HEX>"),
            ("open /var/log/app.log failed", "open <PATH> failed"),
            ("took 12.5 ms", "took <NUM> ms"),
            ("instance 3f2c9a1e-77b0-4c1d-9d2e-0123456789ab", "instance <ID>"),
        ],
    )
    def test_default_rules(self, text, expected):
        assert mask(text) == expected

    def test_bad_rules_fail_at_load(self, tmp_path):
        with pytest.raises(ConfigError):
            MaskRule("(", "<NUM>")
        with pytest.raises(ConfigError):
            MaskRule(r"\d+", "<DIGITS>")
        path = tmp_path / "rules.json"
        path.write_text(json.dumps([{"pattern": "[", "replacement": "<NUM>"}]))
        with pytest.raises(ConfigError):
            load_rules(path)

    def test_rule_file(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(json.dumps([{"pattern": r"\d+", "replacement": "<NUM>"}, [r"x\w+", "<ID>"]]))
        rules = load_rules(path)
        assert mask("xab 12", rules) == "<ID> <NUM>"


class TestTokenize:
    def test_whitespace(self):
        assert tokenize("a  b\tc").tokens == ("a", "b", "c")

    def test_empty(self):
        assert tokenize("").tokens == ()

    def test_placeholders_survive(self):
        assert tokenize("<ID> lost on <ID>").tokens == ("<ID>", "lost", "on", "<ID>")


def _sized(n_bytes: list[int]) -> list[LogRecord]:
    return _records(["x" * (n - 1) for n in n_bytes])


class TestWindow:
    def test_greedy(self):
        wins = list(window(_sized([3000, 3000, 3000]), 4096))
        assert [len(w.records) for w in wins] == [2, 1]
        assert [w.nbytes for w in wins] == [6000, 3000]

    def test_oversized_record_not_split(self):
        (w,) = window(_sized([10000]), 4096)
        assert w.nbytes == 10000

    def test_empty(self):
        assert list(window([], 4096)) == []

    def test_target_must_be_positive(self):
        with pytest.raises(ValueError):
            list(window(_sized([5]), 0))

    def test_labels_from_records(self):
        data = b'{"msg":"a","label":"normal"}\n{"msg":"b","label":"anomalous"}\n'
        recs = list(records_only(read_corpus(data, "structured")))
        assert window_labels(window(recs, 1)) == [False, True]


class TestGroupBySession:
    def test_partition(self):
        recs = [LogRecord(i, str(i), session=s) for i, s in enumerate("ABA")]
        groups = group_by_session(recs)
        assert groups == {"A": [recs[0], recs[2]], "B": [recs[1]]}

    def test_ungrouped(self):
        recs = _records(["a", "b"])
        assert group_by_session(recs) == {UNGROUPED: recs}

    def test_empty(self):
        assert group_by_session([]) == {}


# --------------------------------------------------------------------------
# properties

line_text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r"), max_size=80)
log_words = st.lists(
    st.one_of(
        st.from_regex(r"[a-z]{1,8}", fullmatch=True),
        st.from_regex(r"\d{1,6}", fullmatch=True),
        st.from_regex(r"[a-z]+-\d{1,3}", fullmatch=True),
        st.from_regex(r"0x[0-9a-f]{2,8}", fullmatch=True),
        st.from_regex(r"\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}", fullmatch=True),
        st.from_regex(r"/[a-z]{1,5}(/[a-z0-9.]{1,5}){0,3}", fullmatch=True),
        st.sampled_from(["blk_-123_45", "2021-03-01 10:00:00,123", "a.b", "x:1", "(s)"]),
    ),
    max_size=15,
).map(" ".join)


@given(st.lists(line_text, max_size=40), st.integers(1, 300))
def test_windows_tile_the_corpus(lines, target):
    data = "".join(line + "\n" for line in lines).encode("utf-8", "surrogateescape")
    recs = list(read_corpus(data))
    wins = list(window(recs, target))
    assert sum(len(w.records) for w in wins) == len(recs)
    pos = 0
    for i, w in enumerate(wins):
        assert w.index == i
        assert w.span[0] == pos
        assert w.span == (w.records[0].offset, w.records[-1].end)
        pos = w.span[1]
        if i < len(wins) - 1:
            assert w.nbytes >= target
        assert w.nbytes < target + w.records[-1].size
    assert pos == len(data)
    assert b"".join(data[a:b] for a, b in (w.span for w in wins)) == data


@given(st.lists(line_text, max_size=30))
def test_offsets_strictly_increase(lines):
    recs = list(read_corpus("".join(l + "\n" for l in lines).encode()))
    assert all(a.offset < b.offset for a, b in zip(recs, recs[1:]))


@given(st.one_of(log_words, line_text))
def test_mask_is_idempotent(text):
    once = mask(text)
    assert mask(once) == once


@given(st.one_of(log_words, line_text))
def test_tokens_have_no_whitespace(text):
    seq = tokenize(mask(text))
    assert all(tok and not any(c.isspace() for c in tok) for tok in seq.tokens)
    assert bool(seq.tokens) == bool(mask(text).strip())


@given(log_words)
def test_tokens_are_words_or_placeholders(text):
    for tok in tokenize(mask(text)).tokens:
        if "<" in tok:
            assert any(p in tok for p in PLACEHOLDERS)
