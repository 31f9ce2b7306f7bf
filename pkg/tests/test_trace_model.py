import json
import warnings

import pytest
from hypothesis import given, strategies as st

from tracefault.trace_model import (
    EmptySequenceWarning,
    Event,
    SymbolSequence,
    Trace,
    TraceError,
    TraceKind,
    TraceParseError,
    UnknownEventError,
    build_symbol_table,
    filter_idle,
    ingest_traces,
    read_trace_file,
    write_trace_file,
)


def rec(ts, api, sender="nova-api", status="200", dur=5):
    return json.dumps({"ts_us": ts, "sender": sender, "api": api, "status": status, "dur_us": dur})


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def mk(trace_id, apis, kind=TraceKind.FAULT_FREE, status="200"):
    return Trace(trace_id, kind, tuple(Event(i, "svc", a, status, 1) for i, a in enumerate(apis)))


def test_three_records_sorted_by_timestamp(tmp_path):
    p = write_lines(tmp_path / "t1.jsonl", [rec(30, "c"), rec(10, "a"), rec(20, "b")])
    t = read_trace_file(p, "faultfree")
    assert [e.service_api for e in t.events] == ["a", "b", "c"]
    assert t.trace_id == "t1" and t.kind is TraceKind.FAULT_FREE


def test_equal_timestamps_keep_ingestion_order(tmp_path):
    p = write_lines(tmp_path / "t.jsonl", [rec(5, "A"), rec(5, "B"), rec(1, "Z")])
    assert [e.service_api for e in read_trace_file(p, "faulty").events] == ["Z", "A", "B"]


def test_missing_field_names_line(tmp_path):
    bad = json.dumps({"ts_us": 3, "sender": "x", "status": "200", "dur_us": 1})
    p = write_lines(tmp_path / "t.jsonl", [rec(1, "a"), bad])
    with pytest.raises(TraceParseError, match="missing field service_api at line 2") as exc:
        read_trace_file(p, "faulty")
    assert exc.value.line == 2


@pytest.mark.parametrize("line", [
    "not json",
    "[1, 2]",
    json.dumps({"ts_us": "1", "sender": "s", "api": "a", "status": "200", "dur_us": 1}),
    json.dumps({"ts_us": 1, "sender": "s", "api": "a", "status": 200, "dur_us": 1}),
    json.dumps({"ts_us": 1, "sender": "s", "api": "a", "status": "200", "dur_us": 1, "x": 0}),
    json.dumps({"ts_us": -1, "sender": "s", "api": "a", "status": "200", "dur_us": 1}),
    json.dumps({"ts_us": 1, "sender": "", "api": "a", "status": "200", "dur_us": 1}),
])
def test_malformed_records_rejected(tmp_path, line):
    p = write_lines(tmp_path / "t.jsonl", [line])
    with pytest.raises(TraceParseError, match="line 1"):
        read_trace_file(p, "faulty")


def test_empty_trace_is_error(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("\n")
    with pytest.raises(TraceError, match="empty trace"):
        read_trace_file(p, "faulty")


def test_ingest_directory_sorted_and_roundtrip(tmp_path):
    traces = [mk("b", "xy"), mk("a", "yz")]
    for t in traces:
        write_trace_file(t, tmp_path / f"{t.trace_id}.jsonl")
    got = ingest_traces(tmp_path, "faultfree")
    assert [t.trace_id for t in got] == ["a", "b"]
    assert got[1] == traces[0]


def test_ingest_missing_path(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_traces(tmp_path / "nope", "faulty")


def test_status_distinguishes_symbols():
    t = Trace("t", TraceKind.FAULTY, (Event(0, "s", "get", "200", 1), Event(1, "s", "get", "404", 1)))
    assert build_symbol_table([t]).d == 2


def test_identical_triples_share_symbol_and_density():
    a, b = mk("a", "pqrst"), mk("b", "tsrqp")
    table = build_symbol_table([a, b])
    assert table.d == 5
    assert sorted(table.symbolize(a).symbols) == [0, 1, 2, 3, 4]
    assert table.symbolize(a).symbols == (0, 1, 2, 3, 4)
    assert table.symbolize(b).symbols == (4, 3, 2, 1, 0)


def test_frozen_table_rejects_novel_key():
    table = build_symbol_table([mk("a", "p")])
    with pytest.raises(UnknownEventError):
        table.encode(("svc", "q", "200"))
    with pytest.raises(ValueError):
        build_symbol_table([])


def test_symbol_table_json_roundtrip():
    table = build_symbol_table([mk("a", "pq"), mk("b", "qr", status="500")])
    assert type(table).from_json(table.to_json()) == table


def test_filter_idle_removes_type_everywhere():
    table = build_symbol_table([mk("t", "ABC")])
    out = filter_idle(mk("t", "ABCAB"), mk("idle", "B", TraceKind.IDLE), table)
    assert [table.decode(s)[1] for s in out] == list("ACA")


def test_filter_idle_empty_idle_is_identity():
    table = build_symbol_table([mk("t", "ABC")])
    t = mk("t", "ABCAB")
    assert filter_idle(t, Trace("idle", TraceKind.IDLE, ()), table) == table.symbolize(t)
    assert filter_idle(t, None, table) == table.symbolize(t)


def test_filter_idle_only_idle_types_warns():
    # every trace over a 3-symbol alphabet whose types are all idle becomes empty
    table = build_symbol_table([mk("t", "ABC")])
    idle = mk("idle", "ABC", TraceKind.IDLE)
    for apis in ["A", "AB", "CBA", "AACCB"]:
        with pytest.warns(EmptySequenceWarning):
            assert len(filter_idle(mk("t", apis), idle, table)) == 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert len(filter_idle(mk("t", "A"), mk("i", "B", TraceKind.IDLE), table)) == 1


def test_filter_idle_unknown_type_errors():
    table = build_symbol_table([mk("t", "AB")])
    with pytest.raises(UnknownEventError):
        filter_idle(mk("t", "ABX"), None, table)


apis = st.lists(st.sampled_from("ABCDE"), max_size=30)


@given(apis, st.sets(st.sampled_from("ABCDE")))
def test_filter_idle_idempotent_and_subsequence(trace_apis, idle_apis):
    from oracles import is_subsequence

    table = build_symbol_table([mk("all", "ABCDE")])
    t = mk("t", trace_apis)
    idle = mk("idle", sorted(idle_apis), TraceKind.IDLE)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySequenceWarning)
        once = filter_idle(t, idle, table)
        again = filter_idle(Trace("t", TraceKind.FAULTY, tuple(e for e in t.events if table.encode(e) in once.symbols)), idle, table)
    assert once == again
    assert is_subsequence(once.symbols, table.symbolize(t).symbols)
    assert len(once) == sum(a not in idle_apis for a in trace_apis)


@given(st.lists(st.tuples(st.sampled_from(["s1", "s2"]), st.sampled_from(["a", "b", "c"]), st.sampled_from(["200", "500"])), min_size=1))
def test_symbolization_roundtrip_and_determinism(keys):
    t = Trace("t", TraceKind.FAULTY, tuple(Event(i, *k, 0) for i, k in enumerate(keys)))
    table = build_symbol_table([t])
    assert all(table.decode(table.encode(k)) == k for k in keys)
    assert build_symbol_table([t]) == table
    assert table.d == len(set(keys))


def test_symbol_sequence_protocol():
    s = SymbolSequence("x", (1, 2, 3))
    assert len(s) == 3 and list(s) == [1, 2, 3] and s[1] == 2
