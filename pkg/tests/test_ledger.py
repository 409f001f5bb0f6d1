"""Append-only ledger: atomic line appends, gapless sequences, strict reads."""

from __future__ import annotations

import json

import pytest

from spiralflow.errors import CorruptLedger
from spiralflow.ledger import (
    EVENT_KINDS,
    LedgerEvent,
    LedgerWriter,
    iter_ledger,
    ledger_path,
    read_ledger,
)


@pytest.fixture
def path(tmp_path):
    return ledger_path(tmp_path)


def test_append_assigns_sequences_from_one(path):
    writer = LedgerWriter(path)
    first = writer.append("RunStarted", {"run_id": "r"})
    second = writer.append("RevolutionStarted", {"revolution": 1})
    assert (first.sequence, second.sequence) == (1, 2)
    assert [e.sequence for e in read_ledger(path)] == [1, 2]


def test_round_trip_preserves_payloads(path):
    writer = LedgerWriter(path)
    payload = {"metrics": {"auc": 0.87}, "note": "naïve ✓"}
    writer.append("FlagEvaluated", payload)
    (event,) = read_ledger(path)
    assert event.kind == "FlagEvaluated"
    assert event.payload == payload


def test_one_json_object_per_line(path):
    writer = LedgerWriter(path)
    writer.append("RunStarted", {})
    writer.append("RunExited", {"kind": "true-exit"})
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert all(isinstance(json.loads(line), dict) for line in lines)


def test_open_resumes_numbering(path):
    LedgerWriter(path).append("RunStarted", {})
    writer = LedgerWriter.open(path.parent)
    assert writer.next_sequence == 2
    writer.append("RevolutionStarted", {"revolution": 1})
    assert [e.sequence for e in read_ledger(path)] == [1, 2]


def test_open_on_empty_workdir_starts_at_one(tmp_path):
    assert LedgerWriter.open(tmp_path).next_sequence == 1


def test_timestamps_are_utc_iso(path):
    LedgerWriter(path).append("RunStarted", {})
    (event,) = read_ledger(path)
    assert event.timestamp.endswith("+00:00")


def test_sequence_gap_detected(path):
    writer = LedgerWriter(path)
    writer.append("RunStarted", {})
    skipped = LedgerEvent(3, "t", "RunExited", {})
    with path.open("a") as handle:
        handle.write(json.dumps(skipped.to_json()) + "\n")
    with pytest.raises(CorruptLedger) as exc:
        read_ledger(path)
    assert exc.value.sequence == 3


def test_unknown_kind_detected(path):
    writer = LedgerWriter(path)
    writer.append("RunStarted", {})
    with path.open("a") as handle:
        handle.write(json.dumps(LedgerEvent(2, "t", "Surprise", {}).to_json()) + "\n")
    with pytest.raises(CorruptLedger):
        read_ledger(path)


def test_unparseable_line_detected(path):
    writer = LedgerWriter(path)
    writer.append("RunStarted", {})
    path.write_text(path.read_text() + "{not json\n")
    with pytest.raises(CorruptLedger) as exc:
        read_ledger(path)
    assert "line 2" in str(exc.value)


def test_iter_is_lazy_up_to_the_bad_line(path):
    writer = LedgerWriter(path)
    writer.append("RunStarted", {})
    writer.append("RevolutionStarted", {"revolution": 1})
    path.write_text(path.read_text() + "garbage\n")
    it = iter_ledger(path)
    assert next(it).sequence == 1
    assert next(it).sequence == 2
    with pytest.raises(CorruptLedger):
        next(it)


def test_event_kind_vocabulary_is_closed(path):
    assert len(EVENT_KINDS) == 10
    assert EVENT_KINDS[0] == "RunStarted"
    assert EVENT_KINDS[-1] == "RunExited"
