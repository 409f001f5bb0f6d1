"""Append-only run ledger: one JSON object per line, gapless sequence.

The ledger is the single source of truth for a run. Appends are atomic at
line granularity (single flushed write), so a reader never observes a torn
event. Sequence numbers start at 1 and are the ordering authority;
timestamps are informational only.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from .errors import CorruptLedger

LEDGER_FILENAME = "ledger.jsonl"

RUN_STARTED = "RunStarted"
REVOLUTION_STARTED = "RevolutionStarted"
STAGE_STARTED = "StageStarted"
STAGE_COMPLETED = "StageCompleted"
STAGE_FAILED = "StageFailed"
FLAG_EVALUATED = "FlagEvaluated"
FLAG_RESOLVED = "FlagResolved"
CHECKPOINT_EMITTED = "CheckpointEmitted"
TRAVERSED_BACK = "TraversedBack"
RUN_EXITED = "RunExited"

EVENT_KINDS = (
    RUN_STARTED,
    REVOLUTION_STARTED,
    STAGE_STARTED,
    STAGE_COMPLETED,
    STAGE_FAILED,
    FLAG_EVALUATED,
    FLAG_RESOLVED,
    CHECKPOINT_EMITTED,
    TRAVERSED_BACK,
    RUN_EXITED,
)


@dataclass(frozen=True)
class LedgerEvent:
    sequence: int
    timestamp: str
    kind: str
    payload: dict[str, Any]

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": self.payload,
        }

    @staticmethod
    def from_json(doc: dict) -> "LedgerEvent":
        return LedgerEvent(
            sequence=doc["sequence"],
            timestamp=doc["timestamp"],
            kind=doc["kind"],
            payload=doc.get("payload", {}),
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def ledger_path(workdir: str | Path) -> Path:
    return Path(workdir) / LEDGER_FILENAME


class LedgerWriter:
    """Appends events to a run's ledger, assigning gapless sequence numbers."""

    def __init__(self, path: Path, next_sequence: int = 1):
        self.path = Path(path)
        self.next_sequence = next_sequence

    @classmethod
    def open(cls, workdir: str | Path) -> "LedgerWriter":
        path = ledger_path(workdir)
        next_seq = 1
        if path.exists():
            events = read_ledger(path)
            if events:
                next_seq = events[-1].sequence + 1
        return cls(path, next_seq)

    def append(self, kind: str, payload: dict[str, Any]) -> LedgerEvent:
        event = LedgerEvent(self.next_sequence, _now(), kind, payload)
        line = json.dumps(event.to_json(), separators=(",", ":"), ensure_ascii=False)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        self.next_sequence += 1
        return event


def iter_ledger(path: str | Path) -> Iterator[LedgerEvent]:
    """Parse events in file order, enforcing the gapless-sequence invariant."""
    expected = 1
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                event = LedgerEvent.from_json(doc)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorruptLedger(
                    f"unparseable event at line {lineno}: {exc}", sequence=expected
                ) from exc
            if event.sequence != expected:
                raise CorruptLedger(
                    f"sequence gap: expected {expected}, found {event.sequence}",
                    sequence=event.sequence,
                )
            if event.kind not in EVENT_KINDS:
                raise CorruptLedger(
                    f"unknown event kind {event.kind!r} at sequence {event.sequence}",
                    sequence=event.sequence,
                )
            expected += 1
            yield event


def read_ledger(path: str | Path) -> list[LedgerEvent]:
    return list(iter_ledger(path))
