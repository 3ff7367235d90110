"""Append-only, hash-chained audit log.

Every agent action is recorded with its rationale; each record's hash
covers all fields plus the previous record's hash, so any mutation of the
persisted file is detectable by re-verification.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Optional

from .canonical import canonical_dumps, canonical_loads, format_timestamp, parse_timestamp

GENESIS_HASH = "0" * 64


class ChainViolationKind(str, Enum):
    MALFORMED = "MALFORMED"
    SEQUENCE_GAP = "SEQUENCE_GAP"
    LINK_MISMATCH = "LINK_MISMATCH"
    HASH_MISMATCH = "HASH_MISMATCH"


@dataclass(frozen=True)
class FirstViolation:
    seq: int
    kind: ChainViolationKind


class EmptyRationale(ValueError):
    """Raised when an audit record is appended without a rationale."""


class ReplayDivergence(RuntimeError):
    """Replay produced an audit record that differs from the persisted one."""


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    timestamp: datetime
    agent: str
    action: str
    rationale: str
    input_digest: str
    prev_hash: str
    hash: str
    case_id: Optional[str] = None
    tx_id: Optional[str] = None

    def payload(self) -> dict:
        """All hashed fields (everything except `hash`), None fields omitted."""
        body = {
            "seq": self.seq,
            "timestamp": format_timestamp(self.timestamp),
            "agent": self.agent,
            "action": self.action,
            "rationale": self.rationale,
            "input_digest": self.input_digest,
            "prev_hash": self.prev_hash,
        }
        if self.case_id is not None:
            body["case_id"] = self.case_id
        if self.tx_id is not None:
            body["tx_id"] = self.tx_id
        return body

    def to_dict(self) -> dict:
        body = self.payload()
        body["hash"] = self.hash
        return body


def record_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_dumps(payload).encode("utf-8")).hexdigest()


def _record_from_dict(data: dict) -> AuditRecord:
    return AuditRecord(
        seq=data["seq"],
        timestamp=parse_timestamp(data["timestamp"]),
        agent=data["agent"],
        action=data["action"],
        rationale=data["rationale"],
        input_digest=data["input_digest"],
        prev_hash=data["prev_hash"],
        hash=data["hash"],
        case_id=data.get("case_id"),
        tx_id=data.get("tx_id"),
    )


class AuditLog:
    """In-memory chain mirrored to an append-only JSONL file.

    During replay the log is pre-loaded from disk and `append` switches to a
    consume-and-verify mode: the record that the replayed action would have
    written must match the persisted one byte for byte.
    """

    def __init__(self, path: Path | None = None, records: list[AuditRecord] | None = None):
        self.path = path
        self.records: list[AuditRecord] = records or []
        self._sink: IO[str] | None = None
        self._replay_cursor: int | None = None
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._sink = open(path, "a", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "AuditLog":
        records: list[AuditRecord] = []
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        records.append(_record_from_dict(canonical_loads(line)))
        return cls(path=path, records=records)

    # -- replay ------------------------------------------------------------

    def begin_replay(self) -> None:
        self._replay_cursor = 0

    def end_replay(self) -> None:
        self._replay_cursor = None

    @property
    def replaying(self) -> bool:
        return self._replay_cursor is not None

    # -- appends -----------------------------------------------------------

    def append(
        self,
        *,
        agent: str,
        action: str,
        rationale: str,
        at: datetime,
        case_id: str | None = None,
        tx_id: str | None = None,
        input_digest: str = "",
    ) -> AuditRecord:
        if not rationale or not rationale.strip():
            raise EmptyRationale("audit records require a non-empty rationale")
        if self._replay_cursor is not None:
            return self._consume_replayed(agent, action, rationale, at, case_id, tx_id, input_digest)
        seq = len(self.records)
        prev_hash = self.records[-1].hash if self.records else GENESIS_HASH
        partial = AuditRecord(
            seq=seq,
            timestamp=at,
            agent=agent,
            action=action,
            rationale=rationale,
            input_digest=input_digest,
            prev_hash=prev_hash,
            hash="",
            case_id=case_id,
            tx_id=tx_id,
        )
        record = AuditRecord(**{**partial.__dict__, "hash": record_hash(partial.payload())})
        self.records.append(record)
        if self._sink is not None:
            self._sink.write(canonical_dumps(record.to_dict()) + "\n")
        return record

    def _consume_replayed(self, agent, action, rationale, at, case_id, tx_id, input_digest) -> AuditRecord:
        cursor = self._replay_cursor
        if cursor >= len(self.records):
            raise ReplayDivergence(f"replay produced more audit records than persisted (seq {cursor})")
        existing = self.records[cursor]
        rebuilt = AuditRecord(
            seq=existing.seq,
            timestamp=at,
            agent=agent,
            action=action,
            rationale=rationale,
            input_digest=input_digest,
            prev_hash=existing.prev_hash,
            hash="",
            case_id=case_id,
            tx_id=tx_id,
        )
        if record_hash(rebuilt.payload()) != existing.hash:
            raise ReplayDivergence(f"replayed audit record {cursor} diverges from the persisted chain")
        self._replay_cursor = cursor + 1
        return existing

    def flush(self) -> None:
        if self._sink is not None:
            self._sink.flush()

    def close(self) -> None:
        if self._sink is not None:
            self._sink.close()
            self._sink = None

    # -- verification and queries -------------------------------------------

    def verify_chain(self) -> FirstViolation | None:
        return verify_records(self.records)

    def query(
        self,
        *,
        case_id: str | None = None,
        agent: str | None = None,
        action: str | None = None,
        seq_range: tuple[int, int] | None = None,
    ) -> list[AuditRecord]:
        hits = []
        for rec in self.records:
            if case_id is not None and rec.case_id != case_id:
                continue
            if agent is not None and rec.agent != agent:
                continue
            if action is not None and rec.action != action:
                continue
            if seq_range is not None and not (seq_range[0] <= rec.seq <= seq_range[1]):
                continue
            hits.append(rec)
        return hits


def verify_records(records: Iterable[AuditRecord]) -> FirstViolation | None:
    prev_hash = GENESIS_HASH
    for expected_seq, rec in enumerate(records):
        if rec.seq != expected_seq:
            return FirstViolation(expected_seq, ChainViolationKind.SEQUENCE_GAP)
        if rec.prev_hash != prev_hash:
            return FirstViolation(expected_seq, ChainViolationKind.LINK_MISMATCH)
        if record_hash(rec.payload()) != rec.hash:
            return FirstViolation(expected_seq, ChainViolationKind.HASH_MISMATCH)
        prev_hash = rec.hash
    return None


def verify_file(path: Path) -> FirstViolation | None:
    """Verify the persisted chain, treating undecodable or unparsable lines
    as violations at their position."""
    records: list[AuditRecord] = []
    if not path.exists():
        return None
    raw_lines = path.read_bytes().split(b"\n")
    index = 0
    for raw in raw_lines:
        if not raw.strip():
            continue
        try:
            text = raw.decode("utf-8")
            record = _record_from_dict(canonical_loads(text))
        except Exception:
            return FirstViolation(index, ChainViolationKind.MALFORMED)
        # The stored line must be the canonical serialization bit for bit;
        # otherwise parsing could normalize a mutation away (e.g. the RFC 3339
        # date separator) and the recomputed hash would still match.
        if canonical_dumps(record.to_dict()) != text:
            return FirstViolation(index, ChainViolationKind.MALFORMED)
        violation = _check_next(records, record, index)
        if violation is not None:
            return violation
        records.append(record)
        index += 1
    return None


def _check_next(records: list[AuditRecord], rec: AuditRecord, index: int) -> FirstViolation | None:
    if rec.seq != index:
        return FirstViolation(index, ChainViolationKind.SEQUENCE_GAP)
    prev_hash = records[-1].hash if records else GENESIS_HASH
    if rec.prev_hash != prev_hash:
        return FirstViolation(index, ChainViolationKind.LINK_MISMATCH)
    if record_hash(rec.payload()) != rec.hash:
        return FirstViolation(index, ChainViolationKind.HASH_MISMATCH)
    return None
