from __future__ import annotations

import hashlib
import json

import pytest

from fccengine.audit import (
    AuditLog,
    ChainViolationKind,
    EmptyRationale,
    GENESIS_HASH,
    verify_file,
    verify_records,
)
from fccengine.canonical import canonical_dumps

from conftest import at_day


def write_sample_log(path, n=3) -> AuditLog:
    log = AuditLog(path=path)
    for i in range(n):
        log.append(
            agent="ORCHESTRATOR",
            action="TEST",
            rationale=f"record {i}",
            at=at_day(i),
            case_id=f"CASE-{i % 2}",
        )
    log.flush()
    return log


class TestAppend:
    def test_genesis(self):
        log = AuditLog()
        record = log.append(agent="INGEST", action="A", rationale="first", at=at_day(0))
        assert record.seq == 0
        assert record.prev_hash == GENESIS_HASH

    def test_chain_links(self):
        log = AuditLog()
        first = log.append(agent="INGEST", action="A", rationale="one", at=at_day(0))
        second = log.append(agent="INGEST", action="B", rationale="two", at=at_day(1))
        assert second.prev_hash == first.hash
        assert second.seq == 1

    def test_empty_rationale(self):
        log = AuditLog()
        with pytest.raises(EmptyRationale):
            log.append(agent="INGEST", action="A", rationale="   ", at=at_day(0))

    def test_hash_independent_recompute(self):
        """The stored hash equals a from-scratch digest of the canonical payload."""
        log = AuditLog()
        record = log.append(
            agent="REPORTING", action="DRAFT", rationale="drafted", at=at_day(2), case_id="CASE-9"
        )
        payload = {
            "seq": 0,
            "timestamp": "2025-01-03T00:00:00Z",
            "agent": "REPORTING",
            "action": "DRAFT",
            "rationale": "drafted",
            "input_digest": "",
            "prev_hash": GENESIS_HASH,
            "case_id": "CASE-9",
        }
        independent = hashlib.sha256(
            json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()
        assert record.hash == independent


class TestVerify:
    def test_empty_ok(self, tmp_path):
        assert verify_file(tmp_path / "missing.jsonl") is None
        assert verify_records([]) is None

    def test_untampered_ok(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        write_sample_log(path)
        assert verify_file(path) is None

    def test_rationale_byte_flip_detected(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        write_sample_log(path)
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace("record 1", "rekord 1")
        path.write_text("\n".join(lines) + "\n")
        violation = verify_file(path)
        assert violation is not None
        assert violation.seq == 1
        assert violation.kind is ChainViolationKind.HASH_MISMATCH

    def test_deleted_record_detected(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        write_sample_log(path, n=4)
        lines = path.read_text().splitlines()
        del lines[2]
        path.write_text("\n".join(lines) + "\n")
        violation = verify_file(path)
        assert violation is not None
        assert violation.seq == 2
        assert violation.kind in (ChainViolationKind.SEQUENCE_GAP, ChainViolationKind.LINK_MISMATCH)

    def test_reordered_records_detected(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        write_sample_log(path, n=3)
        lines = path.read_text().splitlines()
        lines[0], lines[1] = lines[1], lines[0]
        path.write_text("\n".join(lines) + "\n")
        assert verify_file(path) is not None

    def test_every_byte_flip_detected_small(self, tmp_path):
        """Bit-level flips across the whole file all fail verification."""
        path = tmp_path / "audit.jsonl"
        write_sample_log(path, n=2)
        raw = bytearray(path.read_text("utf-8").encode())
        mutant_path = tmp_path / "mutant.jsonl"
        for pos in range(len(raw)):
            for mask in (0x01, 0x80, 0xFF):
                mutated = bytearray(raw)
                mutated[pos] ^= mask
                mutant_path.write_bytes(bytes(mutated))
                assert verify_file(mutant_path) is not None, f"flip at {pos} mask {mask:#x} missed"


class TestQuery:
    def test_filters(self, tmp_path):
        log = write_sample_log(tmp_path / "audit.jsonl", n=6)
        by_case = log.query(case_id="CASE-0")
        assert [r.seq for r in by_case] == [0, 2, 4]
        assert log.query(agent="ORCHESTRATOR", action="TEST", seq_range=(2, 4)) == log.records[2:5]

    def test_empty_filter_returns_all(self, tmp_path):
        log = write_sample_log(tmp_path / "audit.jsonl", n=3)
        assert log.query() == log.records

    def test_unknown_case_empty(self, tmp_path):
        log = write_sample_log(tmp_path / "audit.jsonl", n=3)
        assert log.query(case_id="CASE-none") == []


class TestCanonicalSerialization:
    def test_decimal_rendering(self):
        from decimal import Decimal

        assert canonical_dumps({"v": Decimal("62.50")}) == '{"v":62.5}'
        assert canonical_dumps({"v": Decimal("450000")}) == '{"v":450000}'
        assert canonical_dumps({"v": Decimal("0.0450")}) == '{"v":0.045}'

    def test_key_ordering_and_whitespace(self):
        assert canonical_dumps({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_reload_round_trip(self):
        from fccengine.canonical import canonical_loads
        from decimal import Decimal

        text = '{"a":62.5,"b":"x","c":[1,2.25]}'
        data = canonical_loads(text)
        assert data["a"] == Decimal("62.5")
        assert canonical_dumps(data) == text
