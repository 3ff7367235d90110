from __future__ import annotations

import random
import sys
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fccengine.config import EngineConfig
from fccengine.ingest import TradeEvent, read_stream
from fccengine.orchestrate import Orchestrator

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN_SPLIT = datetime(2025, 2, 5, tzinfo=timezone.utc)

SELLER = "0xa2ea9a8c59789c6d550f451fb91319ed2fdc6760"
BUYER = "0xd5b234fa7e619a5c7bf38bd575abde09a18eaed6"
FLAGGED_TX = "0xaa713b09d691098e59f6df9b267d070241fc1246f8aaa14e1664cc9c93e85f0e"

T0 = datetime(2025, 1, 1, tzinfo=timezone.utc)


def at_day(day: float) -> datetime:
    return (T0 + timedelta(seconds=int(day * 86400))).replace(microsecond=0)


def make_event(
    tag: str,
    seller: str,
    buyer: str,
    value: str | Decimal,
    day: float,
    item: str | None = None,
    collection: str = "col-test",
) -> TradeEvent:
    import hashlib

    return TradeEvent(
        tx_id="0x" + hashlib.sha256(f"tx|{tag}".encode()).hexdigest(),
        collection_id=collection,
        item_id=item or f"itm-{tag}",
        seller=seller,
        buyer=buyer,
        value_usd=Decimal(str(value)),
        timestamp=at_day(day),
    )


def wallet(tag: str) -> str:
    import hashlib

    return "0x" + hashlib.sha256(f"w|{tag}".encode()).hexdigest()[:40]


def random_stream(rng: random.Random, n_trades: int, n_wallets: int = 8, n_items: int = 5):
    """Small random streams for oracle-equivalence property tests."""
    wallets = [wallet(f"rs-{rng.random()}") for _ in range(n_wallets)]
    items = [f"itm-rs-{rng.randrange(10**9)}" for _ in range(n_items)]
    events = []
    day = 0.0
    for i in range(n_trades):
        day += rng.random() * 3.0
        seller = rng.choice(wallets)
        buyer = rng.choice(wallets) if rng.random() < 0.9 else seller
        value = rng.choice(
            [Decimal(f"{rng.uniform(50, 99):.2f}"), Decimal(f"{rng.uniform(1, 49):.2f}"),
             Decimal(f"{rng.uniform(100, 900):.2f}"), Decimal("62.00")]
        )
        events.append(
            make_event(f"rs-{rng.random()}-{i}", seller, buyer, value, day, item=rng.choice(items))
        )
    return events


@pytest.fixture
def golden_events() -> list[TradeEvent]:
    return read_stream(FIXTURES / "golden_stream.jsonl")


@pytest.fixture
def golden_parts(golden_events):
    warmup = [e for e in golden_events if e.timestamp < GOLDEN_SPLIT]
    batch = [e for e in golden_events if e.timestamp >= GOLDEN_SPLIT]
    return warmup, batch


@pytest.fixture
def engine() -> Orchestrator:
    return Orchestrator(EngineConfig())


@pytest.fixture
def golden_engine(golden_parts) -> Orchestrator:
    warmup, batch = golden_parts
    eng = Orchestrator(EngineConfig())
    eng.ingest_only(warmup)
    eng.run_pipeline(batch)
    return eng
