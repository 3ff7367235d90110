"""Trade-event ingestion and seeded synthetic stream generation.

The line format is one JSON object per line with keys exactly
`tx_id, collection_id, item_id, seller, buyer, value_usd, timestamp`
(timestamp RFC 3339). The synthetic generator plants labelled typology
rings that are detectable by the monitoring rules under default thresholds.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

from .canonical import canonical_dumps, canonical_loads, parse_timestamp

EVENT_FIELDS = ("tx_id", "collection_id", "item_id", "seller", "buyer", "value_usd", "timestamp")
LABEL_FIELDS = ("tx_id", "suspicious", "planted_typology", "ring_id")

TX_ID_HEX_LEN = 64
WALLET_HEX_LEN = 40

WASH_TRADING = "wash_trading"
STRUCTURING = "structuring"
OBFUSCATION = "obfuscation"
TYPOLOGIES = (WASH_TRADING, STRUCTURING, OBFUSCATION)

GENESIS = datetime(2025, 1, 1, tzinfo=timezone.utc)


class MissingField(ValueError):
    def __init__(self, name: str):
        super().__init__(f"missing field: {name}")
        self.name = name


class MalformedValue(ValueError):
    def __init__(self, field_name: str, reason: str = ""):
        detail = f" ({reason})" if reason else ""
        super().__init__(f"malformed value for field: {field_name}{detail}")
        self.field = field_name


class OutOfOrderBatch(ValueError):
    def __init__(self, index: int):
        super().__init__(f"batch out of time order at index {index}")
        self.index = index


class InfeasibleConfig(ValueError):
    """The requested synthetic stream cannot satisfy its own constraints."""


@dataclass(frozen=True)
class TradeEvent:
    tx_id: str
    collection_id: str
    item_id: str
    seller: str
    buyer: str
    value_usd: Decimal
    timestamp: datetime

    def parties(self) -> tuple[str, ...]:
        if self.seller == self.buyer:
            return (self.seller,)
        return (self.seller, self.buyer)

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "collection_id": self.collection_id,
            "item_id": self.item_id,
            "seller": self.seller,
            "buyer": self.buyer,
            "value_usd": self.value_usd,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class GroundTruthLabel:
    tx_id: str
    suspicious: bool
    planted_typology: Optional[str] = None
    ring_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "suspicious": self.suspicious,
            "planted_typology": self.planted_typology,
            "ring_id": self.ring_id,
        }


@dataclass(frozen=True)
class IngestSummary:
    accepted: int
    rejected: int
    first_seen_wallets: int


def _require_hex_id(raw: object, field_name: str, hex_len: int) -> str:
    if not isinstance(raw, str):
        raise MalformedValue(field_name, "not a string")
    value = raw.strip().lower()
    if not value.startswith("0x") or len(value) != hex_len + 2:
        raise MalformedValue(field_name, f"expected 0x-prefixed {hex_len}-char hex")
    try:
        int(value[2:], 16)
    except ValueError:
        raise MalformedValue(field_name, "not hexadecimal") from None
    return value


def parse_trade_event(line: str) -> TradeEvent:
    """Parse one line of the ingestion format into a normalized TradeEvent."""
    try:
        data = canonical_loads(line)
    except Exception:
        raise MalformedValue("line", "not a JSON object") from None
    if not isinstance(data, dict):
        raise MalformedValue("line", "not a JSON object")
    for name in EVENT_FIELDS:
        if name not in data:
            raise MissingField(name)
    for name in data:
        if name not in EVENT_FIELDS:
            raise MalformedValue(name, "unexpected field")

    tx_id = _require_hex_id(data["tx_id"], "tx_id", TX_ID_HEX_LEN)
    seller = _require_hex_id(data["seller"], "seller", WALLET_HEX_LEN)
    buyer = _require_hex_id(data["buyer"], "buyer", WALLET_HEX_LEN)
    for name in ("collection_id", "item_id"):
        if not isinstance(data[name], str) or not data[name]:
            raise MalformedValue(name, "expected non-empty string")

    raw_value = data["value_usd"]
    try:
        value = raw_value if isinstance(raw_value, Decimal) else Decimal(str(raw_value))
    except InvalidOperation:
        raise MalformedValue("value_usd", "not a decimal") from None
    if not value.is_finite() or value < 0:
        raise MalformedValue("value_usd", "negative or non-finite")

    try:
        ts = parse_timestamp(str(data["timestamp"]))
    except ValueError:
        raise MalformedValue("timestamp", "unparsable RFC 3339 instant") from None

    return TradeEvent(
        tx_id=tx_id,
        collection_id=data["collection_id"],
        item_id=data["item_id"],
        seller=seller,
        buyer=buyer,
        value_usd=value,
        timestamp=ts,
    )


def serialize_trade_event(event: TradeEvent) -> str:
    return canonical_dumps(event.to_dict(), key_order=EVENT_FIELDS)


def trade_event_from_dict(data: dict) -> TradeEvent:
    """Rebuild an event from an already-normalized dict (command-log replay)."""
    raw_value = data["value_usd"]
    ts = data["timestamp"]
    return TradeEvent(
        tx_id=data["tx_id"],
        collection_id=data["collection_id"],
        item_id=data["item_id"],
        seller=data["seller"],
        buyer=data["buyer"],
        value_usd=raw_value if isinstance(raw_value, Decimal) else Decimal(str(raw_value)),
        timestamp=ts if isinstance(ts, datetime) else parse_timestamp(str(ts)),
    )


def serialize_label(label: GroundTruthLabel) -> str:
    return canonical_dumps(label.to_dict(), key_order=LABEL_FIELDS)


def parse_label(line: str) -> GroundTruthLabel:
    data = canonical_loads(line)
    return GroundTruthLabel(
        tx_id=data["tx_id"],
        suspicious=bool(data["suspicious"]),
        planted_typology=data.get("planted_typology"),
        ring_id=data.get("ring_id"),
    )


def read_stream(path: Path) -> list[TradeEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(parse_trade_event(line))
    return events


class EventStore:
    """Single-writer event store with the lookup indexes the monitors need."""

    def __init__(self, sink: IO[str] | None = None):
        self.events: list[TradeEvent] = []
        self.by_tx: dict[str, TradeEvent] = {}
        self.wallet_trades: dict[str, list[TradeEvent]] = {}
        self.item_trades: dict[str, list[TradeEvent]] = {}
        self.pair_trades: dict[tuple[str, str], list[TradeEvent]] = {}
        self.first_seen: dict[str, datetime] = {}
        self.last_ts: datetime | None = None
        self._sink = sink

    @staticmethod
    def pair_key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def append(self, event: TradeEvent) -> list[str]:
        """Index one event; returns the wallets first seen through it."""
        fresh = [w for w in event.parties() if w not in self.first_seen]
        self.events.append(event)
        self.by_tx[event.tx_id] = event
        for wallet in event.parties():
            self.wallet_trades.setdefault(wallet, []).append(event)
            self.first_seen.setdefault(wallet, event.timestamp)
        self.item_trades.setdefault(event.item_id, []).append(event)
        self.pair_trades.setdefault(self.pair_key(event.seller, event.buyer), []).append(event)
        self.last_ts = event.timestamp
        if self._sink is not None:
            self._sink.write(serialize_trade_event(event) + "\n")
        return fresh


def ingest_batch(events: Sequence[TradeEvent], store: EventStore) -> IngestSummary:
    """Validate time order, then append the batch to the event store.

    Duplicate tx_ids are rejected (counted); an out-of-order batch is an
    error naming the first violating index. Order is enforced against the
    store tail as well, so the stream stays globally non-decreasing.
    """
    prev = store.last_ts
    for index, event in enumerate(events):
        if prev is not None and event.timestamp < prev:
            raise OutOfOrderBatch(index)
        prev = event.timestamp
    accepted = 0
    rejected = 0
    fresh_wallets = 0
    for event in events:
        if event.tx_id in store.by_tx:
            rejected += 1
            continue
        fresh_wallets += len(store.append(event))
        accepted += 1
    return IngestSummary(accepted=accepted, rejected=rejected, first_seen_wallets=fresh_wallets)


# ---------------------------------------------------------------------------
# Synthetic stream generation
# ---------------------------------------------------------------------------

DEFAULT_PATTERN_MIX = {WASH_TRADING: 0.5, STRUCTURING: 0.3, OBFUSCATION: 0.2}

# Trades per ring, bounded so every ring stays detectable under default
# thresholds while keeping the alerts-per-suspicious-transaction ratio high.
RING_TRADES = {WASH_TRADING: (4, 6), STRUCTURING: (3, 6), OBFUSCATION: (3, 6)}

NEW_WALLET_QUIET_DAYS = 7  # benign wallets pause after their first trade


@dataclass
class GeneratorConfig:
    """Synthetic stream parameters.

    `n_wallets` sizes the benign background pool; planted rings use
    dedicated fresh wallets on top of it (colluding sybils), so ring
    wallets never contaminate benign traffic.
    """

    seed: int = 42
    n_wallets: int = 2000
    n_collections: int = 40
    n_transactions: int = 100_000
    target_suspicious_fraction: float = 0.045
    pattern_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PATTERN_MIX))
    price_log_mean: float = 6.4
    price_log_sigma: float = 0.7
    time_span_days: int = 90

    def validate(self) -> None:
        if not 0.0 <= self.target_suspicious_fraction <= 1.0:
            raise InfeasibleConfig("target_suspicious_fraction must be within [0, 1]")
        if abs(sum(self.pattern_mix.values()) - 1.0) > 1e-9:
            raise InfeasibleConfig("pattern_mix fractions must sum to 1")
        for name in self.pattern_mix:
            if name not in TYPOLOGIES:
                raise InfeasibleConfig(f"unknown typology in pattern_mix: {name}")
        if self.n_transactions < 0 or self.n_wallets < 0 or self.n_collections < 0:
            raise InfeasibleConfig("counts must be non-negative")
        if self.time_span_days <= 0:
            raise InfeasibleConfig("time_span_days must be positive")


def _new_wallet(rng: random.Random) -> str:
    return f"0x{rng.getrandbits(WALLET_HEX_LEN * 4):0{WALLET_HEX_LEN}x}"


def _new_tx(rng: random.Random) -> str:
    return f"0x{rng.getrandbits(TX_ID_HEX_LEN * 4):0{TX_ID_HEX_LEN}x}"


def _new_item(rng: random.Random) -> str:
    return f"itm-{rng.getrandbits(48):012x}"


def _at(day_offset: float) -> datetime:
    return (GENESIS + timedelta(seconds=int(day_offset * 86400))).replace(microsecond=0)


def _benign_price(rng: random.Random, cfg: GeneratorConfig) -> Decimal:
    price = math.exp(rng.gauss(cfg.price_log_mean, cfg.price_log_sigma))
    return Decimal(f"{max(price, 0.01):.2f}")


@dataclass
class _PlannedTrade:
    day: float
    seller: str
    buyer: str
    item: str
    collection: str
    value: Decimal
    typology: Optional[str] = None
    ring_id: Optional[str] = None


def generate_synthetic(config: GeneratorConfig) -> tuple[list[TradeEvent], list[GroundTruthLabel]]:
    """Generate a labelled, reproducible stream at the configured scale.

    Suspicious mass is planted as typology rings over dedicated fresh
    wallets; benign wallets first trade early and then go quiet for the
    new-wallet window so background alert noise stays low.
    """
    config.validate()
    rng = random.Random(config.seed)
    n = config.n_transactions
    if n == 0:
        return [], []

    budget = round(n * config.target_suspicious_fraction)
    collections = [f"col-{i:04d}" for i in range(max(config.n_collections, 1))]
    span = float(config.time_span_days)

    rings = _plan_rings(rng, config, budget)
    planted = sum(len(r) for r in rings)
    if planted > n:
        raise InfeasibleConfig("n_transactions too small for the requested suspicious mass")
    if budget > 0 and abs(planted - budget) / n > 0.005:
        raise InfeasibleConfig("cannot hit target_suspicious_fraction within tolerance")

    n_benign = n - planted
    if n_benign > 0 and config.n_wallets < 2:
        raise InfeasibleConfig("n_wallets too small for benign traffic")
    if n_benign > 0 and span < NEW_WALLET_QUIET_DAYS * 3:
        raise InfeasibleConfig("time_span_days too small for benign warm-up scheduling")

    trades: list[_PlannedTrade] = []
    for ring in rings:
        trades.extend(ring)
    trades.extend(_plan_benign(rng, config, collections, n_benign, config.n_wallets, span))

    # Materialize: assign tx ids in planning order, then order the stream.
    events: list[TradeEvent] = []
    labels: list[GroundTruthLabel] = []
    for plan in trades:
        events.append(
            TradeEvent(
                tx_id=_new_tx(rng),
                collection_id=plan.collection,
                item_id=plan.item,
                seller=plan.seller,
                buyer=plan.buyer,
                value_usd=plan.value,
                timestamp=_at(plan.day),
            )
        )
    order = sorted(range(len(events)), key=lambda i: (events[i].timestamp, events[i].tx_id))
    events = [events[i] for i in order]
    plans = [trades[i] for i in order]
    for event, plan in zip(events, plans):
        labels.append(
            GroundTruthLabel(
                tx_id=event.tx_id,
                suspicious=plan.typology is not None,
                planted_typology=plan.typology,
                ring_id=plan.ring_id,
            )
        )
    return events, labels


def _plan_rings(rng: random.Random, cfg: GeneratorConfig, budget: int) -> list[list[_PlannedTrade]]:
    """Plant typology rings summing to the suspicious budget.

    Ring sizes are clamped so the running total lands exactly on the budget
    whenever the remainder is plantable (never stranding a remainder smaller
    than the smallest detectable ring).
    """
    rings: list[list[_PlannedTrade]] = []
    names = [t for t in TYPOLOGIES if cfg.pattern_mix.get(t, 0.0) > 0.0]
    weights = [cfg.pattern_mix[t] for t in names]
    min_low = min(RING_TRADES[t][0] for t in names) if names else 0
    planted = 0
    seq = 0
    span = float(cfg.time_span_days)
    collections = [f"col-{i:04d}" for i in range(max(cfg.n_collections, 1))]
    while planted < budget:
        remaining = budget - planted
        typology = rng.choices(names, weights=weights, k=1)[0]
        if RING_TRADES[typology][0] > remaining:
            fitting = [t for t in names if RING_TRADES[t][0] <= remaining]
            if fitting:
                typology = fitting[0] if len(fitting) == 1 else rng.choice(fitting)
        low, high = RING_TRADES[typology]
        upper = min(high, max(remaining, low))
        size = rng.randint(low, upper)
        leftover = remaining - size
        if 0 < leftover < min_low:
            adjusted = None
            for s in range(size, low - 1, -1):
                if remaining - s == 0 or remaining - s >= min_low:
                    adjusted = s
                    break
            if adjusted is None:
                for s in range(size, upper + 1):
                    if remaining - s == 0 or remaining - s >= min_low:
                        adjusted = s
                        break
            size = adjusted if adjusted is not None else size
        ring_id = f"ring-{seq:05d}"
        collection = rng.choice(collections)
        start = rng.uniform(0.0, max(span - 29.0, 1.0))
        if typology == WASH_TRADING:
            ring = _plan_wash_ring(rng, ring_id, collection, start, size)
        elif typology == STRUCTURING:
            ring = _plan_structuring_ring(rng, ring_id, collection, start, size)
        else:
            ring = _plan_obfuscation_ring(rng, ring_id, collection, start, size)
        rings.append(ring)
        planted += len(ring)
        seq += 1
    return rings


def _plan_wash_ring(rng, ring_id, collection, start, size) -> list[_PlannedTrade]:
    """Back-and-forth trades of one item between two fresh wallets at $60-65."""
    a, b = _new_wallet(rng), _new_wallet(rng)
    item = _new_item(rng)
    window = rng.uniform(10.0, 28.0)
    days = sorted(rng.uniform(0.0, window) for _ in range(size))
    trades = []
    for i, offset in enumerate(days):
        seller, buyer = (a, b) if i % 2 == 0 else (b, a)
        value = Decimal(f"{rng.uniform(60.0, 65.0):.2f}")
        trades.append(
            _PlannedTrade(start + offset, seller, buyer, item, collection, value, WASH_TRADING, ring_id)
        )
    return trades


def _plan_structuring_ring(rng, ring_id, collection, start, size) -> list[_PlannedTrade]:
    """One fresh wallet buying just under the KYC threshold from fresh mules."""
    hub = _new_wallet(rng)
    window = rng.uniform(8.0, 25.0)
    days = sorted(rng.uniform(0.0, window) for _ in range(size))
    trades = []
    for offset in days:
        mule = _new_wallet(rng)
        value = Decimal(f"{rng.uniform(52.0, 98.0):.2f}")
        trades.append(
            _PlannedTrade(start + offset, mule, hub, _new_item(rng), collection, value, STRUCTURING, ring_id)
        )
    return trades


def _plan_obfuscation_ring(rng, ring_id, collection, start, size) -> list[_PlannedTrade]:
    """One item hopped through a chain of fresh wallets within the window."""
    custodians = [_new_wallet(rng) for _ in range(size + 1)]
    item = _new_item(rng)
    window = rng.uniform(5.0, 20.0)
    days = sorted(rng.uniform(0.0, window) for _ in range(size))
    trades = []
    for i, offset in enumerate(days):
        value = Decimal(f"{rng.uniform(150.0, 900.0):.2f}")
        trades.append(
            _PlannedTrade(
                start + offset, custodians[i], custodians[i + 1], item, collection, value, OBFUSCATION, ring_id
            )
        )
    return trades


def _plan_benign(
    rng: random.Random,
    cfg: GeneratorConfig,
    collections: list[str],
    n_benign: int,
    wallet_pool: int,
    span: float,
) -> list[_PlannedTrade]:
    """Benign background traffic.

    Wallets are born pairwise (their first trade), then pause for the
    new-wallet window before trading freely. Item resale is capped at three
    distinct custodians so custody chains never look like layering.
    """
    if n_benign <= 0:
        return []
    wallets = [_new_wallet(rng) for _ in range(max(min(wallet_pool, 2 * n_benign), 2))]
    ready: dict[str, float] = {}
    trades: list[_PlannedTrade] = []
    # item -> (current owner, last trade day, distinct custodians)
    items: list[tuple[str, str, float, frozenset[str]]] = []

    births = min(len(wallets) // 2, max(n_benign // 2, 1))
    birth_limit = max(span - 2 * NEW_WALLET_QUIET_DAYS, 1.0)
    born: list[str] = []
    for i in range(births):
        if len(trades) >= n_benign:
            break
        a, b = wallets[2 * i], wallets[2 * i + 1]
        day = rng.uniform(0.0, birth_limit)
        item = _new_item(rng)
        trades.append(_PlannedTrade(day, a, b, item, rng.choice(collections), _benign_price(rng, cfg)))
        ready[a] = day + NEW_WALLET_QUIET_DAYS
        ready[b] = day + NEW_WALLET_QUIET_DAYS
        items.append((item, b, day, frozenset((a, b))))
        born.extend((a, b))
    while len(trades) < n_benign:
        resale = items and rng.random() < 0.15
        if resale:
            idx = rng.randrange(len(items))
            item, owner, last_day, custody = items[idx]
            buyer = rng.choice(born)
            if buyer == owner or len(custody | {buyer}) > 3:
                resale = False
            else:
                earliest = max(ready[owner], ready[buyer], last_day + 0.01)
                if earliest >= span:
                    resale = False
                else:
                    day = rng.uniform(earliest, span)
                    trades.append(
                        _PlannedTrade(day, owner, buyer, item, rng.choice(collections), _benign_price(rng, cfg))
                    )
                    items[idx] = (item, buyer, day, custody | {buyer})
        if not resale:
            seller = rng.choice(born)
            buyer = rng.choice(born)
            while buyer == seller:
                buyer = rng.choice(born)
            earliest = max(ready[seller], ready[buyer])
            if earliest >= span:
                continue
            day = rng.uniform(earliest, span)
            item = _new_item(rng)
            trades.append(
                _PlannedTrade(day, seller, buyer, item, rng.choice(collections), _benign_price(rng, cfg))
            )
            items.append((item, buyer, day, frozenset((seller, buyer))))
    return trades


def write_stream(events: Iterable[TradeEvent], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(serialize_trade_event(event) + "\n")


def write_labels(labels: Iterable[GroundTruthLabel], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(serialize_label(label) + "\n")
