"""Rule-based transaction monitoring.

Every trade is evaluated against the typology catalog for both
counterparties (trade duality), producing typed, scored alerts that are
deduplicated per subject and overlapping window. Risk aggregates sum the
base scores of distinct alert types, capped at 100.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from decimal import Decimal
from enum import Enum, IntEnum
from typing import Optional, Sequence

from .canonical import canonical_dumps, format_decimal, format_timestamp
from .ingest import EventStore, TradeEvent
from .screening import ScreeningLists, WalletProfile


class AlertType(str, Enum):
    NEW_WALLET = "NEW_WALLET"
    WASH_TRADING = "WASH_TRADING"
    STRUCTURING = "STRUCTURING"
    HIGH_VELOCITY = "HIGH_VELOCITY"
    OBFUSCATION = "OBFUSCATION"
    SANCTIONS_HIT = "SANCTIONS_HIT"
    HIGH_RISK_JURISDICTION = "HIGH_RISK_JURISDICTION"


ALERT_TYPE_ORDER = {t: i for i, t in enumerate(AlertType)}

DEFAULT_BASE_SCORES = {
    AlertType.NEW_WALLET: 10,
    AlertType.WASH_TRADING: 40,
    AlertType.STRUCTURING: 20,
    AlertType.HIGH_VELOCITY: 15,
    AlertType.OBFUSCATION: 35,
    AlertType.SANCTIONS_HIT: 100,
    AlertType.HIGH_RISK_JURISDICTION: 30,
}


class Band(IntEnum):
    LOW = 0
    MODERATE = 1
    MODERATE_HIGH = 2
    HIGH = 3


BAND_WORDS = {
    Band.LOW: "low",
    Band.MODERATE: "moderate",
    Band.MODERATE_HIGH: "moderate to high",
    Band.HIGH: "high",
}


class OutOfRange(ValueError):
    """Score outside [0, 100]."""


class InvalidRuleset(ValueError):
    """RulesetConfig violates its own invariants."""


@dataclass
class RulesetConfig:
    base_scores: dict[AlertType, int] = field(default_factory=lambda: dict(DEFAULT_BASE_SCORES))
    new_wallet_age_days: int = 7
    wash_window_days: int = 30
    wash_min_alternations: int = 3
    wash_max_price_cv: float = 0.10
    kyc_threshold_usd: Decimal = Decimal("100")
    structuring_band: tuple[float, float] = (0.5, 1.0)
    structuring_min_count: int = 3
    velocity_max_trades_24h: int = 20
    obfuscation_min_hops: int = 4

    def validate(self) -> None:
        for alert_type in AlertType:
            score = self.base_scores.get(alert_type)
            if score is None or not 0 <= score <= 100:
                raise InvalidRuleset(f"base score for {alert_type.value} must be in [0, 100]")
        positive = (
            self.new_wallet_age_days,
            self.wash_window_days,
            self.wash_min_alternations,
            self.structuring_min_count,
            self.velocity_max_trades_24h,
            self.obfuscation_min_hops,
        )
        if any(v <= 0 for v in positive):
            raise InvalidRuleset("window and count parameters must be positive")
        lo, hi = self.structuring_band
        if not (0.0 < lo < hi <= 1.0):
            raise InvalidRuleset("structuring_band must sit within (0, 1]")
        if self.wash_max_price_cv <= 0 or self.kyc_threshold_usd <= 0:
            raise InvalidRuleset("wash_max_price_cv and kyc_threshold_usd must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "RulesetConfig":
        cfg = cls()
        scores = raw.get("base_scores", {})
        for name, value in scores.items():
            cfg.base_scores[AlertType(name)] = int(value)
        for key in (
            "new_wallet_age_days",
            "wash_window_days",
            "wash_min_alternations",
            "structuring_min_count",
            "velocity_max_trades_24h",
            "obfuscation_min_hops",
        ):
            if key in raw:
                setattr(cfg, key, int(raw[key]))
        if "wash_max_price_cv" in raw:
            cfg.wash_max_price_cv = float(raw["wash_max_price_cv"])
        if "kyc_threshold_usd" in raw:
            cfg.kyc_threshold_usd = Decimal(str(raw["kyc_threshold_usd"]))
        if "structuring_band" in raw:
            lo, hi = raw["structuring_band"]
            cfg.structuring_band = (float(lo), float(hi))
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class Alert:
    alert_id: str
    alert_type: AlertType
    subject: str
    tx_refs: tuple[str, ...]
    score: int
    evidence: str
    window: Optional[tuple[datetime, datetime]] = None

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "alert_type": self.alert_type.value,
            "subject": self.subject,
            "tx_refs": list(self.tx_refs),
            "score": self.score,
            "evidence": self.evidence,
            "window": [format_timestamp(self.window[0]), format_timestamp(self.window[1])]
            if self.window
            else None,
        }


@dataclass(frozen=True)
class RiskAggregate:
    subject: str
    score: int
    band: Band
    contributing_alerts: tuple[str, ...]


def risk_band(score: int) -> Band:
    if not 0 <= score <= 100:
        raise OutOfRange(f"score {score} outside [0, 100]")
    if score < 25:
        return Band.LOW
    if score < 50:
        return Band.MODERATE
    if score < 75:
        return Band.MODERATE_HIGH
    return Band.HIGH


def aggregate_case_risk(alerts: Sequence[Alert], cfg: RulesetConfig, subject: str | None = None) -> RiskAggregate:
    """Sum base scores over distinct alert types, capped at 100."""
    types = {a.alert_type for a in alerts}
    score = min(100, sum(cfg.base_scores[t] for t in types))
    if subject is None:
        subject = alerts[0].subject if alerts else ""
    return RiskAggregate(
        subject=subject,
        score=score,
        band=risk_band(score),
        contributing_alerts=tuple(a.alert_id for a in alerts),
    )


def _alert_id(alert_type: AlertType, subject: str, window, tx_refs: Sequence[str]) -> str:
    payload = canonical_dumps(
        {
            "type": alert_type.value,
            "subject": subject,
            "window": [format_timestamp(window[0]), format_timestamp(window[1])] if window else None,
            "tx_refs": list(tx_refs),
        }
    )
    return "AL" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _make_alert(alert_type, subject, tx_refs, cfg, evidence, window=None) -> Alert:
    return Alert(
        alert_id=_alert_id(alert_type, subject, window, tx_refs),
        alert_type=alert_type,
        subject=subject,
        tx_refs=tuple(tx_refs),
        score=cfg.base_scores[alert_type],
        evidence=evidence,
        window=window,
    )


# ---------------------------------------------------------------------------
# Detectors (pure given their history slice)
# ---------------------------------------------------------------------------


def detect_new_wallet(
    profile: WalletProfile, at: datetime, cfg: RulesetConfig, tx_ref: str | None = None
) -> Optional[Alert]:
    """Fires while the wallet is strictly younger than the configured window."""
    age = at - profile.first_seen
    if age >= timedelta(days=cfg.new_wallet_age_days):
        return None
    window = (profile.first_seen, profile.first_seen + timedelta(days=cfg.new_wallet_age_days))
    evidence = (
        f"wallet {profile.address} first seen {format_timestamp(profile.first_seen)}, "
        f"{age.total_seconds() / 86400:.1f} days before this trade "
        f"(threshold {cfg.new_wallet_age_days} days)"
    )
    tx_refs = (tx_ref,) if tx_ref else ()
    return _make_alert(AlertType.NEW_WALLET, profile.address, tx_refs, cfg, evidence, window)


def alternation_count(trades: Sequence[TradeEvent]) -> int:
    """Direction changes over a pair's time-ordered trades.

    For a self-pair every consecutive trade counts as an alternation, since
    each trade is simultaneously A->B and B->A.
    """
    if len(trades) < 2:
        return 0
    if trades[0].seller == trades[0].buyer:
        return len(trades) - 1
    count = 0
    for prev, cur in zip(trades, trades[1:]):
        if prev.seller != cur.seller:
            count += 1
    return count


def value_cv(values: Sequence[Decimal]) -> float:
    floats = [float(v) for v in values]
    mean = sum(floats) / len(floats)
    if mean == 0:
        return 0.0
    variance = sum((x - mean) ** 2 for x in floats) / len(floats)
    return math.sqrt(variance) / mean


def detect_wash_trading(pair_history: Sequence[TradeEvent], cfg: RulesetConfig) -> list[Alert]:
    """Alternating back-and-forth trades at near-constant value.

    `pair_history` is the pair's trades within the wash window, time-ordered.
    Returns mirrored alerts for both wallets (empty when the rule does not fire).
    """
    if len(pair_history) < 2:
        return []
    alternations = alternation_count(pair_history)
    if alternations < cfg.wash_min_alternations:
        return []
    values = [t.value_usd for t in pair_history]
    cv = value_cv(values)
    if cv > cfg.wash_max_price_cv:
        return []
    a, b = EventStore.pair_key(pair_history[0].seller, pair_history[0].buyer)
    window = (pair_history[0].timestamp, pair_history[-1].timestamp)
    span_days = (window[1] - window[0]).total_seconds() / 86400
    evidence = (
        f"{len(pair_history)} trades between {a} and {b} with {alternations} direction "
        f"alternations; values {format_decimal(min(values))}-{format_decimal(max(values))} USD "
        f"(cv {cv:.3f}) within {span_days:.1f} days"
    )
    tx_refs = tuple(t.tx_id for t in pair_history)
    return [
        _make_alert(AlertType.WASH_TRADING, wallet, tx_refs, cfg, evidence, window)
        for wallet in dict.fromkeys((a, b))
    ]


def structuring_bounds(cfg: RulesetConfig) -> tuple[Decimal, Decimal]:
    threshold = cfg.kyc_threshold_usd
    lo = threshold * Decimal(str(cfg.structuring_band[0]))
    hi = threshold * Decimal(str(cfg.structuring_band[1]))
    return lo, hi


def detect_structuring(
    wallet_history: Sequence[TradeEvent], cfg: RulesetConfig, wallet: str
) -> Optional[Alert]:
    """Repeated sub-threshold trades within the wash window."""
    lo, hi = structuring_bounds(cfg)
    in_band = [t for t in wallet_history if lo <= t.value_usd < hi]
    if len(in_band) < cfg.structuring_min_count:
        return None
    window = (in_band[0].timestamp, in_band[-1].timestamp)
    evidence = (
        f"{len(in_band)} trades for {wallet} in the [{format_decimal(lo)}, {format_decimal(hi)}) USD "
        f"band (KYC threshold {format_decimal(cfg.kyc_threshold_usd)}) within "
        f"{cfg.wash_window_days} days"
    )
    return _make_alert(
        AlertType.STRUCTURING, wallet, tuple(t.tx_id for t in in_band), cfg, evidence, window
    )


def detect_obfuscation(item_history: Sequence[TradeEvent], cfg: RulesetConfig) -> Optional[Alert]:
    """Custody of one item passing through many distinct wallets."""
    if not item_history:
        return None
    custodians: set[str] = set()
    for trade in item_history:
        custodians.add(trade.seller)
        custodians.add(trade.buyer)
    if len(custodians) < cfg.obfuscation_min_hops:
        return None
    last = item_history[-1]
    window = (item_history[0].timestamp, last.timestamp)
    evidence = (
        f"item {last.item_id} passed through {len(custodians)} distinct wallets over "
        f"{len(item_history)} trades within {cfg.wash_window_days} days"
    )
    return _make_alert(
        AlertType.OBFUSCATION, last.tx_id, tuple(t.tx_id for t in item_history), cfg, evidence, window
    )


def detect_high_velocity(
    wallet_history_24h: Sequence[TradeEvent], cfg: RulesetConfig, wallet: str, at: datetime
) -> Optional[Alert]:
    """More trades in the trailing 24 hours than the configured ceiling."""
    if len(wallet_history_24h) <= cfg.velocity_max_trades_24h:
        return None
    window = (at - timedelta(hours=24), at)
    evidence = (
        f"{len(wallet_history_24h)} trades for {wallet} in 24h "
        f"(ceiling {cfg.velocity_max_trades_24h})"
    )
    return _make_alert(
        AlertType.HIGH_VELOCITY,
        wallet,
        tuple(t.tx_id for t in wallet_history_24h),
        cfg,
        evidence,
        window,
    )


# ---------------------------------------------------------------------------
# Stateful evaluation with duplicate suppression
# ---------------------------------------------------------------------------


def _windows_overlap(a, b) -> bool:
    if a is None or b is None:
        return True
    return a[0] <= b[1] and b[0] <= a[1]


@dataclass
class MonitoringState:
    store: EventStore
    profiles: dict[str, WalletProfile]
    lists: ScreeningLists
    cfg: RulesetConfig
    emitted_windows: dict[tuple[AlertType, str], list] = field(default_factory=dict)
    alerts: list[Alert] = field(default_factory=list)

    def is_duplicate(self, alert: Alert) -> bool:
        seen = self.emitted_windows.get((alert.alert_type, alert.subject), [])
        return any(_windows_overlap(alert.window, w) for w in seen)

    def record(self, alert: Alert) -> None:
        self.emitted_windows.setdefault((alert.alert_type, alert.subject), []).append(alert.window)
        self.alerts.append(alert)


def _window_slice(trades: Sequence[TradeEvent], start: datetime, end: datetime) -> list[TradeEvent]:
    return [t for t in trades if start <= t.timestamp <= end]


def evaluate_trade(event: TradeEvent, state: MonitoringState) -> list[Alert]:
    """Apply every detector to both counterparties plus transaction-level checks.

    Profiles must already include this event. Output is deterministic:
    sorted by alert type order then subject, duplicates suppressed against
    previously emitted alerts.
    """
    cfg = state.cfg
    at = event.timestamp
    wash_start = at - timedelta(days=cfg.wash_window_days)
    candidates: list[Alert] = []

    for wallet in event.parties():
        profile = state.profiles[wallet]
        if wallet in state.lists.sanctions:
            candidates.append(
                _make_alert(
                    AlertType.SANCTIONS_HIT,
                    wallet,
                    (event.tx_id,),
                    cfg,
                    f"wallet {wallet} matches the sanctions list",
                )
            )
        jurisdiction = profile.jurisdiction.upper() if profile.jurisdiction else None
        if jurisdiction and jurisdiction in state.lists.high_risk_jurisdictions:
            candidates.append(
                _make_alert(
                    AlertType.HIGH_RISK_JURISDICTION,
                    wallet,
                    (event.tx_id,),
                    cfg,
                    f"wallet {wallet} is registered in high-risk jurisdiction {jurisdiction}",
                )
            )
        new_wallet = detect_new_wallet(profile, at, cfg, tx_ref=event.tx_id)
        if new_wallet is not None:
            candidates.append(new_wallet)
        wallet_window = _window_slice(state.store.wallet_trades.get(wallet, []), wash_start, at)
        structuring = detect_structuring(wallet_window, cfg, wallet)
        if structuring is not None:
            candidates.append(structuring)
        day_window = _window_slice(
            state.store.wallet_trades.get(wallet, []), at - timedelta(hours=24), at
        )
        velocity = detect_high_velocity(day_window, cfg, wallet, at)
        if velocity is not None:
            candidates.append(velocity)

    pair = EventStore.pair_key(event.seller, event.buyer)
    pair_window = _window_slice(state.store.pair_trades.get(pair, []), wash_start, at)
    candidates.extend(detect_wash_trading(pair_window, cfg))

    item_window = _window_slice(state.store.item_trades.get(event.item_id, []), wash_start, at)
    obfuscation = detect_obfuscation(item_window, cfg)
    if obfuscation is not None:
        candidates.append(obfuscation)

    emitted: list[Alert] = []
    candidates.sort(key=lambda a: (ALERT_TYPE_ORDER[a.alert_type], a.subject))
    for alert in candidates:
        if state.is_duplicate(alert):
            continue
        if any(
            a.alert_type == alert.alert_type and a.subject == alert.subject for a in emitted
        ):
            continue
        state.record(alert)
        emitted.append(alert)
    return emitted
