"""Case investigation, the semantic cache, and the learning loop.

Dispositions are deterministic and explainable: escalation compares the
case risk score against the current threshold, mandatory types always
escalate, and the rationale is rendered from key-level facts only so a
cache hit is indistinguishable from a fresh run on an equivalent case.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from decimal import Decimal
from enum import Enum
from typing import TYPE_CHECKING, Optional, Sequence

from .ingest import EventStore
from .monitor import (
    Alert,
    AlertType,
    Band,
    BAND_WORDS,
    RulesetConfig,
    RiskAggregate,
    aggregate_case_risk,
    alternation_count,
    structuring_bounds,
)
from .screening import ScreeningResult, WalletProfile

if TYPE_CHECKING:
    from .orchestrate import ModelRegistry

MANDATORY_ESCALATION_TYPES = frozenset({AlertType.SANCTIONS_HIT})


class Outcome(str, Enum):
    AUTO_CLOSE = "AUTO_CLOSE"
    ESCALATE = "ESCALATE"


class Provenance(str, Enum):
    FRESH = "FRESH"
    CACHE = "CACHE"


class AnalystLabel(str, Enum):
    CONFIRMED_SUSPICIOUS = "CONFIRMED_SUSPICIOUS"
    FALSE_POSITIVE = "FALSE_POSITIVE"


class DisjointAlerts(ValueError):
    """The alerts do not share any wallet or transaction."""


class DuplicateFeedback(ValueError):
    """A feedback record already exists for the case."""


class UnknownCase(KeyError):
    pass


class NotEscalated(ValueError):
    pass


@dataclass(frozen=True)
class BehaviorSummary:
    trade_count_30d: int
    value_min: Optional[Decimal]
    value_max: Optional[Decimal]
    alternation_count: int
    wallet_age_days: int


@dataclass(frozen=True)
class CaseContext:
    case_id: str
    subject_wallets: tuple[tuple[str, str], ...]  # (address, role)
    tx_refs: tuple[str, ...]
    alerts: tuple[Alert, ...]
    risk: RiskAggregate
    screening: tuple[ScreeningResult, ...]
    behavior: BehaviorSummary


@dataclass(frozen=True)
class SemanticKey:
    alert_types: tuple[str, ...]
    band: Band
    trade_count_bucket: str
    value_bucket: str
    wallet_age_bucket: str

    def label(self) -> str:
        return (
            f"types={'+'.join(self.alert_types)} band={self.band.name} "
            f"trades={self.trade_count_bucket} value={self.value_bucket} "
            f"age={self.wallet_age_bucket}"
        )


@dataclass(frozen=True)
class Disposition:
    outcome: Outcome
    str_recommended: bool
    rationale: str
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "str_recommended": self.str_recommended,
            "rationale": self.rationale,
            "provenance": self.provenance.value,
        }


@dataclass
class CacheEntry:
    key: SemanticKey
    disposition: Disposition
    model_profile_id: str
    created_at: datetime
    hit_count: int = 0


@dataclass(frozen=True)
class FeedbackRecord:
    case_id: str
    key: SemanticKey
    case_score: int
    analyst_label: AnalystLabel
    decided_at: datetime

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "key": self.key.label(),
            "case_score": self.case_score,
            "analyst_label": self.analyst_label.value,
            "decided_at": self.decided_at,
        }


@dataclass
class OptimizerState:
    theta: int = 50
    c_fn: int = 5
    c_fp: int = 1
    grid_step: int = 5
    history_window: int = 500

    def validate(self) -> None:
        if self.theta % self.grid_step != 0 or not 0 <= self.theta <= 100:
            raise ValueError("theta must sit on the optimizer grid")
        if self.c_fn <= 0 or self.c_fp <= 0 or self.grid_step <= 0 or self.history_window <= 0:
            raise ValueError("optimizer weights and windows must be positive")


# ---------------------------------------------------------------------------
# Context assembly
# ---------------------------------------------------------------------------


def alert_linkage_keys(alert: Alert, store: EventStore | None = None) -> set[str]:
    """Wallets and transactions an alert is about, for case grouping.

    Referenced transactions contribute their counterparties, so an alert on
    a wallet links to transaction-level alerts touching the same trades.
    """
    keys = {alert.subject, *alert.tx_refs}
    if store is not None:
        for tx in alert.tx_refs:
            event = store.by_tx.get(tx)
            if event is not None:
                keys.update(event.parties())
    return keys


def _linkage_components(alerts: Sequence[Alert], store: EventStore | None = None) -> int:
    """Count connected components linking alerts by shared wallet or tx."""
    parent = list(range(len(alerts)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        parent[find(i)] = find(j)

    by_subject: dict[str, int] = {}
    for i, alert in enumerate(alerts):
        for key in alert_linkage_keys(alert, store):
            if key in by_subject:
                union(i, by_subject[key])
            else:
                by_subject[key] = i
    return len({find(i) for i in range(len(alerts))})


def build_case_context(
    alerts: Sequence[Alert],
    profiles: dict[str, WalletProfile],
    screening: Sequence[ScreeningResult],
    store: EventStore,
    cfg: RulesetConfig,
    case_id: str,
) -> CaseContext:
    """Assemble the investigation context for one connected alert group."""
    if not alerts:
        raise DisjointAlerts("a case needs at least one alert")
    if _linkage_components(alerts, store) > 1:
        raise DisjointAlerts("alerts do not share a wallet or transaction")

    tx_refs: list[str] = []
    for alert in alerts:
        for tx in alert.tx_refs:
            if tx not in tx_refs:
                tx_refs.append(tx)
    tx_refs.sort(
        key=lambda tx: (0, store.by_tx[tx].timestamp.isoformat(), tx)
        if tx in store.by_tx
        else (1, "", tx)
    )

    wallets: list[str] = []
    for alert in alerts:
        if alert.subject in profiles and alert.subject not in wallets:
            wallets.append(alert.subject)
    for tx in tx_refs:
        event = store.by_tx.get(tx)
        if event is None:
            continue
        for wallet in event.parties():
            if wallet not in wallets:
                wallets.append(wallet)

    primary = store.by_tx.get(tx_refs[0]) if tx_refs else None
    roles = []
    for wallet in wallets:
        if primary is not None and wallet == primary.buyer:
            roles.append((wallet, "buyer"))
        elif primary is not None and wallet == primary.seller:
            roles.append((wallet, "seller"))
        else:
            role = "counterparty"
            for tx in tx_refs:
                event = store.by_tx.get(tx)
                if event is None:
                    continue
                if wallet == event.buyer:
                    role = "buyer"
                    break
                if wallet == event.seller:
                    role = "seller"
                    break
            roles.append((wallet, role))

    behavior = _behavior_summary(wallets, tx_refs, store, cfg)
    risk = aggregate_case_risk(alerts, cfg, subject=wallets[0] if wallets else alerts[0].subject)
    screened = tuple(s for s in screening if s.address in set(wallets))
    return CaseContext(
        case_id=case_id,
        subject_wallets=tuple(roles),
        tx_refs=tuple(tx_refs),
        alerts=tuple(alerts),
        risk=risk,
        screening=screened,
        behavior=behavior,
    )


def _behavior_summary(wallets, tx_refs, store: EventStore, cfg: RulesetConfig) -> BehaviorSummary:
    window_end = None
    for tx in tx_refs:
        event = store.by_tx.get(tx)
        if event is not None and (window_end is None or event.timestamp > window_end):
            window_end = event.timestamp
    if window_end is None:
        return BehaviorSummary(0, None, None, 0, 0)
    window_start = window_end - timedelta(days=cfg.wash_window_days)

    seen: dict[str, bool] = {}
    trades = []
    for wallet in wallets:
        for trade in store.wallet_trades.get(wallet, []):
            if window_start <= trade.timestamp <= window_end and trade.tx_id not in seen:
                seen[trade.tx_id] = True
                trades.append(trade)
    trades.sort(key=lambda t: (t.timestamp, t.tx_id))

    values = [t.value_usd for t in trades]
    max_alternations = 0
    wallet_set = set(wallets)
    pair_groups: dict[tuple[str, str], list] = {}
    for trade in trades:
        key = EventStore.pair_key(trade.seller, trade.buyer)
        if key[0] in wallet_set or key[1] in wallet_set:
            pair_groups.setdefault(key, []).append(trade)
    for group in pair_groups.values():
        max_alternations = max(max_alternations, alternation_count(group))

    # Age is measured at the wallet's first involvement in the case: the
    # question is how old the wallet was when the flagged activity began.
    age_days = 0
    ages = []
    case_txs = set(tx_refs)
    for wallet in wallets:
        first_seen = store.first_seen.get(wallet)
        if first_seen is None:
            continue
        involvement = None
        for trade in store.wallet_trades.get(wallet, []):
            if trade.tx_id in case_txs:
                involvement = trade.timestamp
                break
        if involvement is None:
            involvement = window_end
        ages.append(max((involvement - first_seen).total_seconds(), 0.0) / 86400)
    if ages:
        age_days = int(min(ages))
    return BehaviorSummary(
        trade_count_30d=len(trades),
        value_min=min(values) if values else None,
        value_max=max(values) if values else None,
        alternation_count=max_alternations,
        wallet_age_days=age_days,
    )


# ---------------------------------------------------------------------------
# Semantic cache
# ---------------------------------------------------------------------------


def trade_count_bucket(count: int) -> str:
    if count <= 1:
        return "1"
    if count <= 5:
        return "2-5"
    if count <= 20:
        return "6-20"
    return ">20"


def value_bucket(value: Optional[Decimal], cfg: RulesetConfig) -> str:
    lo, _ = structuring_bounds(cfg)
    threshold = cfg.kyc_threshold_usd
    if value is None or value < lo:
        return "<0.5T"
    if value < threshold:
        return "0.5T-T"
    return ">=T"


def wallet_age_bucket(age_days: int) -> str:
    if age_days < 7:
        return "<7d"
    if age_days <= 90:
        return "7-90d"
    return ">90d"


def semantic_key(context: CaseContext, cfg: RulesetConfig) -> SemanticKey:
    """Pure bucketed fingerprint of a case; the cache's exact-match key."""
    types = tuple(sorted({a.alert_type.value for a in context.alerts}))
    return SemanticKey(
        alert_types=types,
        band=context.risk.band,
        trade_count_bucket=trade_count_bucket(context.behavior.trade_count_30d),
        value_bucket=value_bucket(context.behavior.value_max, cfg),
        wallet_age_bucket=wallet_age_bucket(context.behavior.wallet_age_days),
    )


class SemanticCache:
    def __init__(self) -> None:
        self.entries: dict[SemanticKey, CacheEntry] = {}
        self.hits = 0
        self.misses = 0

    def insert(self, key: SemanticKey, disposition: Disposition, model_profile_id: str, at: datetime) -> CacheEntry:
        entry = CacheEntry(key=key, disposition=disposition, model_profile_id=model_profile_id, created_at=at)
        self.entries[key] = entry
        return entry


def cache_lookup(
    key: SemanticKey, cache: SemanticCache, registry: "ModelRegistry | None"
) -> Optional[CacheEntry]:
    """Exact-match lookup; entries from excluded models are invisible."""
    entry = cache.entries.get(key)
    if entry is None:
        cache.misses += 1
        return None
    if registry is not None and not registry.is_healthy(entry.model_profile_id):
        cache.misses += 1
        return None
    entry.hit_count += 1
    cache.hits += 1
    return entry


# ---------------------------------------------------------------------------
# Disposition
# ---------------------------------------------------------------------------


def render_disposition_rationale(
    key: SemanticKey, score: int, theta: int, escalate: bool, mandatory: bool, forced: bool = False
) -> str:
    """Deterministic, key-level rationale (no case-specific values) so cached
    and fresh dispositions for equivalent cases are byte-identical."""
    head = (
        f"Case risk score {score} ({BAND_WORDS[key.band]}) from alert types "
        f"{', '.join(key.alert_types)}; activity bucket {key.trade_count_bucket} trades, "
        f"values {key.value_bucket}, youngest wallet {key.wallet_age_bucket}."
    )
    if mandatory:
        verdict = "Mandatory escalation: a sanctions-hit alert is present."
    elif forced:
        verdict = "Escalated under guardrail policy: risk band exceeds autonomous close authority."
    elif escalate:
        verdict = f"Score {score} meets the escalation threshold (theta={theta})."
    else:
        verdict = f"Score {score} is below the escalation threshold (theta={theta}); auto-closing."
    return f"{head} {verdict}"


def investigate(
    context: CaseContext,
    optimizer: OptimizerState,
    cache: SemanticCache,
    cfg: RulesetConfig,
    registry: "ModelRegistry | None" = None,
    model_profile_id: str = "rules-v1",
    at: Optional[datetime] = None,
) -> Disposition:
    """Produce a disposition, consulting and feeding the semantic cache."""
    key = semantic_key(context, cfg)
    hit = cache_lookup(key, cache, registry)
    if hit is not None:
        return replace(hit.disposition, provenance=Provenance.CACHE)

    types = {a.alert_type for a in context.alerts}
    mandatory = bool(types & MANDATORY_ESCALATION_TYPES)
    escalate = mandatory or context.risk.score >= optimizer.theta
    str_recommended = escalate and context.risk.band >= Band.MODERATE_HIGH
    rationale = render_disposition_rationale(key, context.risk.score, optimizer.theta, escalate, mandatory)
    disposition = Disposition(
        outcome=Outcome.ESCALATE if escalate else Outcome.AUTO_CLOSE,
        str_recommended=str_recommended,
        rationale=rationale,
        provenance=Provenance.FRESH,
    )
    cache.insert(key, disposition, model_profile_id, at or datetime.max)
    return disposition


# ---------------------------------------------------------------------------
# Reinforcement cache and threshold optimization
# ---------------------------------------------------------------------------


class ReinforcementCache:
    def __init__(self) -> None:
        self.records: list[FeedbackRecord] = []
        self.by_case: dict[str, FeedbackRecord] = {}

    def add(self, record: FeedbackRecord) -> FeedbackRecord:
        if record.case_id in self.by_case:
            raise DuplicateFeedback(f"feedback already recorded for case {record.case_id}")
        self.records.append(record)
        self.by_case[record.case_id] = record
        return record

    def counts(self) -> dict[str, int]:
        confirmed = sum(1 for r in self.records if r.analyst_label is AnalystLabel.CONFIRMED_SUSPICIOUS)
        return {"confirmed_suspicious": confirmed, "false_positive": len(self.records) - confirmed}


def objective(history: Sequence[FeedbackRecord], theta: int, c_fn: int, c_fp: int) -> int:
    """J(theta): weighted count of missed confirmations plus kept false positives."""
    fn = sum(
        1
        for r in history
        if r.analyst_label is AnalystLabel.CONFIRMED_SUSPICIOUS and r.case_score < theta
    )
    fp = sum(
        1
        for r in history
        if r.analyst_label is AnalystLabel.FALSE_POSITIVE and r.case_score >= theta
    )
    return c_fn * fn + c_fp * fp


def optimize_threshold(history: Sequence[FeedbackRecord], state: OptimizerState) -> int:
    """Grid search for the cost-minimal threshold; ties break to the lowest
    theta (favouring recall). Empty history leaves theta unchanged."""
    recent = list(history)[-state.history_window:]
    if not recent:
        return state.theta
    best_theta = None
    best_cost = None
    for theta in range(0, 101, state.grid_step):
        cost = objective(recent, theta, state.c_fn, state.c_fp)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_theta = theta
    return best_theta
