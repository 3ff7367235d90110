"""Independent brute-force oracles the detector and optimizer tests check against.

Everything here is deliberately written from the rule definitions, not from
the engine code: full rescans per event, no incremental state, separate
alternation/CV/objective arithmetic.
"""

from __future__ import annotations

import math
from datetime import timedelta
from decimal import Decimal
from typing import Sequence

from fccengine.ingest import TradeEvent
from fccengine.investigate import AnalystLabel, FeedbackRecord
from fccengine.monitor import RulesetConfig


def brute_force_alerts(events: Sequence[TradeEvent], cfg: RulesetConfig) -> set[tuple]:
    """All (type, subject, tx_refs) firings over a stream, deduplicated by
    overlapping window per (type, subject), scanning the full history at
    every event."""
    fired: list[tuple[str, str, tuple, tuple]] = []  # (type, subject, window, tx_refs)

    def dedup_add(kind: str, subject: str, window, tx_refs) -> None:
        for k, s, w, _ in fired:
            if k == kind and s == subject and _overlap(w, window):
                return
        fired.append((kind, subject, window, tuple(tx_refs)))

    first_seen: dict[str, object] = {}
    for event in events:
        for wallet in (event.seller, event.buyer):
            first_seen.setdefault(wallet, event.timestamp)

    history: list[TradeEvent] = []
    for event in events:
        history.append(event)
        at = event.timestamp
        wash_start = at - timedelta(days=cfg.wash_window_days)

        parties = [event.seller] if event.seller == event.buyer else [event.seller, event.buyer]
        for wallet in parties:
            # new wallet
            age = at - first_seen[wallet]
            if age < timedelta(days=cfg.new_wallet_age_days):
                window = (
                    first_seen[wallet],
                    first_seen[wallet] + timedelta(days=cfg.new_wallet_age_days),
                )
                dedup_add("NEW_WALLET", wallet, window, (event.tx_id,))
            # structuring
            lo = cfg.kyc_threshold_usd * Decimal(str(cfg.structuring_band[0]))
            hi = cfg.kyc_threshold_usd * Decimal(str(cfg.structuring_band[1]))
            in_band = [
                t
                for t in history
                if wallet in (t.seller, t.buyer)
                and wash_start <= t.timestamp <= at
                and lo <= t.value_usd < hi
            ]
            if len(in_band) >= cfg.structuring_min_count:
                window = (in_band[0].timestamp, in_band[-1].timestamp)
                dedup_add("STRUCTURING", wallet, window, tuple(t.tx_id for t in in_band))
            # velocity
            day = [
                t
                for t in history
                if wallet in (t.seller, t.buyer) and at - timedelta(hours=24) <= t.timestamp <= at
            ]
            if len(day) > cfg.velocity_max_trades_24h:
                window = (at - timedelta(hours=24), at)
                dedup_add("HIGH_VELOCITY", wallet, window, tuple(t.tx_id for t in day))

        # wash trading over the event's pair
        pair = tuple(sorted((event.seller, event.buyer)))
        pair_trades = [
            t
            for t in history
            if tuple(sorted((t.seller, t.buyer))) == pair and wash_start <= t.timestamp <= at
        ]
        if len(pair_trades) >= 2:
            alternations = _oracle_alternations(pair_trades)
            cv = _oracle_cv([t.value_usd for t in pair_trades])
            if alternations >= cfg.wash_min_alternations and cv <= cfg.wash_max_price_cv:
                window = (pair_trades[0].timestamp, pair_trades[-1].timestamp)
                refs = tuple(t.tx_id for t in pair_trades)
                for wallet in sorted(set(pair)):
                    dedup_add("WASH_TRADING", wallet, window, refs)

        # obfuscation over the event's item
        chain = [
            t for t in history if t.item_id == event.item_id and wash_start <= t.timestamp <= at
        ]
        custodians = set()
        for t in chain:
            custodians.add(t.seller)
            custodians.add(t.buyer)
        if len(custodians) >= cfg.obfuscation_min_hops:
            window = (chain[0].timestamp, chain[-1].timestamp)
            dedup_add("OBFUSCATION", event.tx_id, window, tuple(t.tx_id for t in chain))

    return {(k, s, refs) for k, s, _, refs in fired}


def _overlap(a, b) -> bool:
    if a is None or b is None:
        return True
    return a[0] <= b[1] and b[0] <= a[1]


def _oracle_alternations(trades: Sequence[TradeEvent]) -> int:
    if trades and trades[0].seller == trades[0].buyer:
        return len(trades) - 1
    flips = 0
    for i in range(1, len(trades)):
        if trades[i].seller != trades[i - 1].seller:
            flips += 1
    return flips


def _oracle_cv(values: Sequence[Decimal]) -> float:
    xs = [float(v) for v in values]
    mu = sum(xs) / len(xs)
    if mu == 0:
        return 0.0
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / len(xs)) / mu


def brute_force_theta(
    history: Sequence[FeedbackRecord], c_fn: int, c_fp: int, grid_step: int
) -> tuple[int, int]:
    """(theta, cost) minimizing the objective, lowest theta on ties."""
    best = None
    for theta in range(0, 101, grid_step):
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
        cost = c_fn * fn + c_fp * fp
        if best is None or cost < best[1]:
            best = (theta, cost)
    return best
