"""Wallet screening and profile maintenance.

Pseudonymous KYC/KYB analogue: sanctions and high-risk-jurisdiction list
checks at onboarding plus running behavioural profiles per wallet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Optional

from .ingest import TradeEvent

CLEAN_SCREENING_SENTENCE = "No sanctions or high-risk jurisdiction issues were found."


class CustomerRisk(str, Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"


class WalletNotParty(ValueError):
    """The event does not involve the profiled wallet."""


@dataclass
class WalletProfile:
    address: str
    first_seen: datetime
    trade_count: int = 0
    total_volume_usd: Decimal = Decimal("0")
    counterparties: set[str] = field(default_factory=set)
    jurisdiction: Optional[str] = None
    customer_risk: CustomerRisk = CustomerRisk.LOW


@dataclass(frozen=True)
class ScreeningResult:
    address: str
    sanctions_hit: bool
    high_risk_jurisdiction: bool
    customer_risk: CustomerRisk
    rationale: str


@dataclass
class ScreeningLists:
    sanctions: set[str] = field(default_factory=set)
    high_risk_jurisdictions: set[str] = field(default_factory=set)

    @classmethod
    def load(cls, sanctions_path: Path | None, jurisdictions_path: Path | None) -> "ScreeningLists":
        return cls(
            sanctions={e.lower() for e in _read_list(sanctions_path)},
            high_risk_jurisdictions={e.upper() for e in _read_list(jurisdictions_path)},
        )


def _read_list(path: Path | None) -> list[str]:
    if path is None or not Path(path).exists():
        return []
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            text = line.split("#", 1)[0].strip()
            if text:
                entries.append(text)
    return entries


def screen_wallet(
    address: str,
    profile: Optional[WalletProfile],
    lists: ScreeningLists,
) -> ScreeningResult:
    """Deterministic list-based screening; unknown wallets screen clean by default."""
    address = address.lower()
    sanctions_hit = address in lists.sanctions
    jurisdiction = profile.jurisdiction if profile is not None else None
    high_risk = jurisdiction is not None and jurisdiction.upper() in lists.high_risk_jurisdictions

    if sanctions_hit:
        risk = CustomerRisk.HIGH
    elif high_risk:
        risk = CustomerRisk.MEDIUM
    else:
        risk = CustomerRisk.LOW

    checks = [
        "Sanctions list check: match" if sanctions_hit else "Sanctions list check: no match",
        (
            f"jurisdiction check: {jurisdiction} is high-risk"
            if high_risk
            else f"jurisdiction check: {jurisdiction} is not high-risk"
            if jurisdiction
            else "jurisdiction check: no jurisdiction on record"
        ),
    ]
    rationale = "; ".join(checks) + "."
    if not sanctions_hit and not high_risk:
        rationale += " " + CLEAN_SCREENING_SENTENCE
    else:
        rationale += f" Customer risk rated {risk.value}."
    return ScreeningResult(
        address=address,
        sanctions_hit=sanctions_hit,
        high_risk_jurisdiction=high_risk,
        customer_risk=risk,
        rationale=rationale,
    )


def update_wallet_profile(profile: WalletProfile, event: TradeEvent) -> WalletProfile:
    """Fold one trade into the profile (mutates and returns it)."""
    if profile.address not in (event.seller, event.buyer):
        raise WalletNotParty(f"{profile.address} is neither buyer nor seller of {event.tx_id}")
    profile.trade_count += 1
    profile.total_volume_usd += event.value_usd
    counterparty = event.buyer if profile.address == event.seller else event.seller
    if counterparty != profile.address:
        profile.counterparties.add(counterparty)
    if event.timestamp < profile.first_seen:
        profile.first_seen = event.timestamp
    return profile
