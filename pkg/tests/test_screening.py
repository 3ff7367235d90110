from __future__ import annotations

import itertools
from decimal import Decimal

import pytest

from fccengine.screening import (
    CustomerRisk,
    ScreeningLists,
    WalletNotParty,
    WalletProfile,
    screen_wallet,
    update_wallet_profile,
)

from conftest import at_day, make_event, wallet, SELLER, BUYER


def fresh_profile(address: str, day: float = 0) -> WalletProfile:
    return WalletProfile(address=address, first_seen=at_day(day))


class TestScreenWallet:
    def test_sanctioned_wallet_is_high_risk(self):
        addr = wallet("sanctioned")
        lists = ScreeningLists(sanctions={addr})
        result = screen_wallet(addr, fresh_profile(addr), lists)
        assert result.sanctions_hit is True
        assert result.customer_risk is CustomerRisk.HIGH

    def test_figure_wallets_screen_clean_with_empty_lists(self):
        lists = ScreeningLists()
        for addr in (SELLER, BUYER):
            result = screen_wallet(addr, fresh_profile(addr), lists)
            assert not result.sanctions_hit and not result.high_risk_jurisdiction
            assert result.customer_risk is CustomerRisk.LOW
            assert "no sanctions or high-risk jurisdiction" in result.rationale.lower()

    def test_high_risk_jurisdiction_is_medium(self):
        addr = wallet("hrj")
        profile = fresh_profile(addr)
        profile.jurisdiction = "XX"
        lists = ScreeningLists(high_risk_jurisdictions={"XX"})
        result = screen_wallet(addr, profile, lists)
        assert result.high_risk_jurisdiction is True
        assert not result.sanctions_hit
        assert result.customer_risk is CustomerRisk.MEDIUM

    def test_unknown_wallet_screens_clean(self):
        result = screen_wallet(wallet("unknown"), None, ScreeningLists())
        assert result.customer_risk is CustomerRisk.LOW
        assert result.rationale

    def test_purity(self):
        addr = wallet("pure")
        lists = ScreeningLists(sanctions={wallet("other")})
        first = screen_wallet(addr, fresh_profile(addr), lists)
        second = screen_wallet(addr, fresh_profile(addr), lists)
        assert first == second

    def test_monotone_risk_under_list_growth(self):
        order = [CustomerRisk.LOW, CustomerRisk.MEDIUM, CustomerRisk.HIGH]
        addr = wallet("grow")
        profile = fresh_profile(addr)
        profile.jurisdiction = "XX"
        without = screen_wallet(addr, profile, ScreeningLists(high_risk_jurisdictions={"XX"}))
        with_sanction = screen_wallet(
            addr, profile, ScreeningLists(sanctions={addr}, high_risk_jurisdictions={"XX"})
        )
        assert order.index(with_sanction.customer_risk) >= order.index(without.customer_risk)


class TestListLoading:
    def test_comments_and_case(self, tmp_path):
        sanctions = tmp_path / "sanctions.txt"
        sanctions.write_text("# bad actors\n0xABCDEF0000000000000000000000000000000001\n\n")
        jurisdictions = tmp_path / "hrj.txt"
        jurisdictions.write_text("ir # embargoed\nkp\n")
        lists = ScreeningLists.load(sanctions, jurisdictions)
        assert "0xabcdef0000000000000000000000000000000001" in lists.sanctions
        assert lists.high_risk_jurisdictions == {"IR", "KP"}

    def test_missing_files_are_empty(self, tmp_path):
        lists = ScreeningLists.load(tmp_path / "nope.txt", None)
        assert lists.sanctions == set() and lists.high_risk_jurisdictions == set()


class TestProfileUpdate:
    def test_single_trade(self):
        addr = wallet("p1")
        profile = fresh_profile(addr)
        event = make_event("p1-t", addr, wallet("cp"), "62", 1)
        update_wallet_profile(profile, event)
        assert profile.trade_count == 1
        assert profile.total_volume_usd == Decimal("62")
        assert profile.counterparties == {wallet("cp")}

    def test_not_party(self):
        profile = fresh_profile(wallet("p2"))
        event = make_event("p2-t", wallet("x"), wallet("y"), "10", 1)
        with pytest.raises(WalletNotParty):
            update_wallet_profile(profile, event)

    def test_order_insensitive_aggregates(self):
        addr = wallet("p3")
        events = [
            make_event(f"p3-{i}", addr, wallet(f"cp{i}"), v, day)
            for i, (v, day) in enumerate([("10", 3), ("20.5", 1), ("30", 7), ("5.25", 2)])
        ]
        outcomes = []
        for perm in itertools.permutations(events):
            profile = WalletProfile(address=addr, first_seen=at_day(99))
            for event in perm:
                update_wallet_profile(profile, event)
            outcomes.append(
                (
                    profile.trade_count,
                    profile.total_volume_usd,
                    frozenset(profile.counterparties),
                    profile.first_seen,
                )
            )
        assert len(set(outcomes)) == 1
        count, volume, parties, first_seen = outcomes[0]
        assert count == 4
        assert volume == Decimal("65.75")
        assert first_seen == at_day(1)

    def test_self_trade_has_no_counterparty(self):
        addr = wallet("p4")
        profile = fresh_profile(addr)
        update_wallet_profile(profile, make_event("p4-t", addr, addr, "50", 1))
        assert profile.counterparties == set()
        assert profile.trade_count == 1
