"""The FCC orchestrator: end-to-end sequencing with guardrails and handovers.

One logical writer drives the pipeline: screening for first-seen wallets,
monitoring, alert grouping into cases, triage, investigation, disposition
routing, STR drafting, and the human review gate. Every state change is
audited; timestamps derive from the input stream (no wall clock), so equal
inputs reproduce equal state and equal logs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from datetime import datetime
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .audit import AuditLog, EmptyRationale, verify_file
from .canonical import canonical_dumps, format_timestamp
from .config import EngineConfig, ModelProfileConfig
from .ingest import (
    EVENT_FIELDS,
    EventStore,
    GENESIS,
    IngestSummary,
    TradeEvent,
    ingest_batch,
    trade_event_from_dict,
)
from .investigate import (
    AnalystLabel,
    CaseContext,
    Disposition,
    FeedbackRecord,
    NotEscalated,
    Outcome,
    Provenance,
    ReinforcementCache,
    SemanticCache,
    UnknownCase,
    alert_linkage_keys,
    build_case_context,
    investigate,
    objective,
    optimize_threshold,
    render_disposition_rationale,
    semantic_key,
)
from .monitor import Alert, Band, MonitoringState, evaluate_trade
from .report import StrReport, archive_report, draft_str, serialize_report
from .screening import ScreeningLists, ScreeningResult, WalletProfile, screen_wallet, update_wallet_profile
from .store import DataStore

AGENT_VERSION = "1.0"
HUMAN = "HUMAN"

HUMAN_ONLY_ACTIONS = frozenset({"SUBMIT_STR"})


class AgentId(str, Enum):
    INGEST = "INGEST"
    SCREENING = "SCREENING"
    MONITORING = "MONITORING"
    TRIAGE = "TRIAGE"
    INVESTIGATION = "INVESTIGATION"
    REPORTING = "REPORTING"
    ORCHESTRATOR = "ORCHESTRATOR"


@dataclass(frozen=True)
class AgentIdentity:
    agent_id: AgentId
    version: str = AGENT_VERSION


class CaseState(str, Enum):
    NEW = "NEW"
    TRIAGED = "TRIAGED"
    INVESTIGATING = "INVESTIGATING"
    AUTO_CLOSED = "AUTO_CLOSED"
    ESCALATED = "ESCALATED"
    STR_DRAFTED = "STR_DRAFTED"
    PENDING_REVIEW = "PENDING_REVIEW"
    SUBMITTED = "SUBMITTED"
    REJECTED = "REJECTED"


TERMINAL_STATES = frozenset({CaseState.AUTO_CLOSED, CaseState.SUBMITTED, CaseState.REJECTED})


class LifecycleEvent(str, Enum):
    ALERTS_AGGREGATED = "ALERTS_AGGREGATED"
    INVESTIGATION_STARTED = "INVESTIGATION_STARTED"
    CASE_AUTO_CLOSED = "CASE_AUTO_CLOSED"
    CASE_ESCALATED = "CASE_ESCALATED"
    STR_DRAFT_COMPLETED = "STR_DRAFT_COMPLETED"
    REVIEW_REQUESTED = "REVIEW_REQUESTED"
    ANALYST_CONFIRM = "ANALYST_CONFIRM"
    ANALYST_DISMISS = "ANALYST_DISMISS"


TRANSITIONS: dict[tuple[CaseState, LifecycleEvent], CaseState] = {
    (CaseState.NEW, LifecycleEvent.ALERTS_AGGREGATED): CaseState.TRIAGED,
    (CaseState.TRIAGED, LifecycleEvent.INVESTIGATION_STARTED): CaseState.INVESTIGATING,
    (CaseState.INVESTIGATING, LifecycleEvent.CASE_AUTO_CLOSED): CaseState.AUTO_CLOSED,
    (CaseState.INVESTIGATING, LifecycleEvent.CASE_ESCALATED): CaseState.ESCALATED,
    (CaseState.ESCALATED, LifecycleEvent.STR_DRAFT_COMPLETED): CaseState.STR_DRAFTED,
    (CaseState.STR_DRAFTED, LifecycleEvent.REVIEW_REQUESTED): CaseState.PENDING_REVIEW,
    (CaseState.PENDING_REVIEW, LifecycleEvent.ANALYST_CONFIRM): CaseState.SUBMITTED,
    (CaseState.PENDING_REVIEW, LifecycleEvent.ANALYST_DISMISS): CaseState.REJECTED,
}


class IllegalTransition(ValueError):
    def __init__(self, current: CaseState, event: LifecycleEvent):
        super().__init__(f"no transition from {current.value} on {event.value}")
        self.current = current
        self.event = event


class UnknownAgent(KeyError):
    pass


class UnknownProfile(KeyError):
    pass


class FallbackImmutable(ValueError):
    pass


class UnknownEscalation(KeyError):
    pass


class NotPending(ValueError):
    pass


class ChainVerificationError(RuntimeError):
    """Persisted audit chain failed verification at startup."""


@dataclass
class GuardrailPolicy:
    agent_id: AgentId
    allowed_actions: set[str]
    max_auto_band: Band
    data_scopes: set[str] = field(default_factory=lambda: {"cases", "alerts", "events"})


class GuardrailOutcome(str, Enum):
    ALLOW = "ALLOW"
    BLOCK = "BLOCK"
    REQUIRE_HANDOVER = "REQUIRE_HANDOVER"


@dataclass(frozen=True)
class GuardrailDecision:
    outcome: GuardrailOutcome
    reason: str
    target: Optional[str] = None


def enforce_guardrail(
    agent: AgentId,
    action: str,
    case: "CaseRecord | None",
    policies: dict[AgentId, GuardrailPolicy],
) -> GuardrailDecision:
    """Permission check per policy table; never mutates anything itself."""
    policy = policies.get(agent)
    if policy is None:
        raise UnknownAgent(f"no guardrail policy for agent {agent}")
    if action in HUMAN_ONLY_ACTIONS:
        return GuardrailDecision(
            GuardrailOutcome.REQUIRE_HANDOVER,
            f"action {action} always requires a human decision",
            target=HUMAN,
        )
    if action not in policy.allowed_actions:
        return GuardrailDecision(
            GuardrailOutcome.BLOCK, f"action {action} is not permitted for agent {agent.value}"
        )
    if case is not None and case.context.risk.band > policy.max_auto_band:
        return GuardrailDecision(
            GuardrailOutcome.REQUIRE_HANDOVER,
            f"case band {case.context.risk.band.name} exceeds {agent.value} autonomous "
            f"authority ({policy.max_auto_band.name})",
            target=HUMAN,
        )
    return GuardrailDecision(GuardrailOutcome.ALLOW, f"action {action} within policy for {agent.value}")


@dataclass
class HandoverRequest:
    handover_id: str
    from_agent: AgentId
    to: str
    case_id: str
    reason: str
    payload_digest: str
    created_at: datetime
    acknowledged: bool = False

    def to_dict(self) -> dict:
        return {
            "handover_id": self.handover_id,
            "from_agent": self.from_agent.value,
            "to": self.to,
            "case_id": self.case_id,
            "reason": self.reason,
            "payload_digest": self.payload_digest,
            "created_at": format_timestamp(self.created_at),
            "acknowledged": self.acknowledged,
        }


@dataclass
class CaseRecord:
    case_id: str
    state: CaseState
    context: CaseContext
    disposition: Optional[Disposition] = None
    report_id: Optional[str] = None
    history: list[tuple[str, datetime, int]] = field(default_factory=list)


class ModelKind(str, Enum):
    RULES = "RULES"
    EXTERNAL_LLM = "EXTERNAL_LLM"
    PREDICTIVE = "PREDICTIVE"


@dataclass
class ModelProfile:
    profile_id: str
    kind: ModelKind
    explainability: int
    cost_per_call_usd: Decimal
    latency_ms_p50: int
    compliance_score: float
    excluded: bool = False

    def to_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "kind": self.kind.value,
            "explainability": self.explainability,
            "cost_per_call_usd": self.cost_per_call_usd,
            "latency_ms_p50": self.latency_ms_p50,
            "compliance_score": round(self.compliance_score, 6),
            "excluded": self.excluded,
        }


class TaskType(str, Enum):
    TRIAGE = "TRIAGE"
    INVESTIGATE = "INVESTIGATE"
    DRAFT_NARRATIVE = "DRAFT_NARRATIVE"


@dataclass(frozen=True)
class TaskDescriptor:
    task_type: TaskType
    min_explainability: int = 3
    jurisdiction: Optional[str] = None
    max_cost_usd: Decimal = Decimal("0.01")
    max_latency_ms: int = 2000


EMA_WEIGHT = 0.2


class ModelRegistry:
    """Model profiles with EMA compliance scoring; RULES is the immutable fallback."""

    def __init__(self, profiles: Sequence[ModelProfile], baseline: float):
        self.profiles: dict[str, ModelProfile] = {p.profile_id: p for p in profiles}
        self.baseline = baseline
        rules = [p for p in profiles if p.kind is ModelKind.RULES]
        if not rules:
            raise ValueError("registry requires a RULES fallback profile")
        self.fallback_id = rules[0].profile_id
        for profile in self.profiles.values():
            if profile.kind is not ModelKind.RULES:
                profile.excluded = profile.compliance_score < baseline

    @classmethod
    def from_config(cls, entries: Sequence[ModelProfileConfig], baseline: float) -> "ModelRegistry":
        profiles = [
            ModelProfile(
                profile_id=e.profile_id,
                kind=ModelKind(e.kind),
                explainability=e.explainability,
                cost_per_call_usd=e.cost_per_call_usd,
                latency_ms_p50=e.latency_ms_p50,
                compliance_score=e.compliance_score,
            )
            for e in entries
        ]
        return cls(profiles, baseline)

    def is_healthy(self, profile_id: str) -> bool:
        profile = self.profiles.get(profile_id)
        return profile is not None and not profile.excluded

    def route(self, task: TaskDescriptor) -> ModelProfile:
        candidates = [
            p
            for p in self.profiles.values()
            if not p.excluded
            and p.explainability >= task.min_explainability
            and p.cost_per_call_usd <= task.max_cost_usd
            and p.latency_ms_p50 <= task.max_latency_ms
        ]
        if not candidates:
            return self.profiles[self.fallback_id]
        candidates.sort(key=lambda p: (-p.explainability, p.cost_per_call_usd, p.profile_id))
        return candidates[0]

    def update_score(self, profile_id: str, outcome: str) -> tuple[ModelProfile, bool]:
        """EMA update; returns the profile and whether the excluded flag flipped."""
        profile = self.profiles.get(profile_id)
        if profile is None:
            raise UnknownProfile(profile_id)
        if profile.kind is ModelKind.RULES:
            raise FallbackImmutable("the RULES fallback profile is never rescored or excluded")
        if outcome not in ("pass", "fail"):
            raise ValueError("outcome must be 'pass' or 'fail'")
        observation = 1.0 if outcome == "pass" else 0.0
        profile.compliance_score = (1 - EMA_WEIGHT) * profile.compliance_score + EMA_WEIGHT * observation
        was_excluded = profile.excluded
        profile.excluded = profile.compliance_score < self.baseline
        return profile, profile.excluded != was_excluded


@dataclass(frozen=True)
class PipelineSummary:
    alerts: int
    cases_opened: int
    auto_closed: int
    escalated: int
    strs_drafted: int
    audit_seq_range: tuple[int, int]
    ingest: IngestSummary

    def to_dict(self) -> dict:
        return {
            "alerts": self.alerts,
            "cases_opened": self.cases_opened,
            "auto_closed": self.auto_closed,
            "escalated": self.escalated,
            "strs_drafted": self.strs_drafted,
            "audit_seq_range": list(self.audit_seq_range),
            "ingest": {
                "accepted": self.ingest.accepted,
                "rejected": self.ingest.rejected,
                "first_seen_wallets": self.ingest.first_seen_wallets,
            },
        }


def _digest(obj) -> str:
    return hashlib.sha256(canonical_dumps(obj).encode("utf-8")).hexdigest()


class Orchestrator:
    """Single-writer engine facade used by the CLI and the service."""

    def __init__(self, config: EngineConfig, data_dir: Path | None = None):
        self.config = config
        self.store = DataStore(data_dir if data_dir is not None else config.data_dir)
        audit_path = self.store.audit_path
        if audit_path is not None and audit_path.exists():
            violation = verify_file(audit_path)
            if violation is not None:
                raise ChainVerificationError(
                    f"audit chain verification failed at seq {violation.seq}: {violation.kind.value}"
                )
            self.audit = AuditLog.load(audit_path)
        else:
            self.audit = AuditLog(path=audit_path)

        self.lists = ScreeningLists.load(config.sanctions_path, config.high_risk_jurisdictions_path)
        self.events = EventStore()
        self.profiles: dict[str, WalletProfile] = {}
        self.screenings: dict[str, ScreeningResult] = {}
        self.mon_state = MonitoringState(
            store=self.events, profiles=self.profiles, lists=self.lists, cfg=config.ruleset
        )
        self.cases: dict[str, CaseRecord] = {}
        self.case_order: list[str] = []
        self.cache = SemanticCache()
        self.feedback = ReinforcementCache()
        self.optimizer = replace(config.optimizer)
        self.registry = ModelRegistry.from_config(config.model_registry, config.model_baseline)
        self.handovers: dict[str, HandoverRequest] = {}
        self.reports: dict[str, StrReport] = {}
        self.request_results: dict[str, dict] = {}
        self._feedback_since_optimizer = 0
        self.policies = {
            AgentId(agent): GuardrailPolicy(
                agent_id=AgentId(agent),
                allowed_actions=set(actions),
                max_auto_band=config.policies.max_auto_band.get(agent, Band.MODERATE_HIGH),
            )
            for agent, actions in config.policies.allowed_actions.items()
        }

    # -- lifecycle ----------------------------------------------------------

    @classmethod
    def open(cls, config: EngineConfig, data_dir: Path | None = None) -> "Orchestrator":
        """Build the engine and replay the persisted command log."""
        orch = cls(config, data_dir=data_dir)
        orch._replay()
        return orch

    def _replay(self) -> None:
        commands = list(self.store.iter_lines("commands.jsonl"))
        if not commands:
            return
        self.store.replaying = True
        self.audit.begin_replay()
        try:
            for command in commands:
                self.apply_command(command)
        finally:
            self.audit.end_replay()
            self.store.replaying = False

    def apply_command(self, command: dict) -> None:
        kind = command["kind"]
        if kind == "batch":
            events = [trade_event_from_dict(e) for e in command["events"]]
            self.run_pipeline(events, request_id=command.get("request_id"))
        elif kind == "ingest":
            events = [trade_event_from_dict(e) for e in command["events"]]
            self.ingest_only(events, request_id=command.get("request_id"))
        elif kind == "decision":
            self.decide(
                command["escalation_id"],
                command["decision"],
                command["rationale"],
                command["analyst"],
                decided_at=_parse_at(command["decided_at"]),
                request_id=command.get("request_id"),
            )
        elif kind == "model_score":
            self.score_model(
                command["profile_id"],
                command["outcome"],
                at=_parse_at(command["at"]),
                request_id=command.get("request_id"),
            )
        elif kind == "optimize":
            self.run_optimizer_now(at=_parse_at(command["at"]), request_id=command.get("request_id"))
        else:
            raise ValueError(f"unknown command kind: {kind}")

    def close(self) -> None:
        self.audit.close()
        self.store.close()

    # -- audit helper ---------------------------------------------------------

    def _audit(self, agent: AgentId, action: str, rationale: str, at: datetime, **refs) -> int:
        record = self.audit.append(
            agent=agent.value, action=action, rationale=rationale, at=at, **refs
        )
        return record.seq

    def _now(self) -> datetime:
        return self.events.last_ts or GENESIS

    # -- pipeline -------------------------------------------------------------

    def ingest_only(self, batch: Sequence[TradeEvent], request_id: str | None = None) -> IngestSummary:
        """Validate and archive a batch without running the monitors."""
        summary = ingest_batch(batch, self.events)
        request_note = f" request_id={request_id}" if request_id else ""
        self._audit(
            AgentId.INGEST,
            "INGEST_BATCH",
            f"ingest-only batch of {len(batch)} events: accepted {summary.accepted}, "
            f"rejected {summary.rejected}, first-seen wallets "
            f"{summary.first_seen_wallets}.{request_note}",
            self._now(),
        )
        for event in batch:
            if self.events.by_tx.get(event.tx_id) is event:
                self.store.append_line("events.jsonl", event.to_dict(), key_order=EVENT_FIELDS)
                for wallet in event.parties():
                    if wallet not in self.profiles:
                        self.profiles[wallet] = WalletProfile(address=wallet, first_seen=event.timestamp)
                    update_wallet_profile(self.profiles[wallet], event)
        self.audit.flush()
        self.store.flush_all()
        self._persist_command(
            {"kind": "ingest", "request_id": request_id, "events": [e.to_dict() for e in batch]}
        )
        return summary

    def run_pipeline(self, batch: Sequence[TradeEvent], request_id: str | None = None) -> PipelineSummary:
        """Drive the full sequence over one batch and persist it as a command."""
        first_seq = len(self.audit.records)
        request_note = f" request_id={request_id}" if request_id else ""

        summary = ingest_batch(batch, self.events)
        batch_at = self._now()
        self._audit(
            AgentId.INGEST,
            "INGEST_BATCH",
            f"batch of {len(batch)} events: accepted {summary.accepted}, rejected "
            f"{summary.rejected}, first-seen wallets {summary.first_seen_wallets}.{request_note}",
            batch_at,
        )
        accepted = [e for e in batch if self.events.by_tx.get(e.tx_id) is e]
        for event in accepted:
            self.store.append_line("events.jsonl", event.to_dict(), key_order=EVENT_FIELDS)

        new_alerts: list[Alert] = []
        monitoring_gate = enforce_guardrail(AgentId.MONITORING, "EVALUATE_TRADE", None, self.policies)
        if monitoring_gate.outcome is GuardrailOutcome.BLOCK:
            self._audit(
                AgentId.ORCHESTRATOR,
                "GUARDRAIL_BLOCK",
                f"monitoring blocked for this batch: {monitoring_gate.reason}.{request_note}",
                batch_at,
            )
        else:
            for event in accepted:
                self._screen_and_profile(event)
                alerts = evaluate_trade(event, self.mon_state)
                for alert in alerts:
                    self._audit(
                        AgentId.MONITORING,
                        "ALERT_RAISED",
                        f"{alert.alert_type.value} alert {alert.alert_id} on {alert.subject} "
                        f"(score {alert.score}): {alert.evidence}",
                        event.timestamp,
                        tx_id=event.tx_id,
                    )
                    self.store.append_line("alerts.jsonl", alert.to_dict())
                new_alerts.extend(alerts)

        opened = auto_closed = escalated = drafted = 0
        if new_alerts:
            investigate_profile = self.registry.route(TaskDescriptor(TaskType.INVESTIGATE))
            self._audit(
                AgentId.ORCHESTRATOR,
                "ROUTE",
                f"task INVESTIGATE routed to model profile {investigate_profile.profile_id} "
                f"(explainability {investigate_profile.explainability}, cost "
                f"{investigate_profile.cost_per_call_usd} USD/call)",
                batch_at,
            )
            for component in self._group_alerts(new_alerts):
                case = self._open_case(component, request_note)
                if case is None:
                    continue
                opened += 1
                outcome = self._dispose_case(case, investigate_profile.profile_id, request_note)
                if outcome == "auto_closed":
                    auto_closed += 1
                elif outcome in ("escalated", "drafted"):
                    escalated += 1
                    if outcome == "drafted":
                        drafted += 1

        self.audit.flush()
        self.store.flush_all()
        self._persist_command(
            {
                "kind": "batch",
                "request_id": request_id,
                "events": [e.to_dict() for e in batch],
            }
        )
        last_seq = len(self.audit.records) - 1
        result = PipelineSummary(
            alerts=len(new_alerts),
            cases_opened=opened,
            auto_closed=auto_closed,
            escalated=escalated,
            strs_drafted=drafted,
            audit_seq_range=(first_seq, last_seq),
            ingest=summary,
        )
        if request_id:
            self.request_results[request_id] = result.to_dict()
        return result

    def _screen_and_profile(self, event: TradeEvent) -> None:
        for wallet in event.parties():
            profile = self.profiles.get(wallet)
            if profile is None:
                profile = WalletProfile(address=wallet, first_seen=event.timestamp)
                self.profiles[wallet] = profile
            update_wallet_profile(profile, event)
            if wallet not in self.screenings:
                result = screen_wallet(wallet, profile, self.lists)
                profile.customer_risk = result.customer_risk
                self.screenings[wallet] = result
                self._audit(
                    AgentId.SCREENING,
                    "SCREEN_WALLET",
                    f"first-seen wallet {wallet} screened: {result.rationale}",
                    event.timestamp,
                    tx_id=event.tx_id,
                )

    def _group_alerts(self, alerts: Sequence[Alert]) -> list[list[Alert]]:
        """Connected components over shared wallet subjects and tx refs."""
        parent = list(range(len(alerts)))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i: int, j: int) -> None:
            parent[find(i)] = find(j)

        seen: dict[str, int] = {}
        for i, alert in enumerate(alerts):
            for key in alert_linkage_keys(alert, self.events):
                if key in seen:
                    union(i, seen[key])
                else:
                    seen[key] = i
        groups: dict[int, list[Alert]] = {}
        for i, alert in enumerate(alerts):
            groups.setdefault(find(i), []).append(alert)
        return [groups[root] for root in sorted(groups)]

    def _open_case(self, alerts: list[Alert], request_note: str) -> CaseRecord | None:
        gate = enforce_guardrail(AgentId.TRIAGE, "OPEN_CASE", None, self.policies)
        at = max(
            (self.events.by_tx[tx].timestamp for a in alerts for tx in a.tx_refs if tx in self.events.by_tx),
            default=self._now(),
        )
        if gate.outcome is GuardrailOutcome.BLOCK:
            self._audit(
                AgentId.ORCHESTRATOR,
                "GUARDRAIL_BLOCK",
                f"case opening blocked: {gate.reason}.{request_note}",
                at,
            )
            return None
        case_id = "CASE-" + hashlib.sha256(alerts[0].alert_id.encode()).hexdigest()[:12]
        context = build_case_context(
            alerts, self.profiles, list(self.screenings.values()), self.events, self.config.ruleset, case_id
        )
        seq = self._audit(
            AgentId.TRIAGE,
            "OPEN_CASE",
            f"case opened from {len(alerts)} alert(s) "
            f"[{', '.join(a.alert_id for a in alerts)}]; risk score {context.risk.score} "
            f"({context.risk.band.name}); screening: "
            + "; ".join(s.rationale for s in context.screening[:2]),
            at,
            case_id=case_id,
        )
        case = CaseRecord(case_id=case_id, state=CaseState.NEW, context=context)
        case.history.append((CaseState.NEW.value, at, seq))
        self.cases[case_id] = case
        self.case_order.append(case_id)
        self.transition_case(
            case,
            LifecycleEvent.ALERTS_AGGREGATED,
            at,
            AgentId.TRIAGE,
            f"alerts aggregated; case risk {context.risk.score} ({context.risk.band.name})",
        )
        return case

    def _dispose_case(self, case: CaseRecord, model_profile_id: str, request_note: str) -> str:
        at = case.history[-1][1]
        self.transition_case(
            case,
            LifecycleEvent.INVESTIGATION_STARTED,
            at,
            AgentId.ORCHESTRATOR,
            "case handed to the investigation agent",
        )
        gate = enforce_guardrail(AgentId.INVESTIGATION, "INVESTIGATE", case, self.policies)
        if gate.outcome is GuardrailOutcome.BLOCK:
            self._audit(
                AgentId.ORCHESTRATOR,
                "GUARDRAIL_BLOCK",
                f"investigation blocked: {gate.reason}; case parked.{request_note}",
                at,
                case_id=case.case_id,
            )
            return "parked"
        if gate.outcome is GuardrailOutcome.REQUIRE_HANDOVER:
            key = semantic_key(case.context, self.config.ruleset)
            disposition = Disposition(
                outcome=Outcome.ESCALATE,
                str_recommended=case.context.risk.band >= Band.MODERATE_HIGH,
                rationale=render_disposition_rationale(
                    key, case.context.risk.score, self.optimizer.theta, True, False, forced=True
                ),
                provenance=Provenance.FRESH,
            )
            self._audit(
                AgentId.ORCHESTRATOR,
                "GUARDRAIL_HANDOVER",
                f"guardrail outcome REQUIRE_HANDOVER({gate.target}): {gate.reason}; "
                f"escalating to human review",
                at,
                case_id=case.case_id,
            )
        else:
            disposition = investigate(
                case.context,
                self.optimizer,
                self.cache,
                self.config.ruleset,
                registry=self.registry,
                model_profile_id=model_profile_id,
                at=at,
            )
        case.disposition = disposition
        self._audit(
            AgentId.INVESTIGATION,
            "INVESTIGATE",
            f"disposition {disposition.outcome.value} (provenance {disposition.provenance.value}, "
            f"STR recommended: {disposition.str_recommended}): {disposition.rationale}",
            at,
            case_id=case.case_id,
        )

        if disposition.outcome is Outcome.AUTO_CLOSE:
            close_gate = enforce_guardrail(AgentId.INVESTIGATION, "CLOSE_CASE", case, self.policies)
            if close_gate.outcome is not GuardrailOutcome.ALLOW:
                self._audit(
                    AgentId.ORCHESTRATOR,
                    "GUARDRAIL_BLOCK",
                    f"auto-close withheld: {close_gate.reason}; case parked.{request_note}",
                    at,
                    case_id=case.case_id,
                )
                return "parked"
            self.transition_case(
                case, LifecycleEvent.CASE_AUTO_CLOSED, at, AgentId.INVESTIGATION, disposition.rationale
            )
            return "auto_closed"

        self.transition_case(
            case, LifecycleEvent.CASE_ESCALATED, at, AgentId.INVESTIGATION, disposition.rationale
        )
        if not disposition.str_recommended:
            return "escalated"

        draft_gate = enforce_guardrail(AgentId.REPORTING, "DRAFT_STR", case, self.policies)
        if draft_gate.outcome is not GuardrailOutcome.ALLOW:
            self._audit(
                AgentId.ORCHESTRATOR,
                "GUARDRAIL_BLOCK",
                f"STR drafting withheld: {draft_gate.reason}; case parked.{request_note}",
                at,
                case_id=case.case_id,
            )
            return "escalated"
        case_seqs = [seq for _, _, seq in case.history]
        report = draft_str(case, self.config.reporting_entity, at, audit_refs=case_seqs)
        self.reports[report.report_id] = report
        case.report_id = report.report_id
        if self.store.reports_dir is not None and not self.store.replaying:
            archive_report(report, self.store.reports_dir)
        self._audit(
            AgentId.REPORTING,
            "DRAFT_STR",
            f"STR {report.report_id} drafted for case {case.case_id}; narrative rendered "
            f"deterministically from case context",
            at,
            case_id=case.case_id,
        )
        self.transition_case(
            case, LifecycleEvent.STR_DRAFT_COMPLETED, at, AgentId.REPORTING,
            f"STR {report.report_id} drafted and archived",
        )
        handover = self._create_handover(case, at, "escalated case awaits human review decision")
        self.transition_case(
            case, LifecycleEvent.REVIEW_REQUESTED, at, AgentId.ORCHESTRATOR,
            f"handover {handover.handover_id} created for human review",
        )
        return "drafted"

    def _create_handover(self, case: CaseRecord, at: datetime, reason: str) -> HandoverRequest:
        handover_id = "HO-" + hashlib.sha256(f"{case.case_id}|{case.state.value}".encode()).hexdigest()[:12]
        handover = HandoverRequest(
            handover_id=handover_id,
            from_agent=AgentId.ORCHESTRATOR,
            to=HUMAN,
            case_id=case.case_id,
            reason=reason,
            payload_digest=_digest(
                {
                    "case_id": case.case_id,
                    "report_id": case.report_id,
                    "score": case.context.risk.score,
                    "band": case.context.risk.band.name,
                }
            ),
            created_at=at,
        )
        self.handovers[handover_id] = handover
        self._audit(
            AgentId.ORCHESTRATOR,
            "HANDOVER",
            f"handover {handover_id} to {HUMAN}: {reason}",
            at,
            case_id=case.case_id,
        )
        return handover

    # -- state machine ----------------------------------------------------------

    def transition_case(
        self,
        case: CaseRecord,
        event: LifecycleEvent,
        at: datetime,
        agent: AgentId,
        rationale: str,
    ) -> CaseState:
        """Apply one legal transition; exactly one audit record per transition."""
        target = TRANSITIONS.get((case.state, event))
        if target is None:
            raise IllegalTransition(case.state, event)
        if target is CaseState.SUBMITTED:
            acked = any(
                h.case_id == case.case_id and h.acknowledged for h in self.handovers.values()
            )
            if not acked:
                raise IllegalTransition(case.state, event)
        seq = self._audit(
            agent,
            "TRANSITION",
            f"{case.state.value} -> {target.value} on {event.value}: {rationale}",
            at,
            case_id=case.case_id,
        )
        case.state = target
        case.history.append((target.value, at, seq))
        return target

    # -- human decisions ----------------------------------------------------------

    def decide(
        self,
        escalation_id: str,
        decision: str,
        rationale: str,
        analyst: str,
        decided_at: datetime,
        request_id: str | None = None,
    ) -> dict:
        """Analyst confirm/dismiss on a pending escalation (idempotent by request id)."""
        if request_id and request_id in self.request_results:
            return self.request_results[request_id]
        handover = self.handovers.get(escalation_id)
        if handover is None:
            raise UnknownEscalation(escalation_id)
        case = self.cases[handover.case_id]
        if case.state is not CaseState.PENDING_REVIEW:
            raise NotPending(f"case {case.case_id} is {case.state.value}")
        if not rationale or not rationale.strip():
            raise EmptyRationale("decision rationale must be non-empty")
        if decision not in ("confirm", "dismiss"):
            raise ValueError("decision must be 'confirm' or 'dismiss'")

        request_note = f" request_id={request_id}" if request_id else ""
        self._audit(
            AgentId.ORCHESTRATOR,
            "HANDOVER_ACK",
            f"handover {escalation_id} acknowledged by analyst {analyst}.{request_note}",
            decided_at,
            case_id=case.case_id,
        )
        handover.acknowledged = True

        label = (
            AnalystLabel.CONFIRMED_SUSPICIOUS if decision == "confirm" else AnalystLabel.FALSE_POSITIVE
        )
        self.record_feedback(case.case_id, label, decided_at)

        if decision == "confirm":
            self.transition_case(
                case,
                LifecycleEvent.ANALYST_CONFIRM,
                decided_at,
                AgentId.ORCHESTRATOR,
                f"analyst {analyst} confirmed: {rationale}.{request_note}",
            )
            report = self.reports.get(case.report_id or "")
            if report is not None and self.store.outbox_dir is not None and not self.store.replaying:
                outbox_path = self.store.outbox_dir / f"{report.report_id}.json"
                outbox_path.write_text(serialize_report(report) + "\n", encoding="utf-8")
            self._audit(
                AgentId.REPORTING,
                "SUBMIT_STR",
                f"STR {case.report_id} submitted to the FIU outbox under acknowledged "
                f"handover {escalation_id}",
                decided_at,
                case_id=case.case_id,
            )
        else:
            self.transition_case(
                case,
                LifecycleEvent.ANALYST_DISMISS,
                decided_at,
                AgentId.ORCHESTRATOR,
                f"analyst {analyst} dismissed: {rationale}.{request_note}",
            )

        self._feedback_since_optimizer += 1
        if self._feedback_since_optimizer >= self.config.optimizer_run_every_n_feedback:
            self._run_optimizer(decided_at, trigger="feedback schedule")
            self._feedback_since_optimizer = 0

        self.audit.flush()
        self._persist_command(
            {
                "kind": "decision",
                "request_id": request_id,
                "escalation_id": escalation_id,
                "decision": decision,
                "rationale": rationale,
                "analyst": analyst,
                "decided_at": decided_at,
            }
        )
        result = {
            "case_id": case.case_id,
            "state": case.state.value,
            "feedback": label.value,
            "report_id": case.report_id,
        }
        if request_id:
            self.request_results[request_id] = result
        return result

    def record_feedback(self, case_id: str, label: AnalystLabel, decided_at: datetime) -> FeedbackRecord:
        """Append analyst feedback to the reinforcement cache (one per case)."""
        case = self.cases.get(case_id)
        if case is None:
            raise UnknownCase(case_id)
        reached_escalation = any(
            state
            in (
                CaseState.ESCALATED.value,
                CaseState.STR_DRAFTED.value,
                CaseState.PENDING_REVIEW.value,
                CaseState.SUBMITTED.value,
                CaseState.REJECTED.value,
            )
            for state, _, _ in case.history
        )
        if not reached_escalation:
            raise NotEscalated(f"case {case_id} was never escalated")
        record = FeedbackRecord(
            case_id=case_id,
            key=semantic_key(case.context, self.config.ruleset),
            case_score=case.context.risk.score,
            analyst_label=label,
            decided_at=decided_at,
        )
        self.feedback.add(record)
        self._audit(
            AgentId.ORCHESTRATOR,
            "FEEDBACK_RECORDED",
            f"analyst feedback {label.value} recorded for case {case_id} "
            f"(case score {record.case_score})",
            decided_at,
            case_id=case_id,
        )
        return record

    # -- learning loop ----------------------------------------------------------

    def _run_optimizer(self, at: datetime, trigger: str) -> dict:
        before = self.optimizer.theta
        history = self.feedback.records[-self.optimizer.history_window :]
        after = optimize_threshold(history, self.optimizer)
        cost = objective(history, after, self.optimizer.c_fn, self.optimizer.c_fp)
        self._audit(
            AgentId.ORCHESTRATOR,
            "OPTIMIZER_RUN",
            f"threshold recalibration ({trigger}): theta {before} -> {after}; "
            f"J(theta)={cost} over {len(history)} feedback record(s) "
            f"(c_fn={self.optimizer.c_fn}, c_fp={self.optimizer.c_fp})",
            at,
        )
        self.optimizer.theta = after
        return {"theta_before": before, "theta_after": after, "objective": cost, "history": len(history)}

    def run_optimizer_now(self, at: datetime, request_id: str | None = None) -> dict:
        if request_id and request_id in self.request_results:
            return self.request_results[request_id]
        result = self._run_optimizer(at, trigger="explicit request")
        self.audit.flush()
        self._persist_command({"kind": "optimize", "request_id": request_id, "at": at})
        if request_id:
            self.request_results[request_id] = result
        return result

    # -- model governance ----------------------------------------------------------

    def score_model(
        self, profile_id: str, outcome: str, at: datetime, request_id: str | None = None
    ) -> ModelProfile:
        if request_id and request_id in self.request_results:
            return self.registry.profiles[profile_id]
        profile, flipped = self.registry.update_score(profile_id, outcome)
        note = ""
        if flipped:
            note = (
                " now EXCLUDED; its semantic-cache entries are invisible to lookups"
                if profile.excluded
                else " re-included; its semantic-cache entries are visible again"
            )
        self._audit(
            AgentId.ORCHESTRATOR,
            "MODEL_SCORED",
            f"model {profile_id} outcome {outcome}: compliance score now "
            f"{profile.compliance_score:.4f} vs baseline {self.registry.baseline};{note or ' no flip'}",
            at,
        )
        self.audit.flush()
        self._persist_command(
            {"kind": "model_score", "request_id": request_id, "profile_id": profile_id,
             "outcome": outcome, "at": at}
        )
        if request_id:
            self.request_results[request_id] = profile.to_dict()
        return profile

    # -- persistence ----------------------------------------------------------

    def _persist_command(self, command: dict) -> None:
        if command.get("request_id") is None:
            command = {k: v for k, v in command.items() if k != "request_id"}
        self.store.append_line("commands.jsonl", command)
        self.store.flush("commands.jsonl")

    # -- views ----------------------------------------------------------

    def case_view(self, case_id: str) -> dict:
        case = self.cases.get(case_id)
        if case is None:
            raise UnknownCase(case_id)
        context = case.context
        return {
            "case_id": case.case_id,
            "state": case.state.value,
            "risk_score": context.risk.score,
            "band": context.risk.band.name,
            "subjects": [list(s) for s in context.subject_wallets],
            "tx_refs": list(context.tx_refs),
            "alerts": [a.to_dict() for a in context.alerts],
            "screening": [
                {
                    "address": s.address,
                    "sanctions_hit": s.sanctions_hit,
                    "high_risk_jurisdiction": s.high_risk_jurisdiction,
                    "customer_risk": s.customer_risk.value,
                    "rationale": s.rationale,
                }
                for s in context.screening
            ],
            "behavior": {
                "trade_count_30d": context.behavior.trade_count_30d,
                "value_min": context.behavior.value_min,
                "value_max": context.behavior.value_max,
                "alternation_count": context.behavior.alternation_count,
                "wallet_age_days": context.behavior.wallet_age_days,
            },
            "disposition": case.disposition.to_dict() if case.disposition else None,
            "report_id": case.report_id,
            "narrative": self.reports[case.report_id].narrative
            if case.report_id and case.report_id in self.reports
            else None,
            "history": [
                {"state": state, "at": format_timestamp(at), "audit_seq": seq}
                for state, at, seq in case.history
            ],
        }

    def cases_view(self) -> list[dict]:
        return [
            {
                "case_id": cid,
                "state": self.cases[cid].state.value,
                "risk_score": self.cases[cid].context.risk.score,
                "band": self.cases[cid].context.risk.band.name,
                "alert_types": sorted({a.alert_type.value for a in self.cases[cid].context.alerts}),
            }
            for cid in self.case_order
        ]

    def escalations_view(self) -> list[dict]:
        items = []
        for handover in self.handovers.values():
            case = self.cases[handover.case_id]
            if case.state is not CaseState.PENDING_REVIEW:
                continue
            items.append(
                {
                    "escalation_id": handover.handover_id,
                    "case_id": case.case_id,
                    "risk_score": case.context.risk.score,
                    "band": case.context.risk.band.name,
                    "alert_types": sorted({a.alert_type.value for a in case.context.alerts}),
                    "created_at": format_timestamp(handover.created_at),
                }
            )
        items.sort(key=lambda i: (-i["risk_score"], i["created_at"], i["escalation_id"]))
        return items

    def alerts_view(self, wallet: str | None = None, alert_type: str | None = None) -> list[dict]:
        rows = []
        for alert in self.mon_state.alerts:
            if wallet is not None and alert.subject != wallet.lower():
                continue
            if alert_type is not None and alert.alert_type.value != alert_type:
                continue
            rows.append(alert.to_dict())
        return rows

    def metrics_view(self) -> dict:
        by_state: dict[str, int] = {}
        for case in self.cases.values():
            by_state[case.state.value] = by_state.get(case.state.value, 0) + 1
        by_type: dict[str, int] = {}
        for alert in self.mon_state.alerts:
            by_type[alert.alert_type.value] = by_type.get(alert.alert_type.value, 0) + 1
        return {
            "events_ingested": len(self.events.events),
            "alerts_total": len(self.mon_state.alerts),
            "alerts_by_type": dict(sorted(by_type.items())),
            "cases_by_state": dict(sorted(by_state.items())),
            "theta": self.optimizer.theta,
            "feedback": self.feedback.counts(),
            "cache": {
                "entries": len(self.cache.entries),
                "hits": self.cache.hits,
                "misses": self.cache.misses,
            },
            "models": [p.to_dict() for p in self.registry.profiles.values()],
            "audit_records": len(self.audit.records),
        }

    def state_snapshot(self) -> dict:
        """Deterministic digest-ready snapshot for replay-equivalence checks."""
        return {
            "cases": {cid: self.case_view(cid) for cid in self.case_order},
            "theta": self.optimizer.theta,
            "cache_keys": sorted(k.label() for k in self.cache.entries),
            "cache_dispositions": {
                k.label(): self.cache.entries[k].disposition.to_dict() for k in self.cache.entries
            },
            "feedback": [r.to_dict() for r in self.feedback.records],
            "handovers": {hid: h.to_dict() for hid, h in sorted(self.handovers.items())},
            "alerts": [a.to_dict() for a in self.mon_state.alerts],
        }


def _parse_at(raw) -> datetime:
    from .canonical import parse_timestamp

    return raw if isinstance(raw, datetime) else parse_timestamp(str(raw))
