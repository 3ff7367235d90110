"""STR drafting, rendering, validation, and immutable archival.

Narratives are rendered from stored report fields only, in a fixed section
order, so the same report always produces byte-identical text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional, Sequence

from .canonical import canonical_dumps, canonical_loads, format_timestamp, parse_timestamp
from .monitor import AlertType, Band, BAND_WORDS, RulesetConfig, risk_band

if TYPE_CHECKING:
    from .orchestrate import CaseRecord

ALERT_TYPE_LABELS = {
    AlertType.NEW_WALLET: "New Wallets",
    AlertType.WASH_TRADING: "Wash Trading",
    AlertType.STRUCTURING: "Structuring",
    AlertType.HIGH_VELOCITY: "High Velocity",
    AlertType.OBFUSCATION: "Obfuscation",
    AlertType.SANCTIONS_HIT: "Sanctions Hit",
    AlertType.HIGH_RISK_JURISDICTION: "High-Risk Jurisdiction",
}

CLEAN_SCREENING_SENTENCE = "No sanctions or high-risk jurisdiction issues were found."


class NotEscalated(ValueError):
    pass


class NotRecommended(ValueError):
    pass


@dataclass(frozen=True)
class StrReport:
    report_id: str
    case_id: str
    created_at: datetime
    reporting_entity: str
    subjects: tuple[tuple[str, str], ...]  # (wallet, role)
    tx_refs: tuple[str, ...]
    alert_summary: tuple[tuple[str, int, str], ...]  # (type, score, evidence)
    risk_score: int
    risk_band: str
    screening_summary: str
    narrative: str
    recommendation: str
    regulatory_basis: str = "AML-STR"
    audit_refs: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "case_id": self.case_id,
            "created_at": format_timestamp(self.created_at),
            "reporting_entity": self.reporting_entity,
            "subjects": [list(s) for s in self.subjects],
            "tx_refs": list(self.tx_refs),
            "alert_summary": [list(a) for a in self.alert_summary],
            "risk_score": self.risk_score,
            "risk_band": self.risk_band,
            "screening_summary": self.screening_summary,
            "narrative": self.narrative,
            "recommendation": self.recommendation,
            "regulatory_basis": self.regulatory_basis,
            "audit_refs": list(self.audit_refs),
        }


def draft_str(
    case: "CaseRecord",
    reporting_entity: str,
    at: datetime,
    audit_refs: Sequence[int] = (),
) -> StrReport:
    """Build the report for an escalated case whose disposition recommends one."""
    from .orchestrate import CaseState  # local import to avoid a cycle

    if case.state is not CaseState.ESCALATED:
        raise NotEscalated(f"case {case.case_id} is {case.state.value}, not ESCALATED")
    if case.disposition is None or not case.disposition.str_recommended:
        raise NotRecommended(f"case {case.case_id} disposition does not recommend an STR")

    context = case.context
    focal = context.subject_wallets[0] if context.subject_wallets else ("", "subject")
    for wallet, role in context.subject_wallets:
        if role == "buyer":
            focal = (wallet, role)
            break
    recommendation = (
        f"It recommends further monitoring and potential regulatory action on the "
        f"{focal[1]} wallet {focal[0]}."
    )
    screening_summary = _screening_summary(context)
    report_id = "STR-" + hashlib.sha256(
        f"{case.case_id}|{context.tx_refs[0] if context.tx_refs else ''}".encode()
    ).hexdigest()[:12]
    partial = StrReport(
        report_id=report_id,
        case_id=case.case_id,
        created_at=at,
        reporting_entity=reporting_entity,
        subjects=context.subject_wallets,
        tx_refs=context.tx_refs,
        alert_summary=tuple((a.alert_type.value, a.score, a.evidence) for a in context.alerts),
        risk_score=context.risk.score,
        risk_band=context.risk.band.name,
        screening_summary=screening_summary,
        narrative="",
        recommendation=recommendation,
        audit_refs=tuple(audit_refs),
    )
    return StrReport(**{**partial.__dict__, "narrative": render_narrative(partial)})


def _screening_summary(context) -> str:
    issues = []
    for result in context.screening:
        if result.sanctions_hit:
            issues.append(f"wallet {result.address} matches the sanctions list")
        if result.high_risk_jurisdiction:
            issues.append(f"wallet {result.address} is registered in a high-risk jurisdiction")
    if not issues:
        return CLEAN_SCREENING_SENTENCE
    return "Screening issues found: " + "; ".join(issues) + "."


def render_narrative(report: StrReport) -> str:
    """Render the narrative in fixed section order from stored fields only."""
    sections = []

    wallets = " and ".join(f"{wallet} ({role})" for wallet, role in report.subjects[:2])
    extra = len(report.subjects) - 2
    if extra > 0:
        wallets += f" and {extra} further wallet{'s' if extra > 1 else ''}"
    flagged_tx = report.tx_refs[0] if report.tx_refs else "(no transaction reference)"
    sections.append(f"The flagged transaction {flagged_tx} involves wallets {wallets}.")

    if report.alert_summary:
        first_type, first_score, _ = report.alert_summary[0]
        label = ALERT_TYPE_LABELS.get(AlertType(first_type), first_type)
        subject_role = report.subjects[0][1] if report.subjects else "subject"
        subject_wallet = report.subjects[0][0] if report.subjects else ""
        for wallet, role in report.subjects:
            if role == "buyer":
                subject_wallet, subject_role = wallet, role
                break
        sections.append(
            f"The {subject_role} wallet {subject_wallet} was flagged for a {label} alert "
            f"with a score of {first_score}."
        )

    if len(report.alert_summary) > 1:
        distinct = list(dict.fromkeys(evidence for _, _, evidence in report.alert_summary[1:]))
        sections.append(f"Investigation shows: {'; '.join(distinct)}.")

    band_words = BAND_WORDS[Band[report.risk_band]]
    sections.append(
        f"The overall risk score is {band_words} ({report.risk_score}), reflecting "
        f"behavioral and wallet activity risks."
    )

    sections.append(report.screening_summary)

    sections.append(
        "A Suspicious Transaction Report (STR) compliant with AML regulations has been "
        "generated and is ready for submission to the FIU. " + report.recommendation
    )
    return " ".join(sections)


def validate_report(
    report: StrReport,
    cfg: RulesetConfig,
    tx_exists: Optional[Callable[[str], bool]] = None,
    max_audit_seq: Optional[int] = None,
) -> list[str]:
    """Check type invariants and cross-references; violations are returned, not raised."""
    violations = []
    if not report.narrative.strip():
        violations.append("empty narrative")
    if not report.subjects:
        violations.append("no subject wallets")
    if not report.recommendation.strip():
        violations.append("empty recommendation")

    types = {AlertType(t) for t, _, _ in report.alert_summary}
    expected_score = min(100, sum(cfg.base_scores[t] for t in types))
    if expected_score != report.risk_score:
        violations.append("score not re-derivable from alert summary")
    else:
        if risk_band(report.risk_score).name != report.risk_band:
            violations.append("band inconsistent with score")

    if tx_exists is not None:
        for tx in report.tx_refs:
            if not tx_exists(tx):
                violations.append(f"unknown tx_ref {tx}")
    if max_audit_seq is not None:
        for seq in report.audit_refs:
            if seq < 0 or seq > max_audit_seq:
                violations.append(f"audit ref {seq} does not resolve")
    return violations


def serialize_report(report: StrReport) -> str:
    return canonical_dumps(report.to_dict())


def parse_report(text: str) -> StrReport:
    data = canonical_loads(text)
    return StrReport(
        report_id=data["report_id"],
        case_id=data["case_id"],
        created_at=parse_timestamp(data["created_at"]),
        reporting_entity=data["reporting_entity"],
        subjects=tuple((w, r) for w, r in data["subjects"]),
        tx_refs=tuple(data["tx_refs"]),
        alert_summary=tuple((t, int(s), e) for t, s, e in data["alert_summary"]),
        risk_score=int(data["risk_score"]),
        risk_band=data["risk_band"],
        screening_summary=data["screening_summary"],
        narrative=data["narrative"],
        recommendation=data["recommendation"],
        regulatory_basis=data["regulatory_basis"],
        audit_refs=tuple(int(s) for s in data["audit_refs"]),
    )


def archive_report(report: StrReport, directory: Path) -> tuple[Path, Path]:
    """Write the immutable JSON archive plus its rendered-narrative sibling."""
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / f"{report.report_id}.json"
    text_path = directory / f"{report.report_id}.txt"
    json_path.write_text(serialize_report(report) + "\n", encoding="utf-8")
    text_path.write_text(report.narrative + "\n", encoding="utf-8")
    return json_path, text_path
