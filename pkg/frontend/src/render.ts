/**
 * Pure HTML renderers over server-supplied fields.
 *
 * No computation beyond formatting: scores, bands, and states are printed
 * exactly as the API returned them.
 */

import type { ConsoleState } from "./controller.js";
import type { AuditRecordView, CaseDetail, EscalationItem } from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

const BAND_CLASS: Record<string, string> = {
  LOW: "band-low",
  MODERATE: "band-moderate",
  MODERATE_HIGH: "band-moderate-high",
  HIGH: "band-high",
};

export function bandBadge(band: string, score: number): string {
  const cls = BAND_CLASS[band] ?? "band-low";
  return `<span class="badge ${cls}" data-score="${escapeHtml(score)}">${escapeHtml(
    score,
  )} ${escapeHtml(band)}</span>`;
}

export function renderBanner(state: ConsoleState): string {
  const parts: string[] = [];
  if (state.errorBanner) {
    parts.push(`<div class="banner banner-error">${escapeHtml(state.errorBanner)}</div>`);
  }
  if (state.stale) {
    parts.push(`<div class="banner banner-stale">showing last snapshot (stale)</div>`);
  }
  return parts.join("");
}

export function renderQueue(items: EscalationItem[]): string {
  if (items.length === 0) {
    return `<div class="empty-state">No pending escalations. The queue is clear.</div>`;
  }
  const rows = items
    .map(
      (item) => `
    <tr class="queue-row" data-case-id="${escapeHtml(item.case_id)}" data-escalation-id="${escapeHtml(
      item.escalation_id,
    )}">
      <td>${bandBadge(item.band, item.risk_score)}</td>
      <td class="mono">${escapeHtml(item.case_id)}</td>
      <td>${item.alert_types.map((t) => `<span class="chip">${escapeHtml(t)}</span>`).join(" ")}</td>
      <td class="muted">${escapeHtml(item.created_at)}</td>
    </tr>`,
    )
    .join("");
  return `
  <table class="queue">
    <thead><tr><th>Risk</th><th>Case</th><th>Alert types</th><th>Created</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderCase(detail: CaseDetail, escalationId: string | null): string {
  const subjects = detail.subjects
    .map(([wallet, role]) => `<li><span class="mono">${escapeHtml(wallet)}</span> <em>${escapeHtml(role)}</em></li>`)
    .join("");
  const alerts = detail.alerts
    .map(
      (alert) => `
      <li>
        <span class="chip">${escapeHtml(alert.alert_type)}</span>
        <strong>score ${escapeHtml(alert.score)}</strong>
        <div class="evidence">${escapeHtml(alert.evidence)}</div>
      </li>`,
    )
    .join("");
  const screening = detail.screening
    .map((s) => `<li>${escapeHtml(s.rationale)}</li>`)
    .join("");
  const decisionForm = renderDecisionForm(detail, escalationId);
  return `
  <article class="case" data-state="${escapeHtml(detail.state)}">
    <header>
      <h2>Case <span class="mono">${escapeHtml(detail.case_id)}</span></h2>
      ${bandBadge(detail.band, detail.risk_score)}
      <span class="state-badge state-${escapeHtml(detail.state)}">${escapeHtml(detail.state)}</span>
    </header>
    <section class="narrative">
      <h3>Narrative</h3>
      <p>${detail.narrative ? escapeHtml(detail.narrative) : "<em>No STR drafted.</em>"}</p>
    </section>
    <section>
      <h3>Subjects</h3>
      <ul>${subjects}</ul>
    </section>
    <section>
      <h3>Alert evidence</h3>
      <ul class="alerts">${alerts}</ul>
    </section>
    <section>
      <h3>Screening</h3>
      <ul>${screening || "<li><em>none recorded</em></li>"}</ul>
    </section>
    ${decisionForm}
  </article>`;
}

export function renderDecisionForm(detail: CaseDetail, escalationId: string | null): string {
  const pending = detail.state === "PENDING_REVIEW" && escalationId !== null;
  const disabledAttr = pending ? "" : "disabled";
  const note = pending
    ? "Provide a rationale, then confirm (file the STR) or dismiss (false positive)."
    : `Decisions are closed: case is ${escapeHtml(detail.state)}.`;
  return `
  <section class="decision" data-enabled="${pending}">
    <h3>Analyst decision</h3>
    <p class="muted">${note}</p>
    <textarea id="decision-rationale" placeholder="Decision rationale (required)" ${disabledAttr}></textarea>
    <div class="decision-buttons">
      <button id="decision-confirm" data-escalation-id="${escapeHtml(escalationId ?? "")}"
        ${disabledAttr}>Confirm &amp; submit STR</button>
      <button id="decision-dismiss" data-escalation-id="${escapeHtml(escalationId ?? "")}"
        ${disabledAttr}>Dismiss as false positive</button>
    </div>
  </section>`;
}

export function renderAuditTimeline(records: AuditRecordView[]): string {
  if (records.length === 0) {
    return `<div class="empty-state">No audit records for this case.</div>`;
  }
  const rows = records
    .map(
      (r) => `
      <li>
        <span class="seq">#${escapeHtml(r.seq)}</span>
        <span class="mono">${escapeHtml(r.timestamp)}</span>
        <span class="chip">${escapeHtml(r.agent)}</span>
        <strong>${escapeHtml(r.action)}</strong>
        <div class="evidence">${escapeHtml(r.rationale)}</div>
      </li>`,
    )
    .join("");
  return `<ol class="audit-timeline">${rows}</ol>`;
}

export function renderMetrics(state: ConsoleState): string {
  const metrics = state.metrics;
  if (!metrics) return `<div class="empty-state">Metrics not loaded.</div>`;
  const cost = state.costReport;
  const feedback = metrics.feedback;
  const models = metrics.models
    .map(
      (m) =>
        `<li><span class="mono">${escapeHtml(m.profile_id)}</span> ${escapeHtml(m.kind)} ` +
        `score ${escapeHtml(m.compliance_score)} ${m.excluded ? "<strong>EXCLUDED</strong>" : ""}</li>`,
    )
    .join("");
  return `
  <section class="metrics">
    <h3>Learning loop</h3>
    <dl>
      <dt>Escalation threshold (theta)</dt><dd id="metric-theta">${escapeHtml(metrics.theta)}</dd>
      <dt>Confirmed suspicious</dt><dd>${escapeHtml(feedback.confirmed_suspicious)}</dd>
      <dt>False positives</dt><dd>${escapeHtml(feedback.false_positive)}</dd>
      <dt>Cache entries / hits / misses</dt>
      <dd>${escapeHtml(metrics.cache.entries)} / ${escapeHtml(metrics.cache.hits)} / ${escapeHtml(metrics.cache.misses)}</dd>
    </dl>
    <h3>Cost model</h3>
    ${
      cost
        ? `<dl>
      <dt>Alerts per year</dt><dd>${escapeHtml(cost.alerts_per_year)}</dd>
      <dt>Manual analyst hours</dt><dd>${escapeHtml(cost.manual_hours)}</dd>
      <dt>Manual FTE</dt><dd>${escapeHtml(cost.manual_fte)}</dd>
      <dt>Inference cost (USD)</dt><dd>${escapeHtml(cost.inference_cost_usd)}</dd>
      <dt>Effort reduction</dt><dd>${escapeHtml(cost.reduction_fraction)}</dd>
    </dl>`
        : `<p class="muted">Cost report unavailable.</p>`
    }
    <h3>Model registry</h3>
    <ul>${models}</ul>
  </section>`;
}
