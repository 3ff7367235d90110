/**
 * Payload types mirroring the engine's /api/v1 responses.
 *
 * The console renders these fields verbatim: all risk scoring, banding, and
 * state derivation happens server-side.
 */

export interface EscalationItem {
  escalation_id: string;
  case_id: string;
  risk_score: number;
  band: string;
  alert_types: string[];
  created_at: string;
}

export interface AlertView {
  alert_id: string;
  alert_type: string;
  subject: string;
  tx_refs: string[];
  score: number;
  evidence: string;
  window: [string, string] | null;
}

export interface ScreeningView {
  address: string;
  sanctions_hit: boolean;
  high_risk_jurisdiction: boolean;
  customer_risk: string;
  rationale: string;
}

export interface HistoryStep {
  state: string;
  at: string;
  audit_seq: number;
}

export interface CaseDetail {
  case_id: string;
  state: string;
  risk_score: number;
  band: string;
  subjects: [string, string][];
  tx_refs: string[];
  alerts: AlertView[];
  screening: ScreeningView[];
  behavior: {
    trade_count_30d: number;
    value_min: number | string | null;
    value_max: number | string | null;
    alternation_count: number;
    wallet_age_days: number;
  };
  disposition: {
    outcome: string;
    str_recommended: boolean;
    rationale: string;
    provenance: string;
  } | null;
  report_id: string | null;
  narrative: string | null;
  history: HistoryStep[];
}

export interface AuditRecordView {
  seq: number;
  timestamp: string;
  agent: string;
  action: string;
  rationale: string;
  case_id?: string;
  tx_id?: string;
  prev_hash: string;
  hash: string;
}

export interface DecisionResult {
  request_id: string;
  case_id: string;
  state: string;
  feedback: string;
  report_id: string | null;
}

export interface MetricsView {
  events_ingested: number;
  alerts_total: number;
  alerts_by_type: Record<string, number>;
  cases_by_state: Record<string, number>;
  theta: number;
  feedback: { confirmed_suspicious: number; false_positive: number };
  cache: { entries: number; hits: number; misses: number };
  models: { profile_id: string; kind: string; excluded: boolean; compliance_score: number }[];
  audit_records: number;
}

export interface CostReportView {
  alerts_per_year: number | string;
  manual_hours: number | string;
  manual_fte: number | string;
  inference_cost_usd: number | string;
  reduction_fraction: number | string;
}

export type Decision = "confirm" | "dismiss";
