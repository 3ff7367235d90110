import type { CaseDetail, EscalationItem } from "../src/types.js";

export function escalationItem(overrides: Partial<EscalationItem> = {}): EscalationItem {
  return {
    escalation_id: "HO-aaaaaaaaaaaa",
    case_id: "CASE-bbbbbbbbbbbb",
    risk_score: 70,
    band: "MODERATE_HIGH",
    alert_types: ["NEW_WALLET", "STRUCTURING", "WASH_TRADING"],
    created_at: "2025-02-28T00:00:00Z",
    ...overrides,
  };
}

export function caseDetail(overrides: Partial<CaseDetail> = {}): CaseDetail {
  return {
    case_id: "CASE-bbbbbbbbbbbb",
    state: "PENDING_REVIEW",
    risk_score: 70,
    band: "MODERATE_HIGH",
    subjects: [
      ["0xd5b234fa7e619a5c7bf38bd575abde09a18eaed6", "buyer"],
      ["0xa2ea9a8c59789c6d550f451fb91319ed2fdc6760", "seller"],
    ],
    tx_refs: ["0xaa713b09d691098e59f6df9b267d070241fc1246f8aaa14e1664cc9c93e85f0e"],
    alerts: [
      {
        alert_id: "AL1",
        alert_type: "NEW_WALLET",
        subject: "0xd5b234fa7e619a5c7bf38bd575abde09a18eaed6",
        tx_refs: ["0xaa713b09d691098e59f6df9b267d070241fc1246f8aaa14e1664cc9c93e85f0e"],
        score: 10,
        evidence: "wallet first seen 0.0 days before this trade",
        window: null,
      },
    ],
    screening: [],
    behavior: {
      trade_count_30d: 4,
      value_min: 61,
      value_max: 64,
      alternation_count: 3,
      wallet_age_days: 0,
    },
    disposition: {
      outcome: "ESCALATE",
      str_recommended: true,
      rationale: "score 70 meets the threshold",
      provenance: "FRESH",
    },
    report_id: "STR-cccccccccccc",
    narrative: "The flagged transaction ... moderate to high (70) ... ready for submission.",
    history: [{ state: "NEW", at: "2025-02-10T00:00:00Z", audit_seq: 1 }],
    ...overrides,
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
  headers: Record<string, string>;
}

/** Scriptable fetch stub: responds per URL matcher, records every request. */
export function fetchStub(
  routes: Array<{ match: (url: string, method: string) => boolean; status?: number; body: unknown }>,
) {
  const requests: RecordedRequest[] = [];
  const impl: typeof fetch = async (input, init) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    let parsed: unknown = null;
    if (init?.body) parsed = JSON.parse(String(init.body));
    requests.push({
      url,
      method,
      body: parsed,
      headers: (init?.headers ?? {}) as Record<string, string>,
    });
    const route = routes.find((r) => r.match(url, method));
    if (!route) {
      return new Response(JSON.stringify({ code: "NotFound", message: `no route ${url}` }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    return new Response(JSON.stringify(route.body), {
      status: route.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, requests };
}
