/**
 * Typed client for the engine's /api/v1 surface.
 *
 * Mutations are idempotent: every decision carries a client-generated
 * request id, and a retry of the same logical decision reuses the same id
 * so the server records it exactly once.
 */

import type {
  AuditRecordView,
  CaseDetail,
  CostReportView,
  Decision,
  DecisionResult,
  EscalationItem,
  MetricsView,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

export function isApiError(error: unknown): error is ApiError {
  return error instanceof ApiError;
}

export interface ApiClientOptions {
  baseUrl?: string;
  analystId?: string;
  fetchImpl?: typeof fetch;
}

let requestCounter = 0;

export function newRequestId(): string {
  requestCounter += 1;
  return `con-${Date.now().toString(36)}-${requestCounter.toString(36)}-${Math.floor(
    Math.random() * 0xffff,
  ).toString(16)}`;
}

export class ApiClient {
  readonly baseUrl: string;
  analystId: string;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ApiClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? "").replace(/\/+$/, "");
    this.analystId = options.analystId ?? "analyst-console";
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = {
      "X-Analyst-Id": this.analystId,
      ...(init?.body ? { "Content-Type": "application/json" } : {}),
    };
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, { ...init, headers });
    } catch (error) {
      throw new ApiError(0, "ConnectionError", String(error));
    }
    const text = await response.text();
    let body: unknown = null;
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        body = text;
      }
    }
    if (!response.ok) {
      const payload = body as { code?: string; message?: string } | null;
      throw new ApiError(
        response.status,
        payload?.code ?? `HTTP${response.status}`,
        payload?.message ?? response.statusText,
      );
    }
    return body as T;
  }

  fetchQueue(): Promise<EscalationItem[]> {
    return this.request<EscalationItem[]>("/api/v1/escalations");
  }

  fetchCase(caseId: string): Promise<CaseDetail> {
    return this.request<CaseDetail>(`/api/v1/cases/${encodeURIComponent(caseId)}`);
  }

  fetchAuditTrail(caseId: string): Promise<AuditRecordView[]> {
    return this.request<AuditRecordView[]>(
      `/api/v1/audit?case_id=${encodeURIComponent(caseId)}`,
    );
  }

  fetchMetrics(): Promise<MetricsView> {
    return this.request<MetricsView>("/api/v1/metrics");
  }

  fetchCostReport(): Promise<CostReportView> {
    return this.request<CostReportView>("/api/v1/cost-report");
  }

  submitDecision(
    escalationId: string,
    decision: Decision,
    rationale: string,
    requestId: string,
  ): Promise<DecisionResult> {
    return this.request<DecisionResult>(
      `/api/v1/escalations/${encodeURIComponent(escalationId)}/decision`,
      {
        method: "POST",
        body: JSON.stringify({
          decision,
          rationale,
          analyst: this.analystId,
          request_id: requestId,
        }),
      },
    );
  }
}
