/**
 * Console state and the decision workflow.
 *
 * The server is the source of truth; the only optimistic update is removing
 * a decided item from the queue view, rolled back if the POST fails. Request
 * ids are pinned per escalation so retries and double-clicks collapse into
 * one recorded decision.
 */

import { ApiClient, ApiError, isApiError, newRequestId } from "./api.js";
import type {
  AuditRecordView,
  CaseDetail,
  CostReportView,
  Decision,
  DecisionResult,
  EscalationItem,
  MetricsView,
} from "./types.js";

export interface ConsoleState {
  queue: EscalationItem[];
  stale: boolean;
  errorBanner: string | null;
  selectedCase: CaseDetail | null;
  auditTrail: AuditRecordView[];
  metrics: MetricsView | null;
  costReport: CostReportView | null;
  busyEscalation: string | null;
  lastDecision: DecisionResult | null;
}

export class ConsoleController {
  readonly api: ApiClient;
  readonly state: ConsoleState = {
    queue: [],
    stale: false,
    errorBanner: null,
    selectedCase: null,
    auditTrail: [],
    metrics: null,
    costReport: null,
    busyEscalation: null,
    lastDecision: null,
  };
  private readonly decisionRequestIds = new Map<string, string>();
  private readonly inFlight = new Set<string>();

  constructor(api: ApiClient) {
    this.api = api;
  }

  /** Refresh the escalation queue; on failure keep the last snapshot, marked stale. */
  async refreshQueue(): Promise<void> {
    try {
      this.state.queue = await this.api.fetchQueue();
      this.state.stale = false;
      this.state.errorBanner = null;
    } catch (error) {
      this.state.stale = true;
      this.state.errorBanner = describeError(error);
    }
  }

  async openCase(caseId: string): Promise<void> {
    this.state.selectedCase = await this.api.fetchCase(caseId);
    this.state.auditTrail = await this.api.fetchAuditTrail(caseId);
  }

  async refreshMetrics(): Promise<void> {
    this.state.metrics = await this.api.fetchMetrics();
    this.state.costReport = await this.api.fetchCostReport();
  }

  /** The request id for a decision is minted once per escalation and reused. */
  requestIdFor(escalationId: string): string {
    let id = this.decisionRequestIds.get(escalationId);
    if (!id) {
      id = newRequestId();
      this.decisionRequestIds.set(escalationId, id);
    }
    return id;
  }

  canSubmit(rationale: string): boolean {
    const detail = this.state.selectedCase;
    return Boolean(detail && detail.state === "PENDING_REVIEW" && rationale.trim().length > 0);
  }

  async submitDecision(
    escalationId: string,
    decision: Decision,
    rationale: string,
  ): Promise<DecisionResult> {
    if (!rationale.trim()) {
      throw new ApiError(0, "EmptyRationale", "a decision rationale is required");
    }
    if (this.inFlight.has(escalationId)) {
      throw new ApiError(0, "InFlight", "decision already submitting");
    }
    const requestId = this.requestIdFor(escalationId);
    const snapshot = this.state.queue;
    this.state.queue = snapshot.filter((item) => item.escalation_id !== escalationId);
    this.state.busyEscalation = escalationId;
    this.inFlight.add(escalationId);
    try {
      const result = await this.api.submitDecision(escalationId, decision, rationale, requestId);
      this.state.lastDecision = result;
      this.state.errorBanner = null;
      if (this.state.selectedCase?.case_id === result.case_id) {
        await this.openCase(result.case_id);
      }
      return result;
    } catch (error) {
      this.state.queue = snapshot;
      this.state.errorBanner = describeError(error);
      throw error;
    } finally {
      this.inFlight.delete(escalationId);
      this.state.busyEscalation = null;
    }
  }
}

export function describeError(error: unknown): string {
  if (isApiError(error)) {
    if (error.status === 0) return `service unreachable: ${error.message}`;
    return `${error.status} ${error.code}: ${error.message}`;
  }
  return String(error);
}
