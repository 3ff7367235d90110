/**
 * Browser bootstrap: wires the controller to the DOM and polls the queue.
 *
 * Served by the engine itself (same origin), so the base URL is empty; an
 * analyst id set in the settings field rides along as a header.
 */

import { ApiClient } from "./api.js";
import { ConsoleController } from "./controller.js";
import {
  renderAuditTimeline,
  renderBanner,
  renderCase,
  renderMetrics,
  renderQueue,
} from "./render.js";

const POLL_INTERVAL_MS = 5000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function startConsole(): void {
  const api = new ApiClient({ analystId: localStorage.getItem("analystId") ?? "analyst-console" });
  const controller = new ConsoleController(api);
  let selectedEscalation: string | null = null;

  const banner = el<HTMLDivElement>("banner");
  const queueRoot = el<HTMLDivElement>("queue-root");
  const caseRoot = el<HTMLDivElement>("case-root");
  const auditRoot = el<HTMLDivElement>("audit-root");
  const metricsRoot = el<HTMLDivElement>("metrics-root");
  const analystInput = el<HTMLInputElement>("analyst-id");

  analystInput.value = api.analystId;
  analystInput.addEventListener("change", () => {
    api.analystId = analystInput.value.trim() || "analyst-console";
    localStorage.setItem("analystId", api.analystId);
  });

  function paint(): void {
    banner.innerHTML = renderBanner(controller.state);
    queueRoot.innerHTML = renderQueue(controller.state.queue);
    caseRoot.innerHTML = controller.state.selectedCase
      ? renderCase(controller.state.selectedCase, selectedEscalation)
      : `<div class="empty-state">Select an escalation to review.</div>`;
    auditRoot.innerHTML = renderAuditTimeline(controller.state.auditTrail);
    metricsRoot.innerHTML = renderMetrics(controller.state);
  }

  async function refresh(): Promise<void> {
    await controller.refreshQueue();
    try {
      await controller.refreshMetrics();
    } catch {
      // metrics are best-effort; the banner already reflects connectivity
    }
    paint();
  }

  queueRoot.addEventListener("click", async (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>(".queue-row");
    if (!row) return;
    selectedEscalation = row.dataset.escalationId ?? null;
    try {
      await controller.openCase(row.dataset.caseId ?? "");
    } catch (error) {
      controller.state.errorBanner = String(error);
    }
    paint();
  });

  caseRoot.addEventListener("click", async (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button");
    if (!button || button.disabled) return;
    const decision = button.id === "decision-confirm" ? "confirm" : "dismiss";
    const rationale = el<HTMLTextAreaElement>("decision-rationale").value;
    if (!controller.canSubmit(rationale)) {
      controller.state.errorBanner = "a non-empty rationale is required before submitting";
      paint();
      return;
    }
    const escalationId = button.dataset.escalationId ?? "";
    try {
      await controller.submitDecision(escalationId, decision, rationale);
      selectedEscalation = null;
      await controller.refreshMetrics();
    } catch {
      // controller rolled the queue back and set the banner
    }
    paint();
  });

  void refresh();
  setInterval(() => void refresh(), POLL_INTERVAL_MS);
}

if (typeof document !== "undefined" && document.getElementById("queue-root")) {
  startConsole();
}
