import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ConsoleController } from "../src/controller.js";
import { caseDetail, escalationItem, fetchStub } from "./helpers.js";

function queueRoutes(extra: Parameters<typeof fetchStub>[0] = []) {
  return fetchStub([
    { match: (url) => url.endsWith("/api/v1/escalations"), body: [escalationItem()] },
    { match: (url) => url.includes("/api/v1/cases/"), body: caseDetail() },
    { match: (url) => url.includes("/api/v1/audit?"), body: [] },
    ...extra,
  ]);
}

describe("ConsoleController", () => {
  it("refreshes the queue from the server payload verbatim", async () => {
    const { impl } = queueRoutes();
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.refreshQueue();
    expect(controller.state.queue).toEqual([escalationItem()]);
    expect(controller.state.stale).toBe(false);
  });

  it("marks the snapshot stale when the service is down", async () => {
    const { impl } = queueRoutes();
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.refreshQueue();
    const failing: typeof fetch = async () => {
      throw new TypeError("connection refused");
    };
    const offline = new ConsoleController(new ApiClient({ fetchImpl: failing }));
    offline.state.queue = controller.state.queue;
    await offline.refreshQueue();
    expect(offline.state.stale).toBe(true);
    expect(offline.state.errorBanner).toContain("service unreachable");
    expect(offline.state.queue).toHaveLength(1); // last snapshot kept
  });

  it("rejects an empty rationale before any network call", async () => {
    const { impl, requests } = queueRoutes();
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.refreshQueue();
    await expect(controller.submitDecision("HO-aaaaaaaaaaaa", "confirm", "   ")).rejects.toMatchObject({
      code: "EmptyRationale",
    });
    expect(requests.filter((r) => r.method === "POST")).toHaveLength(0);
  });

  it("optimistically removes the item and keeps it removed on success", async () => {
    const { impl } = queueRoutes([
      {
        match: (url, method) => url.includes("/decision") && method === "POST",
        body: {
          request_id: "x",
          case_id: "CASE-bbbbbbbbbbbb",
          state: "SUBMITTED",
          feedback: "CONFIRMED_SUSPICIOUS",
          report_id: "STR-cccccccccccc",
        },
      },
    ]);
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.refreshQueue();
    const result = await controller.submitDecision("HO-aaaaaaaaaaaa", "confirm", "looks right");
    expect(result.state).toBe("SUBMITTED");
    expect(controller.state.queue).toHaveLength(0);
    expect(controller.state.errorBanner).toBeNull();
  });

  it("rolls the queue back and surfaces the error on failure", async () => {
    const { impl } = queueRoutes([
      {
        match: (url, method) => url.includes("/decision") && method === "POST",
        status: 409,
        body: { code: "NotPending", message: "already decided" },
      },
    ]);
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.refreshQueue();
    await expect(
      controller.submitDecision("HO-aaaaaaaaaaaa", "dismiss", "noise"),
    ).rejects.toMatchObject({ status: 409 });
    expect(controller.state.queue).toHaveLength(1); // rollback
    expect(controller.state.errorBanner).toContain("409 NotPending");
  });

  it("reuses one request id per escalation across retries", async () => {
    let calls = 0;
    const { impl, requests } = queueRoutes([
      {
        match: (url, method) => {
          if (url.includes("/decision") && method === "POST") {
            calls += 1;
            return true;
          }
          return false;
        },
        get status() {
          return calls === 1 ? 503 : 200;
        },
        body: {
          request_id: "srv",
          case_id: "CASE-bbbbbbbbbbbb",
          state: "SUBMITTED",
          feedback: "CONFIRMED_SUSPICIOUS",
          report_id: null,
        },
      },
    ]);
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.refreshQueue();
    await controller.submitDecision("HO-aaaaaaaaaaaa", "confirm", "first try").catch(() => undefined);
    await controller.submitDecision("HO-aaaaaaaaaaaa", "confirm", "first try");
    const posts = requests.filter((r) => r.method === "POST");
    expect(posts).toHaveLength(2);
    const ids = posts.map((p) => (p.body as { request_id: string }).request_id);
    expect(ids[0]).toBe(ids[1]);
  });

  it("gates submission on PENDING_REVIEW state", async () => {
    const { impl } = queueRoutes();
    const controller = new ConsoleController(new ApiClient({ fetchImpl: impl }));
    await controller.openCase("CASE-bbbbbbbbbbbb");
    expect(controller.canSubmit("a rationale")).toBe(true);
    controller.state.selectedCase = caseDetail({ state: "SUBMITTED" });
    expect(controller.canSubmit("a rationale")).toBe(false);
    expect(controller.canSubmit("")).toBe(false);
  });
});
