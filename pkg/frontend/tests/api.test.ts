import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, isApiError, newRequestId } from "../src/api.js";
import { escalationItem, fetchStub } from "./helpers.js";

describe("ApiClient", () => {
  it("fetches the queue and carries the analyst header", async () => {
    const { impl, requests } = fetchStub([
      { match: (url) => url.endsWith("/api/v1/escalations"), body: [escalationItem()] },
    ]);
    const client = new ApiClient({ analystId: "analyst-9", fetchImpl: impl });
    const queue = await client.fetchQueue();
    expect(queue).toHaveLength(1);
    expect(queue[0]?.risk_score).toBe(70);
    expect(requests[0]?.headers["X-Analyst-Id"]).toBe("analyst-9");
  });

  it("maps error bodies onto ApiError", async () => {
    const { impl } = fetchStub([
      {
        match: (url) => url.includes("/decision"),
        status: 409,
        body: { code: "NotPending", message: "case CASE-x is SUBMITTED" },
      },
    ]);
    const client = new ApiClient({ fetchImpl: impl });
    try {
      await client.submitDecision("HO-1", "confirm", "why", "rq-1");
      expect.unreachable("should have thrown");
    } catch (error) {
      expect(isApiError(error)).toBe(true);
      const apiError = error as ApiError;
      expect(apiError.status).toBe(409);
      expect(apiError.code).toBe("NotPending");
      expect(apiError.message).toContain("SUBMITTED");
    }
  });

  it("wraps network failures as status 0", async () => {
    const failing: typeof fetch = async () => {
      throw new TypeError("fetch failed");
    };
    const client = new ApiClient({ fetchImpl: failing });
    await expect(client.fetchQueue()).rejects.toMatchObject({ status: 0, code: "ConnectionError" });
  });

  it("posts the decision body with the supplied request id", async () => {
    const { impl, requests } = fetchStub([
      {
        match: (url) => url.includes("/decision"),
        body: { request_id: "rq-5", case_id: "CASE-b", state: "SUBMITTED", feedback: "CONFIRMED_SUSPICIOUS", report_id: "STR-1" },
      },
    ]);
    const client = new ApiClient({ analystId: "an-2", fetchImpl: impl });
    const result = await client.submitDecision("HO-2", "confirm", "verified pattern", "rq-5");
    expect(result.state).toBe("SUBMITTED");
    expect(requests[0]?.body).toMatchObject({
      decision: "confirm",
      rationale: "verified pattern",
      analyst: "an-2",
      request_id: "rq-5",
    });
  });

  it("generates unique request ids", () => {
    const ids = new Set(Array.from({ length: 200 }, () => newRequestId()));
    expect(ids.size).toBe(200);
  });
});
