import { describe, expect, it } from "vitest";

import { bandBadge, renderCase, renderDecisionForm, renderQueue } from "../src/render.js";
import { caseDetail, escalationItem } from "./helpers.js";

describe("renderQueue", () => {
  it("shows the score badge exactly as the server sent it", () => {
    const html = renderQueue([escalationItem()]);
    expect(html).toContain("70 MODERATE_HIGH");
    expect(html).toContain('data-score="70"');
    expect(html).toContain("CASE-bbbbbbbbbbbb");
  });

  it("preserves server ordering (no client-side sorting)", () => {
    const items = [
      escalationItem({ escalation_id: "HO-1", case_id: "CASE-1", risk_score: 70 }),
      escalationItem({ escalation_id: "HO-2", case_id: "CASE-2", risk_score: 100 }),
    ];
    const html = renderQueue(items);
    expect(html.indexOf("CASE-1")).toBeLessThan(html.indexOf("CASE-2"));
  });

  it("renders every payload field of each item", () => {
    const item = escalationItem();
    const html = renderQueue([item]);
    expect(html).toContain(item.case_id);
    expect(html).toContain(item.escalation_id);
    expect(html).toContain(String(item.risk_score));
    expect(html).toContain(item.band);
    expect(html).toContain(item.created_at);
    for (const alertType of item.alert_types) {
      expect(html).toContain(alertType);
    }
  });

  it("renders the empty state", () => {
    expect(renderQueue([])).toContain("No pending escalations");
  });
});

describe("renderCase", () => {
  it("shows the narrative verbatim and the audit-ready fields", () => {
    const detail = caseDetail();
    const html = renderCase(detail, "HO-aaaaaaaaaaaa");
    expect(html).toContain("moderate to high (70)");
    expect(html).toContain("0xd5b234fa7e619a5c7bf38bd575abde09a18eaed6");
    expect(html).toContain("buyer");
    expect(html).toContain("NEW_WALLET");
  });

  it("escapes injected markup from server strings", () => {
    const detail = caseDetail({ narrative: "<script>alert(1)</script>" });
    const html = renderCase(detail, "HO-x");
    expect(html).not.toContain("<script>alert(1)</script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("renderDecisionForm", () => {
  it("is enabled only for PENDING_REVIEW with an escalation id", () => {
    const pending = renderDecisionForm(caseDetail(), "HO-1");
    expect(pending).toContain('data-enabled="true"');
    expect(pending).not.toContain("disabled");

    const submitted = renderDecisionForm(caseDetail({ state: "SUBMITTED" }), "HO-1");
    expect(submitted).toContain('data-enabled="false"');
    expect(submitted).toContain("disabled");

    const noEscalation = renderDecisionForm(caseDetail(), null);
    expect(noEscalation).toContain('data-enabled="false"');
  });
});

describe("bandBadge", () => {
  it("maps bands to their classes without recomputing them", () => {
    expect(bandBadge("HIGH", 100)).toContain("band-high");
    expect(bandBadge("LOW", 0)).toContain("band-low");
    expect(bandBadge("MODERATE_HIGH", 70)).toContain("70 MODERATE_HIGH");
  });
});
