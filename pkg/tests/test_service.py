from __future__ import annotations

import json
from decimal import Decimal
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from fccengine.canonical import canonical_dumps
from fccengine.config import EngineConfig
from fccengine.orchestrate import Orchestrator
from fccengine.service import CostModelParams, InvalidParams, compute_cost_report, create_app


class TestCostModel:
    def test_paper_anchor_values(self):
        report = compute_cost_report(CostModelParams())
        assert report.alerts_per_year == Decimal("450000")
        assert report.manual_hours == Decimal("900000")
        assert report.manual_fte == Decimal("480")

    def test_analyst_hours_at_1_98(self):
        report = compute_cost_report(CostModelParams(manual_hours_per_alert=Decimal("1.98")))
        assert report.manual_hours == Decimal("891000")

    def test_zero_rate_zeroes_volume(self):
        report = compute_cost_report(CostModelParams(suspicion_rate=Decimal("0")))
        assert report.alerts_per_year == 0
        assert report.manual_hours == 0
        assert report.manual_fte == 0
        assert report.inference_cost_usd == 0

    def test_inference_cost_single_call(self):
        report = compute_cost_report(CostModelParams(api_calls_per_alert=Decimal("1")))
        assert report.inference_cost_usd == Decimal("270.11")

    def test_reduction_fraction_above_98(self):
        report = compute_cost_report(CostModelParams())
        assert report.reduction_fraction > Decimal("0.98")

    def test_invalid_params(self):
        with pytest.raises(InvalidParams):
            compute_cost_report(CostModelParams(suspicion_rate=Decimal("1.5")))
        with pytest.raises(InvalidParams):
            compute_cost_report(CostModelParams(users=Decimal("-1")))


def golden_client(golden_parts, tmp_path: Path | None = None):
    warmup, batch = golden_parts
    config = EngineConfig(data_dir=tmp_path)
    engine = Orchestrator.open(config) if tmp_path else Orchestrator(config)
    engine.ingest_only(warmup)
    engine.run_pipeline(batch)
    client = TestClient(create_app(engine), raise_server_exceptions=False)
    return client, engine


@pytest.fixture
def api(golden_parts):
    client, engine = golden_client(golden_parts)
    return client


@pytest.fixture
def api_with_engine(golden_parts, tmp_path):
    return golden_client(golden_parts, tmp_path / "data")


class TestEndpoints:
    def test_batch_endpoint(self, golden_parts):
        warmup, batch = golden_parts
        engine = Orchestrator(EngineConfig())
        engine.ingest_only(warmup)
        client = TestClient(create_app(engine))
        body = {
            "events": [json.loads(canonical_dumps(e.to_dict())) for e in batch],
            "request_id": "req-batch-1",
        }
        response = client.post("/api/v1/transactions:batch", json=body)
        assert response.status_code == 202
        payload = response.json()
        assert payload["request_id"] == "req-batch-1"
        assert payload["cases_opened"] == 1
        assert payload["escalated"] == 1
        # idempotent replay
        again = client.post("/api/v1/transactions:batch", json=body)
        assert again.json() == payload

    def test_escalations_sorted_and_shaped(self, api):
        rows = api.get("/api/v1/escalations").json()
        assert len(rows) == 1
        item = rows[0]
        assert item["risk_score"] == 70 and item["band"] == "MODERATE_HIGH"
        assert set(item) == {
            "escalation_id", "case_id", "risk_score", "band", "alert_types", "created_at",
        }

    def test_case_detail(self, api):
        case_id = api.get("/api/v1/cases").json()[0]["case_id"]
        detail = api.get(f"/api/v1/cases/{case_id}").json()
        assert detail["state"] == "PENDING_REVIEW"
        assert detail["narrative"]
        assert detail["history"][0]["state"] == "NEW"

    def test_unknown_case_404(self, api):
        assert api.get("/api/v1/cases/CASE-missing").status_code == 404

    def test_alerts_filter(self, api):
        all_alerts = api.get("/api/v1/alerts").json()
        wash = api.get("/api/v1/alerts", params={"type": "WASH_TRADING"}).json()
        assert len(wash) == 2
        assert len(all_alerts) > len(wash)
        subject = wash[0]["subject"]
        mine = api.get("/api/v1/alerts", params={"wallet": subject}).json()
        assert all(a["subject"] == subject for a in mine)

    def test_decision_confirm_writes_outbox(self, api_with_engine):
        client, engine = api_with_engine
        item = client.get("/api/v1/escalations").json()[0]
        response = client.post(
            f"/api/v1/escalations/{item['escalation_id']}/decision",
            json={"decision": "confirm", "rationale": "verified", "request_id": "rq-9"},
            headers={"X-Analyst-Id": "analyst-42"},
        )
        assert response.status_code == 200
        assert response.json()["state"] == "SUBMITTED"
        outbox = list(engine.store.outbox_dir.iterdir())
        assert len(outbox) == 1
        # feedback visible via metrics
        metrics = client.get("/api/v1/metrics").json()
        assert metrics["feedback"]["confirmed_suspicious"] == 1
        # audit names the analyst and request id
        trail = client.get("/api/v1/audit", params={"case_id": item["case_id"]}).json()
        joined = " ".join(r["rationale"] for r in trail)
        assert "analyst-42" in joined and "rq-9" in joined

    def test_decision_idempotent_via_request_id(self, api):
        item = api.get("/api/v1/escalations").json()[0]
        body = {"decision": "confirm", "rationale": "ok", "request_id": "rq-twice"}
        first = api.post(f"/api/v1/escalations/{item['escalation_id']}/decision", json=body)
        second = api.post(f"/api/v1/escalations/{item['escalation_id']}/decision", json=body)
        assert first.json() == second.json()

    def test_decision_unknown_404(self, api):
        response = api.post(
            "/api/v1/escalations/HO-none/decision",
            json={"decision": "confirm", "rationale": "x"},
        )
        assert response.status_code == 404
        assert set(response.json()) == {"code", "message"}

    def test_decision_conflict_409(self, api):
        item = api.get("/api/v1/escalations").json()[0]
        api.post(
            f"/api/v1/escalations/{item['escalation_id']}/decision",
            json={"decision": "dismiss", "rationale": "x"},
        )
        response = api.post(
            f"/api/v1/escalations/{item['escalation_id']}/decision",
            json={"decision": "confirm", "rationale": "y"},
        )
        assert response.status_code == 409

    def test_decision_empty_rationale_400(self, api):
        item = api.get("/api/v1/escalations").json()[0]
        response = api.post(
            f"/api/v1/escalations/{item['escalation_id']}/decision",
            json={"decision": "confirm", "rationale": "  "},
        )
        assert response.status_code == 400

    def test_report_formats(self, api):
        case = api.get("/api/v1/cases").json()[0]
        detail = api.get(f"/api/v1/cases/{case['case_id']}").json()
        report_id = detail["report_id"]
        as_json = api.get(f"/api/v1/reports/{report_id}").json()
        assert as_json["risk_score"] == 70
        as_text = api.get(f"/api/v1/reports/{report_id}", params={"format": "text"})
        assert "moderate to high (70)" in as_text.text

    def test_audit_verify_ok(self, api):
        body = api.get("/api/v1/audit/verify").json()
        assert body["ok"] is True

    def test_audit_verify_detects_tamper(self, api_with_engine):
        client, engine = api_with_engine
        engine.audit.flush()
        path = engine.store.audit_path
        text = path.read_text()
        path.write_text(text.replace("first-seen wallet", "first-zeen wallet", 1))
        body = client.get("/api/v1/audit/verify").json()
        assert body["ok"] is False
        assert "seq" in body and "kind" in body

    def test_cost_report_endpoint(self, api):
        body = api.get(
            "/api/v1/cost-report",
            params={"U": 100000, "R": 100, "s": 0.045, "h": 2, "Y": 1875, "k": 1},
        ).json()
        assert Decimal(str(body["alerts_per_year"])) == 450000
        assert Decimal(str(body["manual_fte"])) == 480
        assert Decimal(str(body["inference_cost_usd"])) == Decimal("270.11")

    def test_models_and_score(self, golden_parts):
        warmup, batch = golden_parts
        config = EngineConfig()
        from fccengine.config import ModelProfileConfig

        config.model_registry.append(
            ModelProfileConfig(
                profile_id="llm-x", kind="EXTERNAL_LLM", explainability=3, compliance_score=0.85
            )
        )
        engine = Orchestrator(config)
        engine.ingest_only(warmup)
        engine.run_pipeline(batch)
        client = TestClient(create_app(engine))
        models = client.get("/api/v1/models").json()
        assert {m["profile_id"] for m in models} == {"rules-v1", "llm-x"}
        response = client.post("/api/v1/models/llm-x/score", json={"outcome": "fail"})
        assert response.status_code == 200
        assert response.json()["excluded"] is True
        immutable = client.post("/api/v1/models/rules-v1/score", json={"outcome": "fail"})
        assert immutable.status_code == 409

    def test_generate_dev_mode_gate(self, golden_parts):
        engine = Orchestrator(EngineConfig(dev_mode=False))
        client = TestClient(create_app(engine))
        response = client.post("/api/v1/generate", json={"n_transactions": 100})
        assert response.status_code == 403

    def test_generate_runs_pipeline(self):
        engine = Orchestrator(EngineConfig())
        client = TestClient(create_app(engine))
        response = client.post(
            "/api/v1/generate",
            json={"seed": 3, "n_transactions": 300, "n_wallets": 50, "ingest": True},
        )
        assert response.status_code == 202
        assert response.json()["generated"] == 300
        assert response.json()["alerts"] > 0

    def test_metrics_shape(self, api):
        metrics = api.get("/api/v1/metrics").json()
        for key in ("events_ingested", "alerts_total", "theta", "cache", "models", "feedback"):
            assert key in metrics


class TestReplay:
    def test_restart_reproduces_state(self, golden_parts, tmp_path):
        client, engine = golden_client(golden_parts, tmp_path / "data")
        item = client.get("/api/v1/escalations").json()[0]
        client.post(
            f"/api/v1/escalations/{item['escalation_id']}/decision",
            json={"decision": "confirm", "rationale": "ok", "request_id": "rq-replay"},
        )
        snapshot = canonical_dumps(engine.state_snapshot())
        theta = engine.optimizer.theta
        engine.close()

        rebuilt = Orchestrator.open(EngineConfig(data_dir=tmp_path / "data"))
        assert canonical_dumps(rebuilt.state_snapshot()) == snapshot
        assert rebuilt.optimizer.theta == theta
        rebuilt.close()

    def test_startup_fails_on_tampered_chain(self, golden_parts, tmp_path):
        from fccengine.orchestrate import ChainVerificationError

        client, engine = golden_client(golden_parts, tmp_path / "data")
        engine.close()
        audit_path = tmp_path / "data" / "audit.jsonl"
        text = audit_path.read_text()
        assert "first-seen wallet" in text
        audit_path.write_text(text.replace("first-seen wallet", "first-zeen wallet", 1))
        with pytest.raises(ChainVerificationError):
            Orchestrator.open(EngineConfig(data_dir=tmp_path / "data"))
