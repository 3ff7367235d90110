"""HTTP service over the engine, plus the compliance cost model.

All mutations funnel through the single-writer orchestrator and are
idempotent via client-supplied request ids; every mutating request leaves
at least one audit record naming that id. Cost arithmetic is exact decimal.
"""

from __future__ import annotations

import os
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .audit import EmptyRationale, verify_file, verify_records
from .config import EngineConfig, load_config
from .ingest import (
    GeneratorConfig,
    InfeasibleConfig,
    MalformedValue,
    MissingField,
    OutOfOrderBatch,
    generate_synthetic,
    parse_trade_event,
)
from .investigate import DuplicateFeedback, NotEscalated, UnknownCase
from .orchestrate import (
    FallbackImmutable,
    IllegalTransition,
    NotPending,
    Orchestrator,
    UnknownEscalation,
    UnknownProfile,
)
from .report import serialize_report

CONSOLE_DIST_ENV = "FCC_CONSOLE_DIST"

ONE_CENT = Decimal("0.01")
SIX_PLACES = Decimal("0.000001")


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class CostModelParams:
    users: Decimal = Decimal("100000")
    tx_per_user: Decimal = Decimal("100")
    suspicion_rate: Decimal = Decimal("0.045")
    manual_hours_per_alert: Decimal = Decimal("2")
    fte_hours_per_year: Decimal = Decimal("1875")
    api_calls_per_alert: Decimal = Decimal("2.22")
    usd_per_call: Decimal = Decimal(1) / Decimal(1666)
    automated_seconds_per_case: Decimal = Decimal("60")

    def validate(self) -> None:
        fields = (
            self.users,
            self.tx_per_user,
            self.suspicion_rate,
            self.manual_hours_per_alert,
            self.fte_hours_per_year,
            self.api_calls_per_alert,
            self.usd_per_call,
            self.automated_seconds_per_case,
        )
        if any(v < 0 for v in fields):
            raise InvalidParams("cost model parameters must be non-negative")
        if not Decimal(0) <= self.suspicion_rate <= Decimal(1):
            raise InvalidParams("suspicion_rate must be within [0, 1]")


@dataclass(frozen=True)
class CostReport:
    alerts_per_year: Decimal
    manual_hours: Decimal
    manual_fte: Decimal
    inference_cost_usd: Decimal
    reduction_fraction: Decimal

    def to_dict(self) -> dict:
        return {
            "alerts_per_year": self.alerts_per_year,
            "manual_hours": self.manual_hours,
            "manual_fte": self.manual_fte,
            "inference_cost_usd": self.inference_cost_usd,
            "reduction_fraction": self.reduction_fraction,
        }


def compute_cost_report(params: CostModelParams) -> CostReport:
    """Exact decimal arithmetic over the desk-scale cost model."""
    params.validate()
    alerts = params.users * params.tx_per_user * params.suspicion_rate
    manual_hours = alerts * params.manual_hours_per_alert
    if params.fte_hours_per_year > 0:
        manual_fte = manual_hours / params.fte_hours_per_year
    else:
        manual_fte = Decimal(0)
    inference = (alerts * params.api_calls_per_alert * params.usd_per_call).quantize(
        ONE_CENT, rounding=ROUND_HALF_UP
    )
    manual_seconds = params.manual_hours_per_alert * Decimal(3600)
    if manual_seconds > 0:
        reduction = Decimal(1) - params.automated_seconds_per_case / manual_seconds
    else:
        reduction = Decimal(0)
    reduction = max(Decimal(0), min(Decimal(1), reduction)).quantize(SIX_PLACES)
    return CostReport(
        alerts_per_year=alerts,
        manual_hours=manual_hours,
        manual_fte=manual_fte,
        inference_cost_usd=inference,
        reduction_fraction=reduction,
    )


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------


class BatchBody(BaseModel):
    events: list[dict]
    request_id: Optional[str] = None


class DecisionBody(BaseModel):
    decision: str
    rationale: str
    analyst: Optional[str] = None
    request_id: Optional[str] = None


class ScoreBody(BaseModel):
    outcome: str
    request_id: Optional[str] = None


class GenerateBody(BaseModel):
    seed: int = 42
    n_transactions: int = 1000
    n_wallets: int = 200
    target_suspicious_fraction: float = 0.045
    time_span_days: int = 90
    ingest: bool = True
    request_id: Optional[str] = None


ERROR_STATUS = {
    UnknownEscalation: 404,
    UnknownCase: 404,
    UnknownProfile: 404,
    NotPending: 409,
    DuplicateFeedback: 409,
    IllegalTransition: 409,
    NotEscalated: 409,
    FallbackImmutable: 409,
    EmptyRationale: 400,
    MissingField: 400,
    MalformedValue: 400,
    OutOfOrderBatch: 400,
    InfeasibleConfig: 400,
    InvalidParams: 400,
    ValueError: 400,
    KeyError: 404,
}


def _error_response(exc: Exception) -> JSONResponse:
    for klass, status in ERROR_STATUS.items():
        if isinstance(exc, klass):
            message = exc.args[0] if exc.args else str(exc)
            return JSONResponse(
                status_code=status, content={"code": type(exc).__name__, "message": str(message)}
            )
    raise exc


def create_app(engine: Orchestrator, dev_mode: bool | None = None) -> FastAPI:
    app = FastAPI(title="fcc-engine", version="0.1.0")
    app.state.engine = engine
    is_dev = engine.config.dev_mode if dev_mode is None else dev_mode

    async def _domain_errors(request: Request, exc: Exception):
        return _error_response(exc)

    for error_class in ERROR_STATUS:
        app.add_exception_handler(error_class, _domain_errors)

    @app.post("/api/v1/transactions:batch", status_code=202)
    def post_batch(body: BatchBody):
        request_id = body.request_id or f"req-{uuid.uuid4().hex[:12]}"
        if request_id in engine.request_results:
            return {"request_id": request_id, **engine.request_results[request_id]}
        events = [parse_trade_event(serialize_line(e)) for e in body.events]
        summary = engine.run_pipeline(events, request_id=request_id)
        return {"request_id": request_id, **summary.to_dict()}

    @app.post("/api/v1/generate", status_code=202)
    def post_generate(body: GenerateBody):
        if not is_dev:
            return JSONResponse(
                status_code=403,
                content={"code": "DevModeOnly", "message": "generate is a dev-mode endpoint"},
            )
        config = GeneratorConfig(
            seed=body.seed,
            n_wallets=body.n_wallets,
            n_transactions=body.n_transactions,
            target_suspicious_fraction=body.target_suspicious_fraction,
            time_span_days=body.time_span_days,
        )
        events, labels = generate_synthetic(config)
        response: dict = {
            "generated": len(events),
            "suspicious": sum(1 for l in labels if l.suspicious),
        }
        if body.ingest:
            request_id = body.request_id or f"req-{uuid.uuid4().hex[:12]}"
            summary = engine.run_pipeline(events, request_id=request_id)
            response.update({"request_id": request_id, **summary.to_dict()})
        return response

    @app.get("/api/v1/alerts")
    def get_alerts(wallet: Optional[str] = None, type: Optional[str] = None):
        return engine.alerts_view(wallet=wallet, alert_type=type)

    @app.get("/api/v1/cases")
    def get_cases():
        return engine.cases_view()

    @app.get("/api/v1/cases/{case_id}")
    def get_case(case_id: str):
        return engine.case_view(case_id)

    @app.get("/api/v1/escalations")
    def get_escalations():
        return engine.escalations_view()

    @app.post("/api/v1/escalations/{escalation_id}/decision")
    def post_decision(
        escalation_id: str,
        body: DecisionBody,
        x_analyst_id: Optional[str] = Header(default=None),
    ):
        request_id = body.request_id or f"req-{uuid.uuid4().hex[:12]}"
        analyst = body.analyst or x_analyst_id or "analyst-unknown"
        decided_at = datetime.now(timezone.utc).replace(microsecond=0)
        result = engine.decide(
            escalation_id,
            body.decision,
            body.rationale,
            analyst,
            decided_at=decided_at,
            request_id=request_id,
        )
        return {"request_id": request_id, **result}

    @app.get("/api/v1/reports/{report_id}")
    def get_report(report_id: str, format: str = Query(default="json")):
        report = engine.reports.get(report_id)
        if report is None:
            return JSONResponse(
                status_code=404,
                content={"code": "UnknownReport", "message": f"no report {report_id}"},
            )
        if format == "text":
            return PlainTextResponse(report.narrative)
        import json

        return JSONResponse(content=json.loads(serialize_report(report)))

    @app.get("/api/v1/audit/verify")
    def get_audit_verify():
        path = engine.store.audit_path
        if path is not None and path.exists():
            engine.audit.flush()
            violation = verify_file(path)
        else:
            violation = verify_records(engine.audit.records)
        if violation is None:
            return {"ok": True, "records": len(engine.audit.records)}
        return {"ok": False, "seq": violation.seq, "kind": violation.kind.value}

    @app.get("/api/v1/audit")
    def get_audit(case_id: Optional[str] = None, agent: Optional[str] = None, action: Optional[str] = None):
        records = engine.audit.query(case_id=case_id, agent=agent, action=action)
        return [r.to_dict() for r in records]

    @app.get("/api/v1/metrics")
    def get_metrics():
        return engine.metrics_view()

    @app.get("/api/v1/cost-report")
    def get_cost_report(
        U: Decimal = Decimal("100000"),
        R: Decimal = Decimal("100"),
        s: Decimal = Decimal("0.045"),
        h: Decimal = Decimal("2"),
        Y: Decimal = Decimal("1875"),
        k: Decimal = Decimal("2.22"),
        p: Optional[Decimal] = None,
        auto_s: Optional[Decimal] = None,
    ):
        params = CostModelParams(
            users=U,
            tx_per_user=R,
            suspicion_rate=s,
            manual_hours_per_alert=h,
            fte_hours_per_year=Y,
            api_calls_per_alert=k,
            usd_per_call=p if p is not None else Decimal(1) / Decimal(1666),
            automated_seconds_per_case=auto_s
            if auto_s is not None
            else engine.config.cost.automated_seconds_per_case,
        )
        return compute_cost_report(params).to_dict()

    @app.get("/api/v1/models")
    def get_models():
        return [p.to_dict() for p in engine.registry.profiles.values()]

    @app.post("/api/v1/models/{profile_id}/score")
    def post_model_score(profile_id: str, body: ScoreBody):
        request_id = body.request_id or f"req-{uuid.uuid4().hex[:12]}"
        at = datetime.now(timezone.utc).replace(microsecond=0)
        profile = engine.score_model(profile_id, body.outcome, at=at, request_id=request_id)
        return {"request_id": request_id, **profile.to_dict()}

    _mount_console(app)
    return app


def serialize_line(event_dict: dict) -> str:
    """Render an incoming event object as one ingestion-format line."""
    from .canonical import canonical_dumps

    return canonical_dumps(event_dict)


def _mount_console(app: FastAPI) -> None:
    """Serve the review console's static build when present (optional)."""
    candidates = []
    env = os.environ.get(CONSOLE_DIST_ENV)
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for dist in candidates:
        if dist.is_dir() and (dist / "index.html").exists():
            from fastapi.staticfiles import StaticFiles

            app.mount("/", StaticFiles(directory=str(dist), html=True), name="console")
            return


def serve(config: EngineConfig | None = None, config_path: str | None = None) -> None:
    """Boot the engine from persisted state and run the HTTP service."""
    import uvicorn

    if config is None:
        config = load_config(config_path)
    engine = Orchestrator.open(config)
    app = create_app(engine)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
