"""Deterministic, auditable financial-crime-compliance engine for NFT trade flows."""

from .config import EngineConfig, load_config
from .ingest import GeneratorConfig, TradeEvent, generate_synthetic, parse_trade_event
from .monitor import Alert, AlertType, Band, RulesetConfig, risk_band
from .orchestrate import CaseState, Orchestrator, PipelineSummary
from .service import CostModelParams, compute_cost_report, create_app

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AlertType",
    "Band",
    "CaseState",
    "CostModelParams",
    "EngineConfig",
    "GeneratorConfig",
    "Orchestrator",
    "PipelineSummary",
    "RulesetConfig",
    "TradeEvent",
    "compute_cost_report",
    "create_app",
    "generate_synthetic",
    "load_config",
    "parse_trade_event",
    "risk_band",
    "__version__",
]
